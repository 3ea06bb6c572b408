#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "eabp/kernels.hpp"
#include "eabp/network.hpp"
#include "eabp/problems.hpp"

namespace eabp::train {

using problems::Point;

struct CollocationSpec {
  // Equally spaced points per input dimension over the problem's training box.
  std::vector<std::size_t> counts{32};
  // Uniform per-epoch coordinate jitter, as a fraction of one grid cell.
  double jitter = 0.0;
};

struct TrainConfig {
  std::size_t epochs = 10000;
  std::size_t batch_size = 32;
  double learning_rate = 0.01;
  CollocationSpec collocation;
  std::uint64_t seed = 0;
  std::vector<int> hidden{32, 32};
  nn::Activation activation = nn::Activation::tanh;
};

// 2x32 tanh, lr 0.01, 32 equally spaced points, full batch.
TrainConfig ode_config(std::size_t epochs, std::uint64_t seed = 0);
// 2x32 sigmoid, lr 1e-3, nx x nt grid jittered by half a cell, full batch.
TrainConfig burgers_config(std::size_t nx, std::size_t nt, std::size_t epochs, std::uint64_t seed = 0);

struct TrainedPINN {
  nn::Network params;
  std::shared_ptr<const problems::Problem> problem;
  std::vector<double> loss_history; // mean squared residual at the start of each epoch
  TrainConfig config;

  std::vector<Point> collocation_points() const;
  double final_loss() const { return loss_history.empty() ? 0.0 : loss_history.back(); }
};

std::vector<Point> collocation_grid(const problems::Problem& problem, const CollocationSpec& spec);

// Loss head for r^2 * weight at one point: returns the loss and its
// cotangent on the raw network jet.
kernels::PointLoss residual_square_head(const problems::Problem& problem, const Point& p, const Jet2& raw,
                                        double weight);

double mse_residual_loss(const problems::Problem& problem, const nn::Network& net, std::span<const Point> points);

// Full-batch (or batch-partitioned) Adam on the mean squared residual.
// Throws ErrorKind::training_diverged carrying the epoch on NaN/Inf.
TrainedPINN train_deterministic(std::shared_ptr<const problems::Problem> problem, const TrainConfig& config);

// Weights file plus a JSON sidecar at <weights>.json.
void save_trained(const TrainedPINN& trained, const std::filesystem::path& weights_path);
TrainedPINN load_trained(const std::filesystem::path& weights_path, std::shared_ptr<const problems::Problem> problem);

} // namespace eabp::train
