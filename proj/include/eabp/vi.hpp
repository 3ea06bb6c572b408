#pragma once

// Mean-field Gaussian variational inference over all network weights
// (Bayes by backprop), with either a residual likelihood or a likelihood on
// simulated data u_MSE(x_j) with variance sigma_P^2(x_j).

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "eabp/adam.hpp"
#include "eabp/network.hpp"
#include "eabp/problems.hpp"
#include "eabp/train.hpp"

namespace eabp::vi {

using problems::Point;

inline constexpr double kVarianceFloor = 1e-10;

enum class Likelihood { baseline_residual, error_aware_simulated };

std::string_view to_string(Likelihood l);

double softplus(double rho);
double softplus_inverse(double sigma);

struct MeanFieldGaussian {
  nn::Network architecture; // parameter values are the means
  std::vector<double> rho;
  bool means_frozen = true;

  std::span<const double> mu() const { return architecture.parameters(); }
  double sigma(std::size_t i) const { return softplus(rho[i]); }
  std::size_t size() const { return rho.size(); }
};

struct ViConfig {
  double prior_sigma = 0.1;
  std::size_t epochs = 50000;
  std::size_t mc_samples_per_step = 1;
  Likelihood likelihood = Likelihood::error_aware_simulated;
  double sigma_d = 1.0; // residual noise sd for the baseline likelihood
  std::size_t n_posterior_samples = 1000;
  std::uint64_t seed = 0;
  double learning_rate = 0.01;
  double rho_lo = -5.0;
  double rho_hi = -4.0;
  // ELBO re-evaluated every step on this many fixed noise draws; 0 disables.
  std::size_t monitor_samples = 4;
};

// Means copied from the trained weights and frozen; rho ~ U[rho_lo, rho_hi].
MeanFieldGaussian vi_init(const train::TrainedPINN& trained, std::uint64_t seed, double rho_lo = -5.0,
                          double rho_hi = -4.0);

// KL(q || N(0, prior_sigma^2 I)) in closed form.
double kl_diag(const MeanFieldGaussian& q, double prior_sigma);
double kl_diag(std::span<const double> mu, std::span<const double> sigma, double prior_sigma);

// Per-point likelihood data. For the simulated-data likelihood, targets are
// u_MSE(x_j) and variances max(sigma_P^2, floor); the baseline ignores both.
struct LikelihoodData {
  std::vector<Point> points;
  std::vector<double> targets;
  std::vector<double> variances;
};

LikelihoodData baseline_data(const train::TrainedPINN& trained);
LikelihoodData simulated_data(const train::TrainedPINN& trained, std::span<const double> sigma_p_at_points);

// Negative log-likelihood of one weight vector (constants included), and its
// gradient w.r.t. the weights when grad is non-empty (empty: value only).
double negative_log_likelihood(const problems::Problem& problem, const nn::Network& theta, const LikelihoodData& data,
                               const ViConfig& config, std::span<double> grad);

// One reparameterized gradient step on -ELBO at a time.
class ElboOptimizer {
public:
  ElboOptimizer(MeanFieldGaussian q, std::shared_ptr<const problems::Problem> problem, LikelihoodData data,
                ViConfig config);

  // Draws noise, updates rho (and mu unless frozen) with Adam, and returns the
  // single-draw ELBO estimate at the pre-update parameters.
  // Throws ErrorKind::training_diverged on a non-finite ELBO.
  double step();
  // ELBO averaged over the fixed monitor draws at the current parameters.
  double monitored_elbo() const;

  const MeanFieldGaussian& posterior() const { return q_; }
  std::size_t steps_taken() const { return steps_; }

private:
  double sample_elbo(std::span<const double> zeta, std::span<double> grad_theta) const;

  MeanFieldGaussian q_;
  std::shared_ptr<const problems::Problem> problem_;
  LikelihoodData data_;
  ViConfig config_;
  nn::AdamState adam_;
  std::mt19937_64 rng_;
  std::vector<std::vector<double>> monitor_noise_;
  std::size_t steps_ = 0;
};

struct ViResult {
  MeanFieldGaussian posterior;
  std::vector<double> elbo_trace;    // single-draw estimates, one per step
  std::vector<double> monitor_trace; // fixed-draw ELBO after each step
};

// Runs config.epochs steps. sigma_p_at_collocation is required iff the
// likelihood is the simulated-data one.
ViResult train_vi(const train::TrainedPINN& trained, const ViConfig& config,
                  std::optional<std::span<const double>> sigma_p_at_collocation = std::nullopt);

// Moving average of the last `window` entries ending at each index >= window-1.
std::vector<double> moving_average(std::span<const double> trace, std::size_t window);

// theta = mu + sigma * zeta, zeta ~ N(0, I); deterministic given seed.
std::vector<nn::Network> sample_posterior(const MeanFieldGaussian& q, std::size_t n, std::uint64_t seed);

struct PredictiveBand {
  std::vector<Point> grid;
  std::vector<double> mean;
  std::vector<double> epistemic_var;
  std::vector<double> sigma_p2;
  std::vector<double> total_var;
};

// Sample mean and population variance of the transformed surrogate at every
// grid point; sigma_P^2 is added to the total when a profile is given.
PredictiveBand predictive_moments(std::span<const nn::Network> samples, const problems::Problem& problem,
                                  std::span<const Point> grid,
                                  std::optional<std::span<const double>> sigma_p = std::nullopt);
// Same moments from precomputed values, row-major [grid][sample].
PredictiveBand predictive_moments(std::span<const double> values, std::size_t n_samples, std::span<const Point> grid,
                                  std::optional<std::span<const double>> sigma_p = std::nullopt);

// Columns x,mean,epistemic_var,sigma_P2,total_var (x,t,... for space-time grids).
void write_band_csv(const PredictiveBand& band, std::ostream& out, bool space_time = false);

} // namespace eabp::vi
