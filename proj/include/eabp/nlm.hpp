#pragma once

// Neural linear model: Bayesian linear regression on the last hidden layer
// of a trained network, with a heteroscedastic likelihood built from sigma_P.

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "eabp/problems.hpp"
#include "eabp/train.hpp"

namespace eabp::nlm {

using problems::Point;

// Variances below this are clamped before entering the likelihood.
inline constexpr double kVarianceFloor = 1e-10;

// Last-hidden-layer activations followed by a constant 1.
Eigen::VectorXd extract_features(const train::TrainedPINN& trained, const Point& x);
// One row per point.
Eigen::MatrixXd feature_matrix(const train::TrainedPINN& trained, std::span<const Point> points);

// Regression data (x_j, y_j, v_j) with Gaussian noise variance v_j. An
// infinite variance drops the row from the likelihood.
struct SimulatedDataset {
  std::vector<Point> points;
  Eigen::VectorXd targets;
  Eigen::VectorXd variances;
};

// Data for the linear head in raw-network space: targets are the trained
// network's raw outputs and variances are max(sigma_P^2, floor) / mask^2, so
// that mask * raw carries variance sigma_P^2 after the hard-constraint
// transform.
SimulatedDataset simulated_dataset(const train::TrainedPINN& trained, std::span<const Point> points,
                                   std::span<const double> sigma_p);

struct NlmPosterior {
  Eigen::VectorXd mean;       // mu_p
  Eigen::MatrixXd covariance; // Sigma_p
  double prior_sigma = 1.0;
};

// Sigma_p = (Phi^T V^{-1} Phi + sigma^{-2} I)^{-1}, mu_p = Sigma_p Phi^T V^{-1} y,
// via Householder QR of the stacked whitened system. Throws
// ErrorKind::conditioning when the factor is singular or Sigma_p fails Cholesky.
NlmPosterior nlm_fit(const Eigen::MatrixXd& features, const SimulatedDataset& data, double prior_sigma);

struct Prediction {
  double mean = 0.0;
  double variance = 0.0;
};

// Linear-head prediction before the hard-constraint transform:
// mean phi.mu_p, variance sigma_P^2 + phi Sigma_p phi^T.
Prediction nlm_predict(const NlmPosterior& posterior, const Eigen::VectorXd& phi, double sigma_p);

// Same, pushed through u = offset + mask * head. The epistemic term scales by
// mask^2; sigma_P^2 is added unscaled.
Prediction nlm_predict(const NlmPosterior& posterior, const Eigen::VectorXd& phi, double sigma_p, double offset,
                       double mask);

// Everything the prior search needs on its evaluation grid.
struct EvalGrid {
  Eigen::MatrixXd features; // one row per grid point
  Eigen::VectorXd offset;
  Eigen::VectorXd mask;
  Eigen::VectorXd u_mse;
  Eigen::VectorXd sigma_p;
};

EvalGrid make_eval_grid(const train::TrainedPINN& trained, std::span<const Point> points,
                        std::span<const double> sigma_p);

struct PriorSearchResult {
  NlmPosterior posterior;
  double prior_sigma = 0.0;
  double objective = 0.0;
  std::size_t violations = 0; // grid points breaking the coverage constraint
  bool flagged = false;       // no candidate satisfied the constraint everywhere
  std::vector<double> candidates;
  std::vector<double> objectives;
  std::vector<std::size_t> candidate_violations;
};

// 100 equally spaced values in [0.1, 1].
std::vector<double> default_prior_candidates();

// For every candidate: fit, then on the grid require
//   |mean - u_mse| <= 3 sd - sigma_P
// and score ||mean - u_mse||_2 + ||sd - sigma_P||_2. Returns the best feasible
// candidate, else the one with the fewest violations (flagged).
PriorSearchResult optimize_prior(const Eigen::MatrixXd& features, const SimulatedDataset& data, const EvalGrid& grid,
                                 std::span<const double> candidates);

nlohmann::json posterior_to_json(const NlmPosterior& posterior, bool flagged);

} // namespace eabp::nlm
