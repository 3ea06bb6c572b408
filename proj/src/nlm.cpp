#include "eabp/nlm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "eabp/error.hpp"
#include "eabp/kernels.hpp"

namespace eabp::nlm {

Eigen::VectorXd extract_features(const train::TrainedPINN& trained, const Point& x) {
  const auto& net = trained.params;
  const auto h = nn::hidden_features(net, std::span<const double>(x.data(), static_cast<std::size_t>(net.input_dim())));
  Eigen::VectorXd phi(static_cast<Eigen::Index>(h.size() + 1));
  for (std::size_t i = 0; i < h.size(); ++i) phi[static_cast<Eigen::Index>(i)] = h[i];
  phi[phi.size() - 1] = 1.0;
  return phi;
}

Eigen::MatrixXd feature_matrix(const train::TrainedPINN& trained, std::span<const Point> points) {
  const Eigen::Index F = trained.params.feature_dim() + 1;
  Eigen::MatrixXd phi(static_cast<Eigen::Index>(points.size()), F);
  kernels::parallel_for(points.size(), [&](std::size_t j) {
    phi.row(static_cast<Eigen::Index>(j)) = extract_features(trained, points[j]).transpose();
  });
  if (!phi.allFinite()) throw Error(ErrorKind::domain, "non-finite hidden features");
  return phi;
}

SimulatedDataset simulated_dataset(const train::TrainedPINN& trained, std::span<const Point> points,
                                   std::span<const double> sigma_p) {
  if (sigma_p.size() != points.size()) throw Error(ErrorKind::shape, "sigma_P profile does not match the points");
  const auto& problem = *trained.problem;
  const auto dim = static_cast<std::size_t>(trained.params.input_dim());
  SimulatedDataset d;
  d.points.assign(points.begin(), points.end());
  d.targets.resize(static_cast<Eigen::Index>(points.size()));
  d.variances.resize(static_cast<Eigen::Index>(points.size()));
  for (std::size_t j = 0; j < points.size(); ++j) {
    const auto i = static_cast<Eigen::Index>(j);
    d.targets[i] = nn::forward(trained.params, std::span<const double>(points[j].data(), dim));
    const double m = problem.mask(points[j]).value();
    const double v = std::max(sigma_p[j] * sigma_p[j], kVarianceFloor);
    d.variances[i] = m == 0.0 ? std::numeric_limits<double>::infinity() : v / (m * m);
  }
  return d;
}

NlmPosterior nlm_fit(const Eigen::MatrixXd& features, const SimulatedDataset& data, double prior_sigma) {
  const Eigen::Index M = features.rows(), F = features.cols();
  if (data.targets.size() != M || data.variances.size() != M)
    throw Error(ErrorKind::shape, "feature rows do not match the dataset");
  if (!(prior_sigma > 0.0) || !std::isfinite(prior_sigma))
    throw Error(ErrorKind::config, "prior sigma must be positive and finite");
  for (Eigen::Index j = 0; j < M; ++j)
    if (!(data.variances[j] > 0.0)) throw Error(ErrorKind::domain, "likelihood variances must be positive");

  // [V^{-1/2} Phi; sigma^{-1} I] mu ~ [V^{-1/2} y; 0]
  Eigen::MatrixXd A(M + F, F);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(M + F);
  for (Eigen::Index j = 0; j < M; ++j) {
    const double w = 1.0 / std::sqrt(data.variances[j]);
    A.row(j) = w * features.row(j);
    b[j] = w == 0.0 ? 0.0 : w * data.targets[j];
  }
  A.bottomRows(F) = Eigen::MatrixXd::Identity(F, F) / prior_sigma;

  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
  const Eigen::MatrixXd R = qr.matrixQR().topRows(F).triangularView<Eigen::Upper>();
  const double rmax = R.diagonal().cwiseAbs().maxCoeff();
  const double rmin = R.diagonal().cwiseAbs().minCoeff();
  if (!std::isfinite(rmax) || !(rmin > rmax * std::numeric_limits<double>::epsilon()))
    throw Error(ErrorKind::conditioning, "NLM normal matrix is numerically singular (|R| diag range " +
                                             std::to_string(rmin) + " .. " + std::to_string(rmax) + ")");

  const Eigen::MatrixXd Rinv = R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(F, F));
  NlmPosterior post;
  post.prior_sigma = prior_sigma;
  post.covariance = Rinv * Rinv.transpose();
  post.covariance = 0.5 * (post.covariance + post.covariance.transpose()).eval();
  const Eigen::VectorXd qtb = (qr.householderQ().transpose() * b).head(F);
  post.mean = R.triangularView<Eigen::Upper>().solve(qtb);

  const Eigen::LLT<Eigen::MatrixXd> llt(post.covariance);
  if (llt.info() != Eigen::Success || !post.mean.allFinite())
    throw Error(ErrorKind::conditioning, "NLM posterior covariance is not positive definite (prior sigma " +
                                             std::to_string(prior_sigma) + ")");
  return post;
}

Prediction nlm_predict(const NlmPosterior& posterior, const Eigen::VectorXd& phi, double sigma_p) {
  if (phi.size() != posterior.mean.size()) throw Error(ErrorKind::shape, "feature vector has the wrong dimension");
  const double epi = phi.dot(posterior.covariance * phi);
  return {phi.dot(posterior.mean), sigma_p * sigma_p + std::max(epi, 0.0)};
}

Prediction nlm_predict(const NlmPosterior& posterior, const Eigen::VectorXd& phi, double sigma_p, double offset,
                       double mask) {
  const Prediction raw = nlm_predict(posterior, phi, 0.0);
  return {offset + mask * raw.mean, sigma_p * sigma_p + mask * mask * raw.variance};
}

EvalGrid make_eval_grid(const train::TrainedPINN& trained, std::span<const Point> points,
                        std::span<const double> sigma_p) {
  if (sigma_p.size() != points.size()) throw Error(ErrorKind::shape, "sigma_P profile does not match the grid");
  const auto& problem = *trained.problem;
  const auto n = static_cast<Eigen::Index>(points.size());
  EvalGrid g;
  g.features = feature_matrix(trained, points);
  g.offset.resize(n);
  g.mask.resize(n);
  g.u_mse.resize(n);
  g.sigma_p = Eigen::Map<const Eigen::VectorXd>(sigma_p.data(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = points[static_cast<std::size_t>(i)];
    g.offset[i] = problem.offset(p).value();
    g.mask[i] = problem.mask(p).value();
    g.u_mse[i] = problems::surrogate_value(problem, trained.params, p);
  }
  return g;
}

std::vector<double> default_prior_candidates() {
  constexpr int n = 100;
  std::vector<double> c(n);
  for (int i = 0; i < n; ++i) c[i] = 0.1 + 0.9 * static_cast<double>(i) / (n - 1);
  c.back() = 1.0;
  return c;
}

namespace {

struct CandidateScore {
  double objective = 0.0;
  std::size_t violations = 0;
};

CandidateScore score(const NlmPosterior& post, const EvalGrid& g) {
  double mean_sq = 0.0, sd_sq = 0.0;
  std::size_t violations = 0;
  for (Eigen::Index i = 0; i < g.features.rows(); ++i) {
    const Prediction p = nlm_predict(post, g.features.row(i).transpose(), g.sigma_p[i], g.offset[i], g.mask[i]);
    const double sd = std::sqrt(p.variance);
    const double dev = std::abs(p.mean - g.u_mse[i]);
    if (dev > 3.0 * sd - g.sigma_p[i]) ++violations;
    mean_sq += dev * dev;
    sd_sq += (sd - g.sigma_p[i]) * (sd - g.sigma_p[i]);
  }
  return {std::sqrt(mean_sq) + std::sqrt(sd_sq), violations};
}

} // namespace

PriorSearchResult optimize_prior(const Eigen::MatrixXd& features, const SimulatedDataset& data, const EvalGrid& grid,
                                 std::span<const double> candidates) {
  if (candidates.empty()) throw Error(ErrorKind::config, "prior search needs at least one candidate");
  const auto n = grid.features.rows();
  if (grid.offset.size() != n || grid.mask.size() != n || grid.u_mse.size() != n || grid.sigma_p.size() != n)
    throw Error(ErrorKind::shape, "evaluation grid columns disagree in length");

  std::vector<NlmPosterior> fits(candidates.size());
  std::vector<CandidateScore> scores(candidates.size());
  kernels::parallel_for(candidates.size(), [&](std::size_t c) {
    fits[c] = nlm_fit(features, data, candidates[c]);
    scores[c] = score(fits[c], grid);
  });

  std::size_t best = candidates.size();
  for (std::size_t c = 0; c < candidates.size(); ++c)
    if (scores[c].violations == 0 && (best == candidates.size() || scores[c].objective < scores[best].objective))
      best = c;
  const bool flagged = best == candidates.size();
  if (flagged) {
    best = 0;
    for (std::size_t c = 1; c < candidates.size(); ++c)
      if (scores[c].violations < scores[best].violations ||
          (scores[c].violations == scores[best].violations && scores[c].objective < scores[best].objective))
        best = c;
  }

  PriorSearchResult r;
  r.posterior = fits[best];
  r.prior_sigma = candidates[best];
  r.objective = scores[best].objective;
  r.violations = scores[best].violations;
  r.flagged = flagged;
  r.candidates.assign(candidates.begin(), candidates.end());
  for (const auto& s : scores) {
    r.objectives.push_back(s.objective);
    r.candidate_violations.push_back(s.violations);
  }
  return r;
}

nlohmann::json posterior_to_json(const NlmPosterior& posterior, bool flagged) {
  nlohmann::json upper = nlohmann::json::array();
  const auto F = posterior.covariance.rows();
  for (Eigen::Index i = 0; i < F; ++i)
    for (Eigen::Index j = i; j < F; ++j) upper.push_back(posterior.covariance(i, j));
  return {
      {"prior_sigma", posterior.prior_sigma},
      {"mean", std::vector<double>(posterior.mean.data(), posterior.mean.data() + posterior.mean.size())},
      {"covariance_upper", upper},
      {"dimension", F},
      {"flags", {{"prior_infeasible", flagged}}},
  };
}

} // namespace eabp::nlm
