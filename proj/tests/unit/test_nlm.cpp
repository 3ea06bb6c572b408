#include <doctest.h>

#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "eabp/bounds.hpp"
#include "eabp/error.hpp"
#include "eabp/nlm.hpp"
#include "support/oracles.hpp"

using namespace eabp;

namespace {

nlm::SimulatedDataset scalar_data(double y, double v) {
  nlm::SimulatedDataset d;
  d.points = {{0.0, 0.0}};
  d.targets = Eigen::VectorXd::Constant(1, y);
  d.variances = Eigen::VectorXd::Constant(1, v);
  return d;
}

double rel_mat(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff();
}

} // namespace

TEST_CASE("one-dimensional hand examples") {
  const Eigen::MatrixXd phi = Eigen::MatrixXd::Ones(1, 1);
  const auto wide = nlm::nlm_fit(phi, scalar_data(4.0, 1.0), 1e6);
  CHECK(wide.mean[0] == doctest::Approx(4.0).epsilon(1e-9));
  CHECK(wide.covariance(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
  const auto unit = nlm::nlm_fit(phi, scalar_data(4.0, 1.0), 1.0);
  CHECK(unit.mean[0] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(unit.covariance(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
  const auto zero = nlm::nlm_fit(phi, scalar_data(0.0, 1.0), 0.3);
  CHECK(zero.mean[0] == 0.0);

  nlm::NlmPosterior post{Eigen::VectorXd::Constant(1, 2.0), Eigen::MatrixXd::Constant(1, 1, 0.5), 1.0};
  const auto pr = nlm::nlm_predict(post, Eigen::VectorXd::Constant(1, 3.0), 0.5);
  CHECK(pr.mean == doctest::Approx(6.0));
  CHECK(pr.variance == doctest::Approx(4.75));
  nlm::NlmPosterior flat{Eigen::VectorXd::Constant(1, 2.0), Eigen::MatrixXd::Zero(1, 1), 1.0};
  CHECK(nlm::nlm_predict(flat, Eigen::VectorXd::Constant(1, 3.0), 0.0).variance == 0.0);
  const auto pinned = nlm::nlm_predict(post, Eigen::VectorXd::Constant(1, 3.0), 0.0, 2.0, 0.0);
  CHECK(pinned.mean == 2.0);
  CHECK(pinned.variance == 0.0);
}

TEST_CASE("invalid inputs") {
  const Eigen::MatrixXd phi = Eigen::MatrixXd::Ones(2, 1);
  CHECK_THROWS_AS(nlm::nlm_fit(phi, scalar_data(1.0, 1.0), 1.0), Error);
  const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
  CHECK_THROWS_AS(nlm::nlm_fit(one, scalar_data(1.0, 1.0), 0.0), Error);
  CHECK_THROWS_AS(nlm::nlm_fit(one, scalar_data(1.0, -1.0), 1.0), Error);
}

TEST_CASE("fit matches a 50-digit brute-force solve for F = 33, M = 32 and M = 64") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> u(0.01, 2.0);
  for (int M : {32, 64}) {
    Eigen::MatrixXd Phi(M, 33);
    for (int j = 0; j < M; ++j) {
      for (int a = 0; a < 32; ++a) Phi(j, a) = std::tanh(n01(rng));
      Phi(j, 32) = 1.0;
    }
    nlm::SimulatedDataset d;
    d.points.resize(M);
    d.targets.resize(M);
    d.variances.resize(M);
    for (int j = 0; j < M; ++j) d.targets[j] = n01(rng), d.variances[j] = u(rng);
    for (double s : {0.1, 0.55, 1.0}) {
      const auto post = nlm::nlm_fit(Phi, d, s);
      const auto [mu, S] = oracle::weighted_normal_solve(Phi, d.targets, d.variances, s);
      CHECK(rel_mat(post.mean, mu) < 1e-8);
      CHECK(rel_mat(post.covariance, S) < 1e-8);
    }
  }
}

TEST_CASE("row order does not change the posterior and shrinkage is monotone") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  Eigen::MatrixXd Phi(20, 5);
  for (int j = 0; j < 20; ++j)
    for (int a = 0; a < 5; ++a) Phi(j, a) = n01(rng);
  nlm::SimulatedDataset d;
  d.points.resize(20);
  d.targets = Eigen::VectorXd::NullaryExpr(20, [&] { return n01(rng); });
  d.variances = Eigen::VectorXd::Constant(20, 0.3);
  const auto base = nlm::nlm_fit(Phi, d, 0.7);

  std::vector<int> perm(20);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Eigen::MatrixXd P2(20, 5);
  auto d2 = d;
  for (int j = 0; j < 20; ++j) {
    P2.row(j) = Phi.row(perm[j]);
    d2.targets[j] = d.targets[perm[j]];
  }
  const auto shuffled = nlm::nlm_fit(P2, d2, 0.7);
  CHECK(rel_mat(shuffled.mean, base.mean) < 1e-12);
  CHECK(rel_mat(shuffled.covariance, base.covariance) < 1e-12);

  double prev = std::numeric_limits<double>::infinity();
  for (double s : {1.0, 0.5, 0.1, 0.01, 1e-4}) {
    const double n = nlm::nlm_fit(Phi, d, s).mean.norm();
    CHECK(n < prev);
    prev = n;
  }
  CHECK(prev < 1e-6);
}

TEST_CASE("features, simulated data and predictive variance on a trained model") {
  const auto p = problems::make_problem("ode1.exp");
  const auto t = train::train_deterministic(p, train::ode_config(100, 0));
  const auto phi = nlm::extract_features(t, {0.5, 0.0});
  CHECK(phi.size() == 33);
  CHECK(phi[32] == 1.0);
  nn::Network zero({1, 32, 32, 1}, nn::Activation::tanh);
  train::TrainedPINN z{zero, p, {}, t.config};
  const auto pz = nlm::extract_features(z, {0.5, 0.0});
  CHECK(pz.head(32).isZero(0.0));

  const auto pts = t.collocation_points();
  const auto env = bounds::estimate_envelope(t);
  const auto sp = bounds::PseudoSigma::for_ode(t, env).evaluate(pts);
  const auto data = nlm::simulated_dataset(t, pts, sp);
  CHECK(std::isinf(data.variances[0])); // mask vanishes at x0
  for (std::size_t j = 1; j < pts.size(); ++j) {
    const double px[] = {pts[j][0]};
    const double m = 1.0 - std::exp(-pts[j][0]);
    CHECK(data.targets[j] == nn::forward(t.params, px));
    CHECK(data.variances[j] == doctest::Approx(std::max(sp[j] * sp[j], 1e-10) / (m * m)).epsilon(1e-12));
  }

  const auto post = nlm::nlm_fit(nlm::feature_matrix(t, pts), data, 0.5);
  std::vector<problems::Point> grid;
  for (int i = 0; i <= 80; ++i) grid.push_back({0.05 * i, 0.0});
  const auto sg = bounds::PseudoSigma::for_ode(t, env).evaluate(grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double m = p->mask(grid[i]).value(), off = p->offset(grid[i]).value();
    const auto pr = nlm::nlm_predict(post, nlm::extract_features(t, grid[i]), sg[i], off, m);
    CHECK(pr.variance >= sg[i] * sg[i]);
  }
}

TEST_CASE("prior search") {
  const auto cands = nlm::default_prior_candidates();
  REQUIRE(cands.size() == 100);
  CHECK(cands.front() == doctest::Approx(0.1));
  CHECK(cands.back() == doctest::Approx(1.0));
  for (std::size_t i = 1; i < cands.size(); ++i) CHECK(cands[i] > cands[i - 1]);

  // Two points with scalar feature 1: posterior and objective in closed form.
  Eigen::MatrixXd Phi = Eigen::MatrixXd::Ones(2, 1);
  nlm::SimulatedDataset d;
  d.points = {{1.0, 0.0}, {2.0, 0.0}};
  d.targets = Eigen::VectorXd::Constant(2, 1.0);
  d.variances = Eigen::VectorXd::Constant(2, 1.0);
  nlm::EvalGrid g;
  g.features = Eigen::MatrixXd::Ones(2, 1);
  g.offset = Eigen::VectorXd::Zero(2);
  g.mask = Eigen::VectorXd::Ones(2);
  g.u_mse = Eigen::VectorXd::Constant(2, 1.0);
  g.sigma_p = Eigen::VectorXd::Constant(2, 1.0);

  auto objective = [&](double s) {
    const double S = 1.0 / (2.0 + 1.0 / (s * s)), mu = 2.0 * S;
    const double sd = std::sqrt(1.0 + S);
    return std::sqrt(2.0) * std::abs(mu - 1.0) + std::sqrt(2.0) * std::abs(sd - 1.0);
  };
  const double two[] = {0.2, 0.9};
  const auto r = nlm::optimize_prior(Phi, d, g, two);
  CHECK(!r.flagged);
  CHECK(r.violations == 0);
  CHECK(r.objectives.size() == 2);
  CHECK(r.objectives[0] == doctest::Approx(objective(0.2)).epsilon(1e-12));
  CHECK(r.objectives[1] == doctest::Approx(objective(0.9)).epsilon(1e-12));
  CHECK(r.prior_sigma == (objective(0.9) < objective(0.2) ? 0.9 : 0.2));

  const double single[] = {0.5};
  CHECK(nlm::optimize_prior(Phi, d, g, single).prior_sigma == 0.5);

  // Infeasible everywhere: the truth sits far outside 3 sd - sigma_P.
  g.u_mse = Eigen::VectorXd::Constant(2, 50.0);
  const auto bad = nlm::optimize_prior(Phi, d, g, cands);
  CHECK(bad.flagged);
  CHECK(bad.candidates.size() == 100);
  CHECK(bad.violations == 2);
  const auto j = nlm::posterior_to_json(bad.posterior, bad.flagged);
  CHECK(j["flags"]["prior_infeasible"].get<bool>());
}
