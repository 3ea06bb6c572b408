#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numbers>
#include <sstream>

#include "eabp/bounds.hpp"
#include "eabp/error.hpp"
#include "eabp/vi.hpp"
#include "support/oracles.hpp"

using namespace eabp;

namespace {

const train::TrainedPINN& trained_exp() {
  static const auto t = train::train_deterministic(problems::make_problem("ode1.exp"), train::ode_config(200, 0));
  return t;
}

} // namespace

TEST_CASE("softplus and its inverse") {
  CHECK(vi::softplus(0.0) == doctest::Approx(std::log(2.0)));
  CHECK(vi::softplus(-5.0) == doctest::Approx(0.0067153).epsilon(1e-4));
  CHECK(vi::softplus(-4.0) == doctest::Approx(0.0181499).epsilon(1e-4));
  CHECK(vi::softplus(-800.0) >= 0.0);
  CHECK(std::isfinite(vi::softplus(800.0)));
  for (double s : {1e-6, 0.01, 0.7, 5.0}) CHECK(vi::softplus(vi::softplus_inverse(s)) == doctest::Approx(s).epsilon(1e-12));
}

TEST_CASE("initialization copies the means and draws rho in range") {
  const auto& t = trained_exp();
  const auto q = vi::vi_init(t, 4);
  CHECK(q.means_frozen);
  CHECK(std::memcmp(q.mu().data(), t.params.parameters().data(), t.params.size() * sizeof(double)) == 0);
  for (std::size_t i = 0; i < q.size(); ++i) {
    CHECK(q.sigma(i) >= 0.0067);
    CHECK(q.sigma(i) <= 0.0182);
  }
  const auto q2 = vi::vi_init(t, 4);
  CHECK(q2.rho == q.rho);
}

TEST_CASE("closed-form KL") {
  const double mu[] = {0.0}, sd[] = {0.5};
  CHECK(vi::kl_diag(mu, sd, 1.0) == doctest::Approx(std::log(2.0) + (0.25 - 1.0) / 2.0).epsilon(1e-14));
  CHECK(vi::kl_diag(mu, sd, 1.0) == doctest::Approx(0.3181).epsilon(1e-4));
  const double m2[] = {0.0, 0.0}, s2[] = {0.3, 0.3};
  CHECK(vi::kl_diag(m2, s2, 0.3) == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("closed-form KL agrees with a Monte Carlo estimate") {
  const double mu[] = {0.3, -0.2, 0.05}, sd[] = {0.2, 0.5, 0.1};
  const double prior = 0.4;
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n01;
  const int n = 200000;
  double acc = 0.0;
  for (int s = 0; s < n; ++s) {
    for (int i = 0; i < 3; ++i) {
      const double z = n01(rng), w = mu[i] + sd[i] * z;
      acc += -std::log(sd[i]) - 0.5 * z * z + std::log(prior) + 0.5 * w * w / (prior * prior);
    }
  }
  CHECK(acc / n == doctest::Approx(vi::kl_diag(mu, sd, prior)).epsilon(0.01));
}

TEST_CASE("KL derivative through softplus matches finite differences in rho") {
  const double mu[] = {0.2};
  for (double rho : {-6.0, -4.5, 0.3}) {
    auto kl = [&](double r) {
      const double sd[] = {vi::softplus(r)};
      return vi::kl_diag(mu, sd, 0.1);
    };
    const double s = vi::softplus(rho), dsig = 1.0 / (1.0 + std::exp(-rho));
    const double analytic = (-1.0 / s + s / 0.01) * dsig;
    CHECK(analytic == doctest::Approx((kl(rho + 1e-6) - kl(rho - 1e-6)) / 2e-6).epsilon(1e-6));
  }
}

TEST_CASE("baseline likelihood with identically zero residual is -(M/2) ln 2 pi") {
  problems::OdeSpec s;
  s.id = "const";
  s.order = 1;
  s.lambda = 3.0;
  s.u0 = 2.0;
  s.source = [](const Jet2& t) { return 6.0 + 0.0 * t; };
  auto p = std::make_shared<const problems::OdeProblem>(s);
  nn::Network zero({1, 3, 1}, nn::Activation::tanh);
  train::TrainedPINN t{zero, p, {}, train::ode_config(0)};
  const auto data = vi::baseline_data(t);
  vi::ViConfig cfg;
  cfg.likelihood = vi::Likelihood::baseline_residual;
  const double M = static_cast<double>(data.points.size());
  CHECK(M == 32);
  std::vector<double> g(zero.size());
  const double nll = vi::negative_log_likelihood(*p, zero, data, cfg, g);
  CHECK(-nll == doctest::Approx(-0.5 * M * std::log(2 * std::numbers::pi)).epsilon(1e-14));
}

TEST_CASE("likelihood gradients match finite differences for both likelihoods") {
  const auto& t = trained_exp();
  const auto env = bounds::estimate_envelope(t);
  const auto sp = bounds::PseudoSigma::for_ode(t, env).evaluate(t.collocation_points());
  for (auto lk : {vi::Likelihood::baseline_residual, vi::Likelihood::error_aware_simulated}) {
    vi::ViConfig cfg;
    cfg.likelihood = lk;
    const auto data = lk == vi::Likelihood::baseline_residual ? vi::baseline_data(t) : vi::simulated_data(t, sp);
    std::mt19937_64 rng(1);
    nn::Network theta = t.params;
    std::normal_distribution<double> n01;
    for (auto& w : theta.parameters()) w += 0.01 * n01(rng);
    std::vector<double> g(theta.size());
    vi::negative_log_likelihood(*t.problem, theta, data, cfg, g);
    std::vector<double> fd(theta.size());
    for (std::size_t i = 0; i < theta.size(); i += 37) {
      nn::Network a = theta, b = theta;
      const double h = 1e-6;
      a.parameters()[i] += h;
      b.parameters()[i] -= h;
      fd[i] = (vi::negative_log_likelihood(*t.problem, a, data, cfg, {}) -
               vi::negative_log_likelihood(*t.problem, b, data, cfg, {})) /
              (2 * h);
      CHECK(g[i] == doctest::Approx(fd[i]).epsilon(1e-4).scale(1e-3 * (1 + std::abs(fd[i]))));
    }
  }
}

TEST_CASE("simulated data drops points with infinite sigma_P and floors the rest") {
  const auto& t = trained_exp();
  const auto pts = t.collocation_points();
  std::vector<double> sp(pts.size(), 0.0);
  sp[3] = std::numeric_limits<double>::infinity();
  const auto d = vi::simulated_data(t, sp);
  CHECK(d.points.size() == pts.size() - 1);
  for (double v : d.variances) CHECK(v == 1e-10);
}

TEST_CASE("sampling: deterministic, CLT-consistent and collapsing as sigma -> 0") {
  const auto& t = trained_exp();
  auto q = vi::vi_init(t, 0);
  const auto a = vi::sample_posterior(q, 3, 7);
  const auto b = vi::sample_posterior(q, 3, 7);
  for (int i = 0; i < 3; ++i)
    CHECK(std::memcmp(a[i].parameters().data(), b[i].parameters().data(), q.size() * sizeof(double)) == 0);

  nn::Network one({1, 1}, nn::Activation::tanh);
  one.parameters()[0] = 0.8;
  vi::MeanFieldGaussian q1{one, {vi::softplus_inverse(0.3), vi::softplus_inverse(0.3)}, true};
  const auto many = vi::sample_posterior(q1, 100000, 3);
  double mean = 0.0;
  for (const auto& s : many) mean += s.parameters()[0];
  mean /= many.size();
  CHECK(std::abs(mean - 0.8) < 3 * 0.3 / std::sqrt(1e5));

  for (auto& r : q.rho) r = -800.0;
  for (const auto& s : vi::sample_posterior(q, 2, 1))
    CHECK(std::memcmp(s.parameters().data(), q.mu().data(), q.size() * sizeof(double)) == 0);
}

TEST_CASE("predictive moments") {
  const std::vector<problems::Point> grid{{0.5, 0.0}};
  const double vals[] = {1.0, 2.0, 3.0};
  const double sp[] = {std::sqrt(0.5)};
  const auto band = vi::predictive_moments(vals, 3, grid, std::span<const double>(sp));
  CHECK(band.mean[0] == doctest::Approx(2.0));
  CHECK(band.epistemic_var[0] == doctest::Approx(2.0 / 3.0));
  CHECK(band.total_var[0] == doctest::Approx(7.0 / 6.0));
  const auto base = vi::predictive_moments(vals, 3, grid);
  CHECK(base.total_var[0] == base.epistemic_var[0]);

  const auto& t = trained_exp();
  const auto q = vi::vi_init(t, 1);
  const auto samples = vi::sample_posterior(q, 20, 2);
  std::vector<problems::Point> g2;
  for (int i = 0; i <= 20; ++i) g2.push_back({0.2 * i, 0.0});
  std::vector<double> s2(g2.size());
  for (std::size_t i = 0; i < s2.size(); ++i) s2[i] = 0.01 * i;
  const auto ea = vi::predictive_moments(samples, *t.problem, g2, std::span<const double>(s2));
  const auto bl = vi::predictive_moments(samples, *t.problem, g2);
  CHECK(ea.mean[0] == 2.0);
  CHECK(ea.epistemic_var[0] == 0.0);
  for (std::size_t i = 0; i < g2.size(); ++i) CHECK(ea.total_var[i] - bl.total_var[i] == doctest::Approx(s2[i] * s2[i]));

  std::vector<nn::Network> same(4, t.params);
  const auto flat = vi::predictive_moments(same, *t.problem, g2, std::span<const double>(s2));
  for (std::size_t i = 0; i < g2.size(); ++i) {
    CHECK(flat.epistemic_var[i] == 0.0);
    CHECK(flat.total_var[i] == doctest::Approx(s2[i] * s2[i]));
  }
  std::ostringstream os;
  vi::write_band_csv(ea, os);
  CHECK(os.str().rfind("x,mean,epistemic_var,sigma_P2,total_var\n", 0) == 0);
}

TEST_CASE("ELBO optimizer: frozen means stay put and runs reproduce") {
  const auto& t = trained_exp();
  const auto env = bounds::estimate_envelope(t);
  const auto sp = bounds::PseudoSigma::for_ode(t, env).evaluate(t.collocation_points());
  vi::ViConfig cfg;
  cfg.epochs = 60;
  cfg.seed = 5;
  const auto r1 = vi::train_vi(t, cfg, std::span<const double>(sp));
  const auto r2 = vi::train_vi(t, cfg, std::span<const double>(sp));
  CHECK(r1.elbo_trace.size() == 60);
  CHECK(r1.monitor_trace.size() == 60);
  CHECK(r1.elbo_trace == r2.elbo_trace);
  CHECK(r1.posterior.rho == r2.posterior.rho);
  CHECK(std::memcmp(r1.posterior.mu().data(), t.params.parameters().data(), t.params.size() * sizeof(double)) == 0);
  for (double e : r1.elbo_trace) CHECK(std::isfinite(e));
  CHECK_THROWS_AS(vi::train_vi(t, cfg), Error);

  const auto ma = vi::moving_average(std::vector<double>{1, 2, 3, 4}, 2);
  REQUIRE(ma.size() == 3);
  CHECK(ma[0] == 1.5);
  CHECK(ma[2] == 3.5);
}
