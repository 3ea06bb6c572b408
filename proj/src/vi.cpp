#include "eabp/vi.hpp"

#include <cmath>
#include <ostream>

#include "eabp/error.hpp"
#include "eabp/kernels.hpp"

namespace eabp::vi {

std::string_view to_string(Likelihood l) {
  return l == Likelihood::baseline_residual ? "baseline_residual" : "error_aware_simulated";
}

double softplus(double rho) { return rho > 30.0 ? rho : std::log1p(std::exp(rho)); }

double softplus_inverse(double sigma) {
  if (!(sigma > 0.0)) throw Error(ErrorKind::domain, "softplus inverse needs a positive argument");
  return sigma > 30.0 ? sigma : std::log(std::expm1(sigma));
}

namespace {

double logistic(double rho) { return 1.0 / (1.0 + std::exp(-rho)); }

constexpr double kLog2Pi = 1.8378770664093454836; // ln(2 pi)

} // namespace

MeanFieldGaussian vi_init(const train::TrainedPINN& trained, std::uint64_t seed, double rho_lo, double rho_hi) {
  if (!(rho_lo <= rho_hi)) throw Error(ErrorKind::config, "rho init range is empty");
  MeanFieldGaussian q;
  q.architecture = trained.params;
  q.rho.resize(q.architecture.size());
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(rho_lo, rho_hi);
  for (auto& r : q.rho) r = u(rng);
  q.means_frozen = true;
  return q;
}

double kl_diag(std::span<const double> mu, std::span<const double> sigma, double prior_sigma) {
  if (mu.size() != sigma.size()) throw Error(ErrorKind::shape, "mu and sigma differ in length");
  if (!(prior_sigma > 0.0)) throw Error(ErrorKind::config, "prior sigma must be positive");
  const double p2 = prior_sigma * prior_sigma;
  double kl = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i)
    kl += std::log(prior_sigma / sigma[i]) + (sigma[i] * sigma[i] + mu[i] * mu[i]) / (2.0 * p2) - 0.5;
  return kl;
}

double kl_diag(const MeanFieldGaussian& q, double prior_sigma) {
  std::vector<double> s(q.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = q.sigma(i);
  return kl_diag(q.mu(), s, prior_sigma);
}

LikelihoodData baseline_data(const train::TrainedPINN& trained) {
  LikelihoodData d;
  d.points = trained.collocation_points();
  return d;
}

LikelihoodData simulated_data(const train::TrainedPINN& trained, std::span<const double> sigma_p_at_points) {
  const auto points = trained.collocation_points();
  if (sigma_p_at_points.size() != points.size())
    throw Error(ErrorKind::shape, "sigma_P profile does not match the collocation points");
  const auto targets =
      kernels::surrogate_values(*trained.problem, std::span<const nn::Network>(&trained.params, 1), points);
  // Points with an infinite bound carry no information and are dropped.
  LikelihoodData d;
  for (std::size_t j = 0; j < points.size(); ++j) {
    if (!std::isfinite(sigma_p_at_points[j])) continue;
    d.points.push_back(points[j]);
    d.targets.push_back(targets[j]);
    d.variances.push_back(std::max(sigma_p_at_points[j] * sigma_p_at_points[j], kVarianceFloor));
  }
  return d;
}

double negative_log_likelihood(const problems::Problem& problem, const nn::Network& theta, const LikelihoodData& data,
                               const ViConfig& config, std::span<double> grad) {
  const std::size_t M = data.points.size();
  if (config.likelihood == Likelihood::baseline_residual) {
    if (!(config.sigma_d > 0.0)) throw Error(ErrorKind::config, "sigma_D must be positive");
    const double s2 = config.sigma_d * config.sigma_d;
    const double w = 0.5 / s2;
    if (grad.empty()) {
      const auto r = kernels::residuals(problem, theta, data.points);
      double sq = 0.0;
      for (double v : r) sq += w * v * v;
      return sq + 0.5 * static_cast<double>(M) * (kLog2Pi + std::log(s2));
    }
    const double sq = kernels::loss_and_gradient(
        theta, data.points, problem.tracked(),
        [&](std::size_t j, const Jet2& raw) { return train::residual_square_head(problem, data.points[j], raw, w); },
        grad);
    return sq + 0.5 * static_cast<double>(M) * (kLog2Pi + std::log(s2));
  }

  if (data.targets.size() != M || data.variances.size() != M)
    throw Error(ErrorKind::shape, "simulated-data likelihood needs targets and variances per point");
  if (grad.empty()) {
    const auto u = kernels::surrogate_values(problem, std::span<const nn::Network>(&theta, 1), data.points);
    double nll = 0.0;
    for (std::size_t j = 0; j < M; ++j) {
      const double diff = u[j] - data.targets[j];
      nll += 0.5 * diff * diff / data.variances[j] + 0.5 * (kLog2Pi + std::log(data.variances[j]));
    }
    return nll;
  }
  return kernels::loss_and_gradient(
      theta, data.points, std::span<const int>{},
      [&](std::size_t j, const Jet2& raw) {
        const Point& p = data.points[j];
        const double m = problem.mask(p).value();
        const double diff = problem.offset(p).value() + m * raw.value() - data.targets[j];
        const double v = data.variances[j];
        return kernels::PointLoss{0.5 * diff * diff / v + 0.5 * (kLog2Pi + std::log(v)), Jet2(0, m * diff / v)};
      },
      grad);
}

ElboOptimizer::ElboOptimizer(MeanFieldGaussian q, std::shared_ptr<const problems::Problem> problem,
                             LikelihoodData data, ViConfig config)
    : q_(std::move(q)), problem_(std::move(problem)), data_(std::move(data)), config_(config),
      adam_(nn::make_adam(2 * q_.size(), config.learning_rate)), rng_(config.seed ^ 0x5851f42d4c957f2dULL) {
  if (!problem_) throw Error(ErrorKind::config, "no problem given");
  if (q_.rho.size() != q_.architecture.size()) throw Error(ErrorKind::shape, "rho does not match the means");
  if (config_.mc_samples_per_step == 0) throw Error(ErrorKind::config, "mc_samples_per_step must be positive");
  if (!(config_.prior_sigma > 0.0)) throw Error(ErrorKind::config, "prior sigma must be positive");
  if (!(config_.learning_rate > 0.0)) throw Error(ErrorKind::config, "learning rate must be positive");
  std::mt19937_64 mon(config.seed ^ 0x2545f4914f6cdd1dULL);
  std::normal_distribution<double> n01;
  monitor_noise_.resize(config_.monitor_samples);
  for (auto& z : monitor_noise_) {
    z.resize(q_.size());
    for (auto& v : z) v = n01(mon);
  }
}

double ElboOptimizer::sample_elbo(std::span<const double> zeta, std::span<double> grad_theta) const {
  nn::Network theta = q_.architecture;
  auto th = theta.parameters();
  const auto mu = q_.mu();
  for (std::size_t i = 0; i < th.size(); ++i) th[i] = mu[i] + q_.sigma(i) * zeta[i];
  const double nll = negative_log_likelihood(*problem_, theta, data_, config_, grad_theta);
  return -nll - kl_diag(q_, config_.prior_sigma);
}

double ElboOptimizer::monitored_elbo() const {
  if (monitor_noise_.empty()) return std::nan("");
  double s = 0.0;
  for (const auto& z : monitor_noise_) s += sample_elbo(z, {});
  return s / static_cast<double>(monitor_noise_.size());
}

double ElboOptimizer::step() {
  const std::size_t P = q_.size();
  const auto S = static_cast<double>(config_.mc_samples_per_step);
  std::normal_distribution<double> n01;
  std::vector<double> zeta(P), g_theta(P);
  // Gradient of -ELBO: first P entries w.r.t. mu, next P w.r.t. rho.
  std::vector<double> g(2 * P, 0.0);
  double elbo = 0.0;
  for (std::size_t s = 0; s < config_.mc_samples_per_step; ++s) {
    for (auto& z : zeta) z = n01(rng_);
    elbo += sample_elbo(zeta, g_theta) / S;
    for (std::size_t i = 0; i < P; ++i) {
      g[i] += g_theta[i] / S;
      g[P + i] += g_theta[i] * zeta[i] * logistic(q_.rho[i]) / S;
    }
  }
  if (!std::isfinite(elbo))
    throw Error(ErrorKind::training_diverged, "non-finite ELBO at step " + std::to_string(steps_), steps_);

  const double p2 = config_.prior_sigma * config_.prior_sigma;
  const auto mu = q_.mu();
  for (std::size_t i = 0; i < P; ++i) {
    const double sg = q_.sigma(i);
    g[i] += mu[i] / p2;
    g[P + i] += (-1.0 / sg + sg / p2) * logistic(q_.rho[i]);
  }
  if (q_.means_frozen) std::fill(g.begin(), g.begin() + static_cast<std::ptrdiff_t>(P), 0.0);

  std::vector<double> params(2 * P);
  std::copy(mu.begin(), mu.end(), params.begin());
  std::copy(q_.rho.begin(), q_.rho.end(), params.begin() + static_cast<std::ptrdiff_t>(P));
  try {
    nn::adam_step(params, g, adam_);
  } catch (const Error& e) {
    throw Error(e.kind(), std::string(e.what()) + " at VI step " + std::to_string(steps_), steps_);
  }
  if (!q_.means_frozen) q_.architecture.set_parameters(std::span<const double>(params.data(), P));
  std::copy(params.begin() + static_cast<std::ptrdiff_t>(P), params.end(), q_.rho.begin());
  ++steps_;
  return elbo;
}

ViResult train_vi(const train::TrainedPINN& trained, const ViConfig& config,
                  std::optional<std::span<const double>> sigma_p_at_collocation) {
  LikelihoodData data;
  if (config.likelihood == Likelihood::error_aware_simulated) {
    if (!sigma_p_at_collocation)
      throw Error(ErrorKind::config, "the simulated-data likelihood needs a sigma_P profile");
    data = simulated_data(trained, *sigma_p_at_collocation);
  } else {
    data = baseline_data(trained);
  }
  ElboOptimizer opt(vi_init(trained, config.seed, config.rho_lo, config.rho_hi), trained.problem, std::move(data),
                    config);
  ViResult r;
  r.elbo_trace.reserve(config.epochs);
  if (config.monitor_samples > 0) r.monitor_trace.reserve(config.epochs);
  for (std::size_t e = 0; e < config.epochs; ++e) {
    r.elbo_trace.push_back(opt.step());
    if (config.monitor_samples > 0) r.monitor_trace.push_back(opt.monitored_elbo());
  }
  r.posterior = opt.posterior();
  return r;
}

std::vector<double> moving_average(std::span<const double> trace, std::size_t window) {
  if (window == 0) throw Error(ErrorKind::config, "window must be positive");
  std::vector<double> out;
  if (trace.size() < window) return out;
  out.reserve(trace.size() - window + 1);
  for (std::size_t end = window; end <= trace.size(); ++end) {
    double s = 0.0;
    for (std::size_t i = end - window; i < end; ++i) s += trace[i];
    out.push_back(s / static_cast<double>(window));
  }
  return out;
}

std::vector<nn::Network> sample_posterior(const MeanFieldGaussian& q, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error(ErrorKind::config, "need at least one posterior sample");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  std::vector<nn::Network> out(n, q.architecture);
  const auto mu = q.mu();
  for (auto& net : out) {
    auto th = net.parameters();
    for (std::size_t i = 0; i < th.size(); ++i) th[i] = mu[i] + q.sigma(i) * n01(rng);
  }
  return out;
}

PredictiveBand predictive_moments(std::span<const double> values, std::size_t n_samples, std::span<const Point> grid,
                                  std::optional<std::span<const double>> sigma_p) {
  if (n_samples == 0) throw Error(ErrorKind::config, "need at least one sample");
  if (values.size() != n_samples * grid.size()) throw Error(ErrorKind::shape, "value table does not match the grid");
  if (sigma_p && sigma_p->size() != grid.size()) throw Error(ErrorKind::shape, "sigma_P profile does not match the grid");
  PredictiveBand b;
  b.grid.assign(grid.begin(), grid.end());
  b.mean.resize(grid.size());
  b.epistemic_var.resize(grid.size());
  b.sigma_p2.resize(grid.size());
  b.total_var.resize(grid.size());
  const auto N = static_cast<double>(n_samples);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double* row = values.data() + g * n_samples;
    double mean = 0.0;
    for (std::size_t s = 0; s < n_samples; ++s) mean += row[s];
    mean /= N;
    double var = 0.0;
    for (std::size_t s = 0; s < n_samples; ++s) var += (row[s] - mean) * (row[s] - mean);
    var /= N;
    const double sp2 = sigma_p ? (*sigma_p)[g] * (*sigma_p)[g] : 0.0;
    b.mean[g] = mean;
    b.epistemic_var[g] = var;
    b.sigma_p2[g] = sp2;
    b.total_var[g] = var + sp2;
  }
  return b;
}

PredictiveBand predictive_moments(std::span<const nn::Network> samples, const problems::Problem& problem,
                                  std::span<const Point> grid, std::optional<std::span<const double>> sigma_p) {
  if (samples.empty()) throw Error(ErrorKind::config, "need at least one sample");
  const auto values = kernels::surrogate_values(problem, samples, grid);
  return predictive_moments(values, samples.size(), grid, sigma_p);
}

void write_band_csv(const PredictiveBand& band, std::ostream& out, bool space_time) {
  out << (space_time ? "x,t," : "x,") << "mean,epistemic_var,sigma_P2,total_var\n";
  const auto old = out.precision(17);
  for (std::size_t i = 0; i < band.grid.size(); ++i) {
    out << band.grid[i][0] << ',';
    if (space_time) out << band.grid[i][1] << ',';
    out << band.mean[i] << ',' << band.epistemic_var[i] << ',' << band.sigma_p2[i] << ',' << band.total_var[i] << '\n';
  }
  out.precision(old);
}

} // namespace eabp::vi
