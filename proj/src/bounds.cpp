#include "eabp/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "eabp/error.hpp"
#include "eabp/kernels.hpp"

namespace eabp::bounds {

std::string_view to_string(BoundKind kind) {
  switch (kind) {
  case BoundKind::first_order: return "first_order";
  case BoundKind::second_order_distinct: return "second_order_distinct";
  case BoundKind::second_order_equal_limit: return "second_order_equal_limit";
  case BoundKind::second_order_zero: return "second_order_zero";
  case BoundKind::burgers_heuristic: return "burgers_heuristic";
  }
  return "unknown";
}

std::vector<double> uniform_knots(double lo, double hi, std::size_t subintervals) {
  if (subintervals == 0 || !(hi > lo)) throw Error(ErrorKind::config, "knots need hi > lo and at least one subinterval");
  std::vector<double> k(subintervals + 1);
  for (std::size_t i = 0; i <= subintervals; ++i)
    k[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(subintervals);
  k.back() = hi;
  return k;
}

ResidualEnvelope estimate_envelope(const std::function<double(double)>& residual, std::span<const double> knots,
                                   std::size_t oversample, double safety_factor) {
  if (knots.size() < 2) throw Error(ErrorKind::config, "envelope needs at least two knots");
  for (std::size_t i = 1; i < knots.size(); ++i)
    if (!(knots[i] > knots[i - 1])) throw Error(ErrorKind::config, "envelope knots must be strictly increasing");
  if (oversample < 2) throw Error(ErrorKind::config, "oversample must be at least 2");
  if (!(safety_factor >= 1.0)) throw Error(ErrorKind::config, "safety factor must be >= 1");

  ResidualEnvelope env;
  env.knots.assign(knots.begin(), knots.end());
  env.epsilons.assign(knots.size() - 1, 0.0);
  env.oversample = oversample;
  env.safety_factor = safety_factor;

  kernels::parallel_for(env.epsilons.size(), [&](std::size_t k) {
    const double a = knots[k], b = knots[k + 1];
    double m = 0.0;
    for (std::size_t i = 0; i < oversample; ++i) {
      const double xi = i + 1 == oversample ? b : a + (b - a) * static_cast<double>(i) / static_cast<double>(oversample - 1);
      const double r = std::abs(residual(xi));
      // A singular source makes the bound infinite from here on.
      m = std::isfinite(r) ? std::max(m, r) : std::numeric_limits<double>::infinity();
    }
    env.epsilons[k] = safety_factor * m;
  });
  return env;
}

ResidualEnvelope estimate_envelope(const train::TrainedPINN& trained, std::span<const double> knots,
                                   std::size_t oversample, double safety_factor) {
  const auto* ode = dynamic_cast<const problems::OdeProblem*>(trained.problem.get());
  if (!ode) throw Error(ErrorKind::config, "residual envelopes are defined for ODE problems only");
  if (knots.empty() || knots.front() != ode->x0() || knots.back() < ode->spec().test_end)
    throw Error(ErrorKind::config, "envelope knots must cover [x0, test_end]");
  const auto& net = trained.params;
  return estimate_envelope([&](double x) { return problems::residual_at(*ode, net, {x, 0.0}); }, knots, oversample,
                           safety_factor);
}

ResidualEnvelope estimate_envelope(const train::TrainedPINN& trained, const EnvelopeOptions& options) {
  const auto* ode = dynamic_cast<const problems::OdeProblem*>(trained.problem.get());
  if (!ode) throw Error(ErrorKind::config, "residual envelopes are defined for ODE problems only");
  const auto knots = uniform_knots(ode->x0(), ode->spec().test_end, options.subintervals);
  return estimate_envelope(trained, knots, options.oversample, options.safety_factor);
}

namespace {

// integral_{lo}^{hi} e^{-lambda s} ds for 0 <= lo <= hi.
double seg_exp(double lambda, double lo, double hi) {
  const double h = hi - lo;
  if (lambda == 0.0) return h;
  return std::exp(-lambda * lo) * -std::expm1(-lambda * h) / lambda;
}

// integral_{lo}^{hi} s e^{-lambda s} ds.
double seg_sexp(double lambda, double lo, double hi) {
  if (lambda == 0.0) return 0.5 * (hi - lo) * (hi + lo);
  const double a = std::exp(-lambda * lo) * (1.0 + lambda * lo);
  const double b = std::exp(-lambda * hi) * (1.0 + lambda * hi);
  return (a - b) / (lambda * lambda);
}

template <class Segment>
double accumulate(const ResidualEnvelope& env, double x, Segment&& seg) {
  if (env.knots.size() < 2 || env.epsilons.size() + 1 != env.knots.size())
    throw Error(ErrorKind::shape, "malformed residual envelope");
  if (!(x >= env.knots.front() && x <= env.knots.back()))
    throw Error(ErrorKind::domain, "x = " + std::to_string(x) + " lies outside the envelope's knot range");
  double total = 0.0;
  for (std::size_t k = 0; k < env.epsilons.size() && env.knots[k] < x; ++k) {
    const double a = env.knots[k], b = std::min(env.knots[k + 1], x);
    total += env.epsilons[k] * seg(x - b, x - a);
  }
  return total;
}

} // namespace

double bound_first_order(const ResidualEnvelope& env, double lambda, double x) {
  return accumulate(env, x, [&](double lo, double hi) { return seg_exp(lambda, lo, hi); });
}

double bound_second_order_distinct(const ResidualEnvelope& env, double lambda1, double lambda2, double x) {
  if (std::abs(lambda2 - lambda1) < kEqualRootTolerance) return bound_second_order_equal_limit(env, lambda1, x);
  return accumulate(env, x, [&](double lo, double hi) {
    return (seg_exp(lambda1, lo, hi) - seg_exp(lambda2, lo, hi)) / (lambda2 - lambda1);
  });
}

double bound_second_order_equal_limit(const ResidualEnvelope& env, double lambda, double x) {
  return accumulate(env, x, [&](double lo, double hi) { return seg_sexp(lambda, lo, hi); });
}

double bound_second_order_zero(const ResidualEnvelope& env, double x) {
  return accumulate(env, x, [&](double lo, double hi) { return 0.5 * (hi - lo) * (hi + lo); });
}

double burgers_pseudo_sigma(const std::function<double(double, double)>& residual, double x, double t,
                            std::size_t n_time_samples) {
  if (n_time_samples == 0) throw Error(ErrorKind::config, "need at least one time sample");
  if (t < 0.0) throw Error(ErrorKind::domain, "t must be non-negative");
  if (t == 0.0) return 0.0;
  double s = 0.0;
  if (n_time_samples == 1) {
    s = std::abs(residual(x, 0.5 * t));
  } else {
    for (std::size_t i = 0; i < n_time_samples; ++i) {
      const double ti = i + 1 == n_time_samples ? t : t * static_cast<double>(i) / static_cast<double>(n_time_samples - 1);
      s += std::abs(residual(x, ti));
    }
    s /= static_cast<double>(n_time_samples);
  }
  return t * s;
}

double burgers_pseudo_sigma(const train::TrainedPINN& trained, double x, double t, std::size_t n_time_samples) {
  const auto& problem = *trained.problem;
  if (problem.input_dim() != 2) throw Error(ErrorKind::config, "accumulated-residual heuristic needs a space-time problem");
  return burgers_pseudo_sigma(
      [&](double xx, double tt) { return problems::residual_at(problem, trained.params, {xx, tt}); }, x, t,
      n_time_samples);
}

BoundSelection select_bound(const problems::OdeProblem& problem) {
  const auto rates = problem.decay_rates();
  if (problem.order() == 1) return {BoundKind::first_order, rates.lambda1, rates.lambda1};
  if (rates.lambda1 < 0.0 || rates.lambda2 < 0.0)
    throw Error(ErrorKind::config, "problem '" + problem.id() + "' has a growing mode; no bound kernel applies");
  const bool complex_pair = rates.omega1 != 0.0;
  if (!complex_pair && std::abs(rates.lambda2 - rates.lambda1) >= kEqualRootTolerance)
    return {BoundKind::second_order_distinct, rates.lambda1, rates.lambda2};
  // Repeated real or complex-conjugate roots: |e^{-l s} sin(w s) / w| <= s e^{-l s}.
  const double lambda = 0.5 * (rates.lambda1 + rates.lambda2);
  if (lambda < kEqualRootTolerance) return {BoundKind::second_order_zero, 0.0, 0.0};
  return {BoundKind::second_order_equal_limit, lambda, lambda};
}

PseudoSigma PseudoSigma::for_ode(const train::TrainedPINN& trained, ResidualEnvelope envelope) {
  const auto* ode = dynamic_cast<const problems::OdeProblem*>(trained.problem.get());
  if (!ode) throw Error(ErrorKind::config, "residual envelopes are defined for ODE problems only");
  PseudoSigma s;
  s.trained_ = &trained;
  s.selection_ = select_bound(*ode);
  s.envelope_ = std::move(envelope);
  return s;
}

PseudoSigma PseudoSigma::for_burgers(const train::TrainedPINN& trained, std::size_t n_time_samples) {
  if (trained.problem->input_dim() != 2)
    throw Error(ErrorKind::config, "accumulated-residual heuristic needs a space-time problem");
  PseudoSigma s;
  s.trained_ = &trained;
  s.selection_.kind = BoundKind::burgers_heuristic;
  s.n_time_samples_ = n_time_samples;
  return s;
}

double PseudoSigma::operator()(const Point& p) const {
  switch (selection_.kind) {
  case BoundKind::first_order: return bound_first_order(*envelope_, selection_.lambda1, p[0]);
  case BoundKind::second_order_distinct:
    return bound_second_order_distinct(*envelope_, selection_.lambda1, selection_.lambda2, p[0]);
  case BoundKind::second_order_equal_limit: return bound_second_order_equal_limit(*envelope_, selection_.lambda1, p[0]);
  case BoundKind::second_order_zero: return bound_second_order_zero(*envelope_, p[0]);
  case BoundKind::burgers_heuristic: return burgers_pseudo_sigma(*trained_, p[0], p[1], n_time_samples_);
  }
  throw Error(ErrorKind::internal, "unknown bound kind");
}

std::vector<double> PseudoSigma::evaluate(std::span<const Point> points) const {
  std::vector<double> out(points.size());
  kernels::parallel_for(points.size(), [&](std::size_t i) { out[i] = (*this)(points[i]); });
  return out;
}

PseudoAleatoricProfile pseudo_profile(const PseudoSigma& sigma, std::span<const Point> grid) {
  PseudoAleatoricProfile prof;
  prof.grid.assign(grid.begin(), grid.end());
  prof.sigma_p = sigma.evaluate(grid);
  prof.kind = sigma.kind();
  return prof;
}

PseudoAleatoricProfile pseudo_profile(const problems::Problem& problem, const train::TrainedPINN& trained,
                                      const ResidualEnvelope& envelope, std::span<const Point> grid) {
  if (problem.input_dim() == 2) return pseudo_profile(PseudoSigma::for_burgers(trained), grid);
  return pseudo_profile(PseudoSigma::for_ode(trained, envelope), grid);
}

void write_profile_csv(const PseudoAleatoricProfile& profile, std::ostream& out) {
  const bool st = profile.kind == BoundKind::burgers_heuristic;
  out << (st ? "x,t,sigma_P\n" : "x,sigma_P\n");
  const auto old = out.precision(17);
  for (std::size_t i = 0; i < profile.grid.size(); ++i) {
    out << profile.grid[i][0] << ',';
    if (st) out << profile.grid[i][1] << ',';
    out << profile.sigma_p[i] << '\n';
  }
  out.precision(old);
}

} // namespace eabp::bounds
