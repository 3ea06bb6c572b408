#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "eabp/problems.hpp"
#include "eabp/train.hpp"

namespace eabp::bounds {

using problems::Point;

// Piecewise-constant majorant of |r| over a partition n_0 < n_1 < ... < n_K:
// epsilons[k] bounds |r| on [knots[k], knots[k+1]].
struct ResidualEnvelope {
  std::vector<double> knots;
  std::vector<double> epsilons;
  std::size_t oversample = 10;
  double safety_factor = 1.1;
};

enum class BoundKind {
  first_order,
  second_order_distinct,
  second_order_equal_limit,
  second_order_zero,
  burgers_heuristic,
};

std::string_view to_string(BoundKind kind);

// Decay rates closer than this use the equal-root limit kernel.
inline constexpr double kEqualRootTolerance = 1e-8;

struct EnvelopeOptions {
  std::size_t subintervals = 40;
  std::size_t oversample = 10;
  double safety_factor = 1.1;
};

std::vector<double> uniform_knots(double lo, double hi, std::size_t subintervals);

// eps_k = safety_factor * max |r| over `oversample` equally spaced samples
// (endpoints included) of each subinterval; +inf where |r| is not finite.
ResidualEnvelope estimate_envelope(const std::function<double(double)>& residual, std::span<const double> knots,
                                   std::size_t oversample, double safety_factor);
// Same, for a trained ODE model; the knots must cover [x0, test_end].
ResidualEnvelope estimate_envelope(const train::TrainedPINN& trained, std::span<const double> knots,
                                   std::size_t oversample, double safety_factor);
ResidualEnvelope estimate_envelope(const train::TrainedPINN& trained, const EnvelopeOptions& options = {});

// Closed-form piecewise bound kernels: each evaluates
//   integral_{n_0}^{x} K(x - xi) env(xi) dxi
// with K(s) = e^{-lambda s}                                (first order)
//      K(s) = (e^{-l1 s} - e^{-l2 s}) / (l2 - l1)          (distinct)
//      K(s) = s e^{-lambda s}                              (equal limit)
//      K(s) = s                                            (zero)
// Throws ErrorKind::domain when x lies outside [n_0, n_K].
double bound_first_order(const ResidualEnvelope& env, double lambda, double x);
double bound_second_order_distinct(const ResidualEnvelope& env, double lambda1, double lambda2, double x);
double bound_second_order_equal_limit(const ResidualEnvelope& env, double lambda, double x);
double bound_second_order_zero(const ResidualEnvelope& env, double x);

// Heuristic accumulated residual for Burgers:
//   (t - t0) * mean_i |r(x, t_i)|, t_i equally spaced in [t0, t].
double burgers_pseudo_sigma(const std::function<double(double, double)>& residual, double x, double t,
                            std::size_t n_time_samples);
double burgers_pseudo_sigma(const train::TrainedPINN& trained, double x, double t, std::size_t n_time_samples);

struct BoundSelection {
  BoundKind kind = BoundKind::first_order;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
};

// Chooses the kernel from the ODE's decay rates. Throws ErrorKind::config
// for growing or mixed-sign modes the kernels do not cover.
BoundSelection select_bound(const problems::OdeProblem& problem);

// sigma_P evaluator for one trained model.
class PseudoSigma {
public:
  static PseudoSigma for_ode(const train::TrainedPINN& trained, ResidualEnvelope envelope);
  static PseudoSigma for_burgers(const train::TrainedPINN& trained, std::size_t n_time_samples = 64);

  BoundKind kind() const { return selection_.kind; }
  const BoundSelection& selection() const { return selection_; }
  const std::optional<ResidualEnvelope>& envelope() const { return envelope_; }

  double operator()(const Point& p) const;
  std::vector<double> evaluate(std::span<const Point> points) const;

private:
  const train::TrainedPINN* trained_ = nullptr;
  BoundSelection selection_;
  std::optional<ResidualEnvelope> envelope_;
  std::size_t n_time_samples_ = 0;
};

struct PseudoAleatoricProfile {
  std::vector<Point> grid;
  std::vector<double> sigma_p;
  BoundKind kind = BoundKind::first_order;
};

// Dispatches on the problem kind. For Burgers the envelope is ignored and
// the accumulated-residual heuristic is used.
PseudoAleatoricProfile pseudo_profile(const problems::Problem& problem, const train::TrainedPINN& trained,
                                      const ResidualEnvelope& envelope, std::span<const Point> grid);
PseudoAleatoricProfile pseudo_profile(const PseudoSigma& sigma, std::span<const Point> grid);

// CSV with columns x,sigma_P (x,t,sigma_P for two-dimensional grids).
void write_profile_csv(const PseudoAleatoricProfile& profile, std::ostream& out);

} // namespace eabp::bounds
