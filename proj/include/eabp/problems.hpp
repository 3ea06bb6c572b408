#pragma once

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eabp/jet.hpp"
#include "eabp/network.hpp"

namespace eabp::problems {

// Evaluation point; ODEs use only the first coordinate, Burgers uses (x, t).
using Point = std::array<double, 2>;

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// A differential equation with hard-enforced initial/boundary conditions.
//
// The surrogate is always affine in the raw network output:
//   u~(p) = offset(p) + mask(p) * net(p)
// and the residual r = F[u~] - f is a function of the surrogate's jet.
class Problem {
public:
  virtual ~Problem() = default;

  virtual const std::string& id() const = 0;
  virtual std::string description() const = 0;
  virtual int input_dim() const = 0;
  // Input coordinates whose derivatives enter the residual.
  virtual std::span<const int> tracked() const = 0;

  virtual Jet2 offset(const Point& p) const = 0;
  virtual Jet2 mask(const Point& p) const = 0;

  virtual double residual(const Jet2& u, const Point& p) const = 0;
  // Partial derivatives of residual() w.r.t. each jet component of u.
  virtual Jet2 residual_cotangent(const Jet2& u, const Point& p) const = 0;

  virtual std::vector<Interval> train_box() const = 0;
  virtual std::vector<Interval> test_box() const = 0;
};

// Source term / particular solution written over jets so derivatives are exact.
using JetFunction = std::function<Jet2(const Jet2&)>;

// Exponential decay rates of Eq-26 form (D + lambda1 + i omega1)(D + lambda2 + i omega2) u = f.
struct DecayRates {
  double lambda1 = 0.0;
  double omega1 = 0.0;
  double lambda2 = 0.0;
  double omega2 = 0.0;
};

struct OdeSpec {
  std::string id;
  std::string description;
  int order = 1;
  double lambda = 0.0;      // order 1: u' + lambda u = f
  double damping = 0.0;     // order 2: u'' + damping u' + stiffness u = f
  double stiffness = 0.0;
  JetFunction source;
  JetFunction particular;   // optional closed-form particular solution
  double u0 = 0.0;
  double u0_prime = 0.0;    // order 2 only
  double x0 = 0.0;
  double train_end = 2.0;
  double test_end = 4.0;
  // The exact solution does not exist at or beyond this point (source blows up).
  std::optional<double> singular_at;
};

class OdeProblem final : public Problem {
public:
  // Throws ErrorKind::config when the invariants are violated.
  explicit OdeProblem(OdeSpec spec);

  const OdeSpec& spec() const { return spec_; }
  int order() const { return spec_.order; }
  double x0() const { return spec_.x0; }
  DecayRates decay_rates() const;
  double source(double x) const;

  const std::string& id() const override { return spec_.id; }
  std::string description() const override { return spec_.description; }
  int input_dim() const override { return 1; }
  std::span<const int> tracked() const override;
  Jet2 offset(const Point& p) const override;
  Jet2 mask(const Point& p) const override;
  double residual(const Jet2& u, const Point& p) const override;
  Jet2 residual_cotangent(const Jet2& u, const Point& p) const override;
  std::vector<Interval> train_box() const override;
  std::vector<Interval> test_box() const override;

  // Exact solution jet (value, u', u''). NaN past a singularity.
  Jet2 analytic_jet(double x) const;

private:
  OdeSpec spec_;
};

class BurgersProblem final : public Problem {
public:
  explicit BurgersProblem(double nu);

  double nu() const { return nu_; }

  const std::string& id() const override { return id_; }
  std::string description() const override;
  int input_dim() const override { return 2; }
  std::span<const int> tracked() const override;
  Jet2 offset(const Point& p) const override;
  Jet2 mask(const Point& p) const override;
  double residual(const Jet2& u, const Point& p) const override;
  Jet2 residual_cotangent(const Jet2& u, const Point& p) const override;
  std::vector<Interval> train_box() const override;
  std::vector<Interval> test_box() const override;

private:
  std::string id_ = "burgers";
  double nu_;
};

// u~ = offset + mask * raw, on jets.
Jet2 reparameterize(const Jet2& raw, const Problem& problem, const Point& p);

// Adjoint of reparameterize w.r.t. raw: maps a cotangent on u~ to one on raw.
Jet2 reparameterize_pullback(const Jet2& mask, const Jet2& u_bar);

double residual(const Problem& problem, const Jet2& u, const Point& p);

// Surrogate jet through the network and the hard-constraint transform.
Jet2 surrogate_jet(const Problem& problem, const nn::Network& net, const Point& p, nn::JetTape* tape = nullptr);
double surrogate_value(const Problem& problem, const nn::Network& net, const Point& p);
double residual_at(const Problem& problem, const nn::Network& net, const Point& p);

// u~(x, t) = -sin(pi x) e^{-t} + (1 - x^2)(1 - e^{-t}) net(x, t).
Jet2 burgers_surrogate(const nn::Network& net, double x, double t);

// Registry of the built-in equations, addressed by stable ids.
std::vector<std::string> problem_ids();
std::shared_ptr<const Problem> make_problem(std::string_view id);
std::shared_ptr<const OdeProblem> make_ode_problem(std::string_view id);

// Exact solution of a registered ODE. Throws ErrorKind::config for unknown ids.
double analytic_solution(std::string_view id, double x);

} // namespace eabp::problems
