#include "eabp/problems.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "eabp/error.hpp"

namespace eabp::problems {

namespace {

constexpr int kTrackX[] = {0};
constexpr int kTrackXT[] = {0, 1};

Jet2 xvar(double x) { return Jet2::variable(x, 0, 1); }

// Homogeneous basis of u'' + b u' + c u = 0 with y1(0)=1, y1'(0)=0, y2(0)=0, y2'(0)=1.
struct Basis2 {
  Jet2 y1, y2;
};

Basis2 second_order_basis(double b, double c, const Jet2& tau) {
  const double disc = b * b - 4.0 * c;
  if (disc > 0.0) {
    const double r = std::sqrt(disc);
    const double s1 = 0.5 * (-b + r), s2 = 0.5 * (-b - r);
    const Jet2 e1 = exp(s1 * tau), e2 = exp(s2 * tau);
    return {(s1 * e2 - s2 * e1) / (s1 - s2), (e1 - e2) / (s1 - s2)};
  }
  if (disc == 0.0) {
    const double s = -0.5 * b;
    const Jet2 e = exp(s * tau);
    return {(1.0 - s * tau) * e, tau * e};
  }
  const double alpha = -0.5 * b, beta = 0.5 * std::sqrt(-disc);
  const Jet2 e = exp(alpha * tau);
  const Jet2 sn = sin(beta * tau), cs = cos(beta * tau);
  return {e * (cs - (alpha / beta) * sn), e * sn / beta};
}

double integrate(const std::function<double(double)>& f, double a, double b) {
  if (b <= a) return 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 20, 1e-14);
}

} // namespace

// ---------------------------------------------------------------- OdeProblem

OdeProblem::OdeProblem(OdeSpec spec) : spec_(std::move(spec)) {
  if (spec_.order != 1 && spec_.order != 2) throw Error(ErrorKind::config, spec_.id + ": order must be 1 or 2");
  if (!spec_.source) throw Error(ErrorKind::config, spec_.id + ": missing source term");
  if (spec_.order == 1) {
    if (!(spec_.lambda > 0.0)) throw Error(ErrorKind::config, spec_.id + ": first-order problems need lambda > 0");
    if (spec_.u0 == 0.0) throw Error(ErrorKind::config, spec_.id + ": first-order problems need u(x0) != 0");
  }
  if (!(spec_.train_end > spec_.x0) || spec_.test_end < spec_.train_end)
    throw Error(ErrorKind::config, spec_.id + ": need x0 < train_end <= test_end");
}

DecayRates OdeProblem::decay_rates() const {
  if (spec_.order == 1) return {spec_.lambda, 0.0, spec_.lambda, 0.0};
  const double b = spec_.damping, c = spec_.stiffness;
  const double disc = b * b - 4.0 * c;
  if (disc >= 0.0) {
    const double r = std::sqrt(disc);
    return {0.5 * (b - r), 0.0, 0.5 * (b + r), 0.0};
  }
  const double w = 0.5 * std::sqrt(-disc);
  return {0.5 * b, w, 0.5 * b, -w};
}

double OdeProblem::source(double x) const { return spec_.source(Jet2(1, x)).value(); }

std::span<const int> OdeProblem::tracked() const { return kTrackX; }

Jet2 OdeProblem::offset(const Point& p) const {
  if (spec_.order == 1) return Jet2::constant(spec_.u0, 1);
  const Jet2 m1 = 1.0 - exp(-(xvar(p[0]) - spec_.x0));
  return spec_.u0 + spec_.u0_prime * m1;
}

Jet2 OdeProblem::mask(const Point& p) const {
  const Jet2 m1 = 1.0 - exp(-(xvar(p[0]) - spec_.x0));
  return spec_.order == 1 ? m1 : m1 * m1;
}

double OdeProblem::residual(const Jet2& u, const Point& p) const {
  const double f = source(p[0]);
  if (spec_.order == 1) return u.d1(0) + spec_.lambda * u.value() - f;
  return u.d2(0, 0) + spec_.damping * u.d1(0) + spec_.stiffness * u.value() - f;
}

Jet2 OdeProblem::residual_cotangent(const Jet2&, const Point&) const {
  Jet2 g(1);
  if (spec_.order == 1) {
    g.value() = spec_.lambda;
    g.d1(0) = 1.0;
  } else {
    g.value() = spec_.stiffness;
    g.d1(0) = spec_.damping;
    g.d2(0, 0) = 1.0;
  }
  return g;
}

std::vector<Interval> OdeProblem::train_box() const { return {{spec_.x0, spec_.train_end}}; }
std::vector<Interval> OdeProblem::test_box() const { return {{spec_.x0, spec_.test_end}}; }

Jet2 OdeProblem::analytic_jet(double x) const {
  if (spec_.singular_at && x >= *spec_.singular_at) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    Jet2 j(1, nan);
    j.d1(0) = nan;
    j.d2(0, 0) = nan;
    return j;
  }
  const Jet2 tau = xvar(x) - spec_.x0;
  const double x0 = spec_.x0;

  // Particular solution: closed form when available, otherwise the Duhamel
  // integral with zero initial data, differentiated under the integral sign.
  Jet2 up(1);
  double up0 = 0.0, up0_prime = 0.0;
  if (spec_.particular) {
    up = spec_.particular(xvar(x));
    const Jet2 at0 = spec_.particular(xvar(x0));
    up0 = at0.value();
    up0_prime = at0.d1(0);
  } else if (spec_.order == 1) {
    const double lam = spec_.lambda;
    const double v = integrate([&](double xi) { return std::exp(-lam * (x - xi)) * source(xi); }, x0, x);
    const Jet2 f = spec_.source(xvar(x));
    up.value() = v;
    up.d1(0) = f.value() - lam * v;
    up.d2(0, 0) = f.d1(0) - lam * up.d1(0);
  } else {
    const double b = spec_.damping, c = spec_.stiffness;
    auto green = [&](double xi) { return second_order_basis(b, c, Jet2::variable(x - xi, 0, 1)).y2; };
    up.value() = integrate([&](double xi) { return green(xi).value() * source(xi); }, x0, x);
    up.d1(0) = integrate([&](double xi) { return green(xi).d1(0) * source(xi); }, x0, x);
    up.d2(0, 0) = source(x) + integrate([&](double xi) { return green(xi).d2(0, 0) * source(xi); }, x0, x);
  }

  if (spec_.order == 1) return up + (spec_.u0 - up0) * exp(-spec_.lambda * tau);
  const Basis2 basis = second_order_basis(spec_.damping, spec_.stiffness, tau);
  return up + (spec_.u0 - up0) * basis.y1 + (spec_.u0_prime - up0_prime) * basis.y2;
}

// ------------------------------------------------------------ BurgersProblem

BurgersProblem::BurgersProblem(double nu) : nu_(nu) {
  if (!(nu > 0.0)) throw Error(ErrorKind::config, "burgers: nu must be positive");
}

std::string BurgersProblem::description() const {
  return "u_t + u u_x = nu u_xx on [-1,1] x [0,2], u(x,0) = -sin(pi x), u(+-1,t) = 0";
}

std::span<const int> BurgersProblem::tracked() const { return kTrackXT; }

Jet2 BurgersProblem::offset(const Point& p) const {
  const Jet2 x = Jet2::variable(p[0], 0, 2), t = Jet2::variable(p[1], 1, 2);
  return -sin_pi(x) * exp(-t);
}

Jet2 BurgersProblem::mask(const Point& p) const {
  const Jet2 x = Jet2::variable(p[0], 0, 2), t = Jet2::variable(p[1], 1, 2);
  return (1.0 - x * x) * (1.0 - exp(-t));
}

double BurgersProblem::residual(const Jet2& u, const Point&) const {
  return u.d1(1) + u.value() * u.d1(0) - nu_ * u.d2(0, 0);
}

Jet2 BurgersProblem::residual_cotangent(const Jet2& u, const Point&) const {
  Jet2 g(2);
  g.value() = u.d1(0);
  g.d1(0) = u.value();
  g.d1(1) = 1.0;
  g.d2(0, 0) = -nu_;
  return g;
}

std::vector<Interval> BurgersProblem::train_box() const { return {{-1.0, 1.0}, {0.0, 1.0}}; }
std::vector<Interval> BurgersProblem::test_box() const { return {{-1.0, 1.0}, {0.0, 2.0}}; }

// ------------------------------------------------------------- free helpers

Jet2 reparameterize(const Jet2& raw, const Problem& problem, const Point& p) {
  return problem.offset(p) + problem.mask(p) * raw;
}

Jet2 reparameterize_pullback(const Jet2& m, const Jet2& ub) {
  const int d = m.dims();
  Jet2 nb(d, ub.value() * m.value());
  for (int i = 0; i < d; ++i) {
    nb.value() += ub.d1(i) * m.d1(i);
    nb.d1(i) = ub.d1(i) * m.value();
  }
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) {
      const double g = ub.d2(i, j);
      nb.value() += g * m.d2(i, j);
      nb.d1(i) += g * m.d1(j);
      nb.d1(j) += g * m.d1(i);
      nb.d2(i, j) = g * m.value();
    }
  return nb;
}

double residual(const Problem& problem, const Jet2& u, const Point& p) { return problem.residual(u, p); }

Jet2 surrogate_jet(const Problem& problem, const nn::Network& net, const Point& p, nn::JetTape* tape) {
  const Jet2 raw = nn::forward_jet(net, std::span<const double>(p.data(), problem.input_dim()), problem.tracked(), tape);
  return reparameterize(raw, problem, p);
}

double surrogate_value(const Problem& problem, const nn::Network& net, const Point& p) {
  const double raw = nn::forward(net, std::span<const double>(p.data(), problem.input_dim()));
  return problem.offset(p).value() + problem.mask(p).value() * raw;
}

double residual_at(const Problem& problem, const nn::Network& net, const Point& p) {
  return problem.residual(surrogate_jet(problem, net, p), p);
}

Jet2 burgers_surrogate(const nn::Network& net, double x, double t) {
  static const BurgersProblem shape(0.01 / std::numbers::pi);
  return surrogate_jet(shape, net, {x, t});
}

// ------------------------------------------------------------------ registry

namespace {

OdeSpec first_order(std::string id, std::string desc, JetFunction f, JetFunction particular) {
  OdeSpec s;
  s.id = std::move(id);
  s.description = std::move(desc);
  s.order = 1;
  s.lambda = 3.0;
  s.source = std::move(f);
  s.particular = std::move(particular);
  s.u0 = 2.0;
  return s;
}

OdeSpec second_order(std::string id, std::string desc, double damping, double stiffness, JetFunction f,
                     JetFunction particular, double u0, double u0p) {
  OdeSpec s;
  s.id = std::move(id);
  s.description = std::move(desc);
  s.order = 2;
  s.damping = damping;
  s.stiffness = stiffness;
  s.source = std::move(f);
  s.particular = std::move(particular);
  s.u0 = u0;
  s.u0_prime = u0p;
  return s;
}

std::vector<OdeSpec> builtin_odes() {
  std::vector<OdeSpec> v;
  v.push_back(first_order(
      "ode1.poly", "u' + 3u = 3t^2 + 5t + 4, u(0) = 2",
      [](const Jet2& t) { return 3.0 * t * t + 5.0 * t + 4.0; },
      [](const Jet2& t) { return t * t + t + 1.0; }));
  v.push_back(first_order(
      "ode1.cos", "u' + 3u = 6 cos 3t, u(0) = 2", [](const Jet2& t) { return 6.0 * cos(3.0 * t); },
      [](const Jet2& t) { return cos(3.0 * t) + sin(3.0 * t); }));
  v.push_back(first_order(
      "ode1.exp", "u' + 3u = 4 e^t, u(0) = 2", [](const Jet2& t) { return 4.0 * exp(t); },
      [](const Jet2& t) { return exp(t); }));
  {
    OdeSpec s = first_order(
        "ode1.log_singular", "u' + 3u = -9 ln(t+1) - (1-t)^-2, u(0) = 2 (source singular at t = 1)",
        [](const Jet2& t) {
          const Jet2 w = 1.0 - t;
          return -9.0 * log(t + 1.0) - 1.0 / (w * w);
        },
        nullptr);
    s.singular_at = 1.0;
    v.push_back(std::move(s));
  }
  v.push_back(second_order(
      "ode2.harmonic.exp", "u'' + u = 2 e^t, u(0) = 2, u'(0) = 2", 0.0, 1.0,
      [](const Jet2& t) { return 2.0 * exp(t); }, [](const Jet2& t) { return exp(t); }, 2.0, 2.0));
  v.push_back(second_order(
      "ode2.harmonic.poly", "u'' + u = t^2 + t + 3, u(0) = 2, u'(0) = 2", 0.0, 1.0,
      [](const Jet2& t) { return t * t + t + 3.0; }, [](const Jet2& t) { return t * t + t + 1.0; }, 2.0, 2.0));
  v.push_back(second_order(
      "ode2.harmonic.log", "u'' + u = ln(t+1) - (t+1)^-2, u(0) = 1, u'(0) = 2", 0.0, 1.0,
      [](const Jet2& t) {
        const Jet2 w = t + 1.0;
        return log(w) - 1.0 / (w * w);
      },
      [](const Jet2& t) { return log(t + 1.0); }, 1.0, 2.0));
  v.push_back(second_order(
      "ode2.harmonic.trig", "u'' + u = 2 cos t^2 + (1 - 4t^2) sin t^2, u(0) = 1, u'(0) = 1", 0.0, 1.0,
      [](const Jet2& t) {
        const Jet2 t2 = t * t;
        return 2.0 * cos(t2) + (1.0 - 4.0 * t2) * sin(t2);
      },
      [](const Jet2& t) { return sin(t * t); }, 1.0, 1.0));
  v.push_back(second_order(
      "ode2.damped.exp", "u'' + 3u' + 4u = 8 e^t, u(0) = 3, u'(0) = -3", 3.0, 4.0,
      [](const Jet2& t) { return 8.0 * exp(t); }, [](const Jet2& t) { return exp(t); }, 3.0, -3.0));
  v.push_back(second_order(
      "ode2.damped.poly", "u'' + 3u' + 4u = 3t^2 + 11t + 9, u(0) = 3, u'(0) = -3", 3.0, 4.0,
      [](const Jet2& t) { return 3.0 * t * t + 11.0 * t + 9.0; },
      [](const Jet2& t) { return 0.75 * t * t + 1.625 * t + 0.65625; }, 3.0, -3.0));
  v.push_back(second_order(
      "ode2.damped.log", "u'' + 3u' + 4u = 3 ln(t+1) + 4 (t+1)^-1 - (t+1)^-2, u(0) = 2, u'(0) = -3", 3.0, 4.0,
      [](const Jet2& t) {
        const Jet2 w = t + 1.0;
        return 3.0 * log(w) + 4.0 / w - 1.0 / (w * w);
      },
      nullptr, 2.0, -3.0));
  v.push_back(second_order(
      "ode2.damped.trig", "u'' + 3u' + 4u = 6 cos t - 2 sin t, u(0) = 3, u'(0) = -3", 3.0, 4.0,
      [](const Jet2& t) { return 6.0 * cos(t) - 2.0 * sin(t); },
      [](const Jet2& t) { return (4.0 / 3.0) * cos(t) + (2.0 / 3.0) * sin(t); }, 3.0, -3.0));
  return v;
}

const std::vector<std::shared_ptr<const OdeProblem>>& ode_registry() {
  static const auto registry = [] {
    std::vector<std::shared_ptr<const OdeProblem>> r;
    for (auto& s : builtin_odes()) r.push_back(std::make_shared<const OdeProblem>(std::move(s)));
    return r;
  }();
  return registry;
}

} // namespace

std::vector<std::string> problem_ids() {
  std::vector<std::string> ids;
  for (const auto& p : ode_registry()) ids.push_back(p->id());
  ids.emplace_back("burgers");
  return ids;
}

std::shared_ptr<const OdeProblem> make_ode_problem(std::string_view id) {
  for (const auto& p : ode_registry())
    if (p->id() == id) return p;
  throw Error(ErrorKind::config, "unknown ODE problem '" + std::string(id) + "'");
}

std::shared_ptr<const Problem> make_problem(std::string_view id) {
  if (id == "burgers") return std::make_shared<const BurgersProblem>(0.01 / std::numbers::pi);
  return make_ode_problem(id);
}

double analytic_solution(std::string_view id, double x) { return make_ode_problem(id)->analytic_jet(x).value(); }

} // namespace eabp::problems
