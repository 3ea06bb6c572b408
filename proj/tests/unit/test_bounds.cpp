#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "eabp/bounds.hpp"
#include "eabp/error.hpp"
#include "support/oracles.hpp"

using namespace eabp;
using bounds::ResidualEnvelope;

namespace {

ResidualEnvelope constant_env(double eps, double lo, double hi) {
  ResidualEnvelope e;
  e.knots = {lo, hi};
  e.epsilons = {eps};
  return e;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

} // namespace

TEST_CASE("envelope of a synthetic sine residual") {
  const double knots[] = {0.0, std::numbers::pi};
  const auto e = bounds::estimate_envelope([](double x) { return std::sin(x); }, knots, 1001, 1.0);
  REQUIRE(e.epsilons.size() == 1);
  CHECK(e.epsilons[0] >= 0.999);
  CHECK(e.epsilons[0] <= 1.0);
  const auto z = bounds::estimate_envelope([](double) { return 0.0; }, bounds::uniform_knots(0, 4, 8), 10, 1.1);
  for (double v : z.epsilons) CHECK(v == 0.0);
}

TEST_CASE("envelope rejects malformed partitions") {
  auto r = [](double x) { return x; };
  const double one[] = {0.0};
  const double bad[] = {0.0, 1.0, 1.0};
  const double ok[] = {0.0, 1.0};
  CHECK_THROWS_AS(bounds::estimate_envelope(r, one, 10, 1.1), Error);
  CHECK_THROWS_AS(bounds::estimate_envelope(r, bad, 10, 1.1), Error);
  CHECK_THROWS_AS(bounds::estimate_envelope(r, ok, 1, 1.1), Error);
  CHECK_THROWS_AS(bounds::estimate_envelope(r, ok, 10, 0.9), Error);
}

TEST_CASE("every kernel vanishes at x0 and rejects points outside the partition") {
  const auto e = constant_env(0.3, 0.0, 4.0);
  CHECK(bounds::bound_first_order(e, 3.0, 0.0) == 0.0);
  CHECK(bounds::bound_second_order_distinct(e, 1.0, 2.0, 0.0) == 0.0);
  CHECK(bounds::bound_second_order_equal_limit(e, 1.5, 0.0) == 0.0);
  CHECK(bounds::bound_second_order_zero(e, 0.0) == 0.0);
  try {
    (void)bounds::bound_first_order(e, 3.0, 4.5);
    FAIL("expected an error");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::domain);
  }
  CHECK_THROWS_AS(bounds::bound_second_order_zero(e, -0.1), Error);
}

TEST_CASE("constant-envelope closed forms") {
  const double eps = 0.7, l = 3.0;
  const auto e = constant_env(eps, 0.0, 4.0);
  for (double x : {0.3, 1.0, 2.5, 4.0}) {
    CHECK(rel(bounds::bound_first_order(e, l, x), eps * (1 - std::exp(-l * x)) / l) < 1e-14);
    CHECK(rel(bounds::bound_second_order_equal_limit(e, 1.5, x),
              eps * (1 - std::exp(-1.5 * x) * (1 + 1.5 * x)) / (1.5 * 1.5)) < 1e-13);
    CHECK(rel(bounds::bound_second_order_zero(e, x), eps * x * x / 2) < 1e-14);
  }
}

TEST_CASE("two-interval first-order example against quadrature") {
  ResidualEnvelope e;
  e.knots = {0.0, 1.0, 2.0};
  e.epsilons = {0.1, 0.2};
  const double q = oracle::kernel_integral(e, [](double s) { return std::exp(-3.0 * s); }, 1.5);
  CHECK(std::abs(bounds::bound_first_order(e, 3.0, 1.5) - q) < 1e-10);
  CHECK(rel(bounds::bound_first_order(e, 3.0, 1.5), oracle::printed_first_order(e, 3.0, 1.5)) < 1e-12);
}

TEST_CASE("kernels match quadrature and the printed sums on random envelopes") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    const auto e = oracle::random_envelope(rng, 0.0, 4.0, 12);
    for (double x : {0.37, 1.9, 3.2, 4.0}) {
      CHECK(rel(bounds::bound_first_order(e, 3.0, x),
                oracle::kernel_integral(e, [](double s) { return std::exp(-3.0 * s); }, x)) < 1e-9);
      CHECK(rel(bounds::bound_first_order(e, 3.0, x), oracle::printed_first_order(e, 3.0, x)) < 1e-11);
      CHECK(rel(bounds::bound_second_order_distinct(e, 1.0, 2.0, x),
                oracle::kernel_integral(e, [](double s) { return std::exp(-s) - std::exp(-2 * s); }, x)) < 1e-9);
      CHECK(rel(bounds::bound_second_order_equal_limit(e, 1.5, x),
                oracle::kernel_integral(e, [](double s) { return s * std::exp(-1.5 * s); }, x)) < 1e-9);
      CHECK(rel(bounds::bound_second_order_zero(e, x), oracle::kernel_integral(e, [](double s) { return s; }, x)) <
            1e-10);
      CHECK(rel(bounds::bound_second_order_zero(e, x), oracle::printed_zero(e, x)) < 1e-12);
    }
  }
}

TEST_CASE("equal-limit kernel is the limit of the distinct one") {
  std::mt19937_64 rng(5);
  const auto e = oracle::random_envelope(rng, 0.0, 4.0, 20);
  for (double x : {0.5, 2.0, 4.0})
    CHECK(rel(bounds::bound_second_order_distinct(e, 1.5, 1.5 + 1e-6, x),
              bounds::bound_second_order_equal_limit(e, 1.5, x)) < 1e-5);
  CHECK(bounds::bound_second_order_distinct(e, 1.5, 1.5, 2.0) == bounds::bound_second_order_equal_limit(e, 1.5, 2.0));
}

TEST_CASE("enlarging any epsilon never shrinks a bound") {
  std::mt19937_64 rng(13);
  auto e = oracle::random_envelope(rng, 0.0, 4.0, 10);
  auto bigger = e;
  bigger.epsilons[4] *= 2.0;
  for (double x = 0.0; x <= 4.0; x += 0.1) {
    CHECK(bounds::bound_first_order(bigger, 3.0, x) >= bounds::bound_first_order(e, 3.0, x));
    CHECK(bounds::bound_second_order_distinct(bigger, 1.0, 2.0, x) >= bounds::bound_second_order_distinct(e, 1.0, 2.0, x));
    CHECK(bounds::bound_second_order_equal_limit(bigger, 1.5, x) >= bounds::bound_second_order_equal_limit(e, 1.5, x));
    CHECK(bounds::bound_second_order_zero(bigger, x) >= bounds::bound_second_order_zero(e, x));
  }
}

TEST_CASE("kernel selection follows the decay rates") {
  auto sel = [](const char* id) { return bounds::select_bound(*problems::make_ode_problem(id)); };
  CHECK(sel("ode1.exp").kind == bounds::BoundKind::first_order);
  CHECK(sel("ode1.exp").lambda1 == 3.0);
  CHECK(sel("ode2.harmonic.poly").kind == bounds::BoundKind::second_order_zero);
  const auto d = sel("ode2.damped.exp");
  CHECK(d.kind == bounds::BoundKind::second_order_equal_limit);
  CHECK(d.lambda1 == doctest::Approx(1.5));
}

TEST_CASE("accumulated residual heuristic for Burgers") {
  CHECK(bounds::burgers_pseudo_sigma([](double, double) { return 1.0; }, 0.2, 0.0, 16) == 0.0);
  CHECK(bounds::burgers_pseudo_sigma([](double, double) { return 0.25; }, 0.2, 2.0, 16) == doctest::Approx(0.5));
  CHECK(bounds::burgers_pseudo_sigma([](double, double t) { return t; }, 0.0, 1.0, 20001) ==
        doctest::Approx(0.5).epsilon(1e-4));
  CHECK(bounds::burgers_pseudo_sigma([](double, double t) { return -t; }, 0.0, 1.0, 101) > 0.0);
}

TEST_CASE("trained-model envelope majorizes the sampled residual and yields sigma_P(x0) = 0") {
  const auto p = problems::make_problem("ode1.poly");
  const auto t = train::train_deterministic(p, train::ode_config(200, 0));
  const auto env = bounds::estimate_envelope(t);
  CHECK(env.knots.front() == 0.0);
  CHECK(env.knots.back() == 4.0);
  CHECK(env.epsilons.size() == 40);
  for (std::size_t k = 0; k < env.epsilons.size(); ++k) {
    CHECK(env.epsilons[k] >= std::abs(problems::residual_at(*p, t.params, {env.knots[k], 0.0})));
    CHECK(env.epsilons[k] > 0.0);
  }
  const auto sigma = bounds::PseudoSigma::for_ode(t, env);
  CHECK(sigma({0.0, 0.0}) == 0.0);

  // Soundness even for a weakly trained model.
  std::vector<problems::Point> grid;
  for (int i = 0; i <= 100; ++i) grid.push_back({0.04 * i, 0.0});
  const auto prof = bounds::pseudo_profile(*p, t, env, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double err = std::abs(problems::analytic_solution("ode1.poly", grid[i][0]) -
                                problems::surrogate_value(*p, t.params, grid[i]));
    CHECK(err <= prof.sigma_p[i]);
  }
  std::ostringstream os;
  bounds::write_profile_csv(prof, os);
  CHECK(os.str().rfind("x,sigma_P\n", 0) == 0);
}
