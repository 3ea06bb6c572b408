#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "eabp/adam.hpp"
#include "eabp/error.hpp"

using namespace eabp;

TEST_CASE("first bias-corrected Adam step moves each parameter by lr * sign(g)") {
  std::vector<double> p{1.0, -2.0, 0.5};
  const std::vector<double> g{0.3, -4.0, 0.0};
  auto st = nn::make_adam(3, 0.01);
  nn::adam_step(p, g, st);
  // m_hat = g, v_hat = g^2 after one step.
  CHECK(p[0] == doctest::Approx(1.0 - 0.01 * 0.3 / (0.3 + 1e-8)));
  CHECK(p[1] == doctest::Approx(-2.0 + 0.01 * 4.0 / (4.0 + 1e-8)));
  CHECK(p[2] == 0.5);
  CHECK(st.step_count == 1);
}

TEST_CASE("second step matches a hand recursion") {
  std::vector<double> p{0.0};
  auto st = nn::make_adam(1, 0.1);
  nn::adam_step(p, std::vector<double>{1.0}, st);
  nn::adam_step(p, std::vector<double>{-0.5}, st);
  const double m = 0.9 * 0.1 * 1.0 + 0.1 * -0.5;
  const double v = 0.999 * 0.001 * 1.0 + 0.001 * 0.25;
  const double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
  const double p1 = -0.1 * 1.0 / (1.0 + 1e-8);
  CHECK(p[0] == doctest::Approx(p1 - 0.1 * mh / (std::sqrt(vh) + 1e-8)).epsilon(1e-14));
}

TEST_CASE("non-finite gradients raise training_diverged and leave state untouched") {
  std::vector<double> p{1.0, 2.0};
  auto st = nn::make_adam(2, 0.01);
  const std::vector<double> g{0.1, std::numeric_limits<double>::quiet_NaN()};
  try {
    nn::adam_step(p, g, st);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::training_diverged);
  }
  CHECK(p[0] == 1.0);
  CHECK(st.step_count == 0);
}

TEST_CASE("zero gradient leaves parameters unchanged but counts the step") {
  std::vector<double> p{0.4};
  auto st = nn::make_adam(1, 0.01);
  nn::adam_step(p, std::vector<double>{0.0}, st);
  CHECK(p[0] == 0.4);
  CHECK(st.step_count == 1);
}

TEST_CASE("Adam drives w^2 toward zero like the scalar recursion") {
  std::vector<double> p{1.0};
  auto st = nn::make_adam(1, 0.01);
  double w = 1.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 1000; ++t) {
    nn::adam_step(p, std::vector<double>{2.0 * p[0]}, st);
    const double g = 2.0 * w;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    w -= 0.01 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
  }
  CHECK(std::abs(p[0]) < 1e-2);
  CHECK(p[0] == doctest::Approx(w).epsilon(1e-12));
}
