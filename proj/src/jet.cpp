#include "eabp/jet.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numbers>
#include <utility>

namespace eabp {

Jet2::Jet2(int dims, double value) : dims_(dims) {
  assert(dims >= 0 && dims <= kMaxDims);
  c_[0] = value;
}

Jet2 Jet2::variable(double value, int index, int dims) {
  Jet2 j(dims, value);
  j.d1(index) = 1.0;
  return j;
}

int Jet2::hess_index(int i, int j) const {
  if (i > j) std::swap(i, j);
  return 1 + dims_ + i * dims_ - i * (i - 1) / 2 + (j - i);
}

Jet2 Jet2::chain(double f0, double f1, double f2) const {
  Jet2 r(dims_, f0);
  for (int i = 0; i < dims_; ++i) r.d1(i) = f1 * d1(i);
  for (int i = 0; i < dims_; ++i)
    for (int j = i; j < dims_; ++j) r.d2(i, j) = f2 * d1(i) * d1(j) + f1 * d2(i, j);
  return r;
}

namespace {

// Binary ops accept a dims-0 operand as a constant.
int common_dims(const Jet2& a, const Jet2& b) {
  assert(a.dims() == b.dims() || a.dims() == 0 || b.dims() == 0);
  return std::max(a.dims(), b.dims());
}

Jet2 promote(const Jet2& a, int dims) {
  if (a.dims() == dims) return a;
  return Jet2(dims, a.value());
}

} // namespace

Jet2& Jet2::operator+=(const Jet2& o) {
  const int d = common_dims(*this, o);
  const Jet2 b = promote(o, d);
  *this = promote(*this, d);
  for (int k = 0; k < size(); ++k) c_[k] += b.c_[k];
  return *this;
}

Jet2& Jet2::operator-=(const Jet2& o) {
  const int d = common_dims(*this, o);
  const Jet2 b = promote(o, d);
  *this = promote(*this, d);
  for (int k = 0; k < size(); ++k) c_[k] -= b.c_[k];
  return *this;
}

Jet2& Jet2::operator*=(double s) {
  for (int k = 0; k < size(); ++k) c_[k] *= s;
  return *this;
}

Jet2 operator+(Jet2 a, const Jet2& b) { return a += b; }
Jet2 operator-(Jet2 a, const Jet2& b) { return a -= b; }
Jet2 operator-(const Jet2& a) { return a * -1.0; }

Jet2 operator*(const Jet2& x, const Jet2& y) {
  const int d = common_dims(x, y);
  const Jet2 a = promote(x, d);
  const Jet2 b = promote(y, d);
  Jet2 r(d, a.value() * b.value());
  for (int i = 0; i < d; ++i) r.d1(i) = a.d1(i) * b.value() + a.value() * b.d1(i);
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j)
      r.d2(i, j) = a.d2(i, j) * b.value() + a.d1(i) * b.d1(j) + a.d1(j) * b.d1(i) +
                   a.value() * b.d2(i, j);
  return r;
}

Jet2 operator/(const Jet2& a, const Jet2& b) {
  const double v = b.value();
  return a * b.chain(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v));
}

Jet2 operator+(Jet2 a, double s) {
  a.value() += s;
  return a;
}
Jet2 operator+(double s, Jet2 a) { return std::move(a) + s; }
Jet2 operator-(Jet2 a, double s) {
  a.value() -= s;
  return a;
}
Jet2 operator-(double s, const Jet2& a) { return -a + s; }
Jet2 operator*(Jet2 a, double s) { return a *= s; }
Jet2 operator*(double s, Jet2 a) { return a *= s; }
Jet2 operator/(Jet2 a, double s) { return a *= (1.0 / s); }
Jet2 operator/(double s, const Jet2& a) {
  const double v = a.value();
  return s * a.chain(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v));
}

Jet2 exp(const Jet2& a) {
  const double e = std::exp(a.value());
  return a.chain(e, e, e);
}

Jet2 log(const Jet2& a) {
  const double v = a.value();
  return a.chain(std::log(v), 1.0 / v, -1.0 / (v * v));
}

Jet2 sin(const Jet2& a) {
  const double s = std::sin(a.value()), c = std::cos(a.value());
  return a.chain(s, c, -s);
}

Jet2 cos(const Jet2& a) {
  const double s = std::sin(a.value()), c = std::cos(a.value());
  return a.chain(c, -s, -c);
}

Jet2 tanh(const Jet2& a) {
  const double t = std::tanh(a.value());
  const double s1 = 1.0 - t * t;
  return a.chain(t, s1, -2.0 * t * s1);
}

Jet2 sigmoid(const Jet2& a) {
  const double s = 1.0 / (1.0 + std::exp(-a.value()));
  const double s1 = s * (1.0 - s);
  return a.chain(s, s1, s1 * (1.0 - 2.0 * s));
}

Jet2 square(const Jet2& a) { return a * a; }

double sin_pi(double x) {
  const double r = std::remainder(x, 2.0); // exact, in [-1, 1]
  double a = std::fabs(r);
  if (a > 0.5) a = 1.0 - a;                 // sin(pi*a) == sin(pi*(1-a))
  const double s = std::sin(std::numbers::pi * a);
  return r < 0.0 ? -s : s;
}

double cos_pi(double x) {
  const double a = std::fabs(std::remainder(x, 2.0));
  if (a > 0.5) return -std::cos(std::numbers::pi * (1.0 - a));
  return std::cos(std::numbers::pi * a);
}

Jet2 sin_pi(const Jet2& a) {
  const double pi = std::numbers::pi;
  const double s = sin_pi(a.value()), c = cos_pi(a.value());
  return a.chain(s, pi * c, -pi * pi * s);
}

Jet2 cos_pi(const Jet2& a) {
  const double pi = std::numbers::pi;
  const double s = sin_pi(a.value()), c = cos_pi(a.value());
  return a.chain(c, -pi * s, -pi * pi * c);
}

} // namespace eabp
