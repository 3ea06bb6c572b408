#pragma once

#include <array>
#include <cstddef>

namespace eabp {

// A scalar carried together with its first and second partial derivatives
// with respect to up to two tracked inputs.
//
// Components are stored flat: [value, d1..., d2 (packed upper triangle)].
// For one tracked input that is [v, v_x, v_xx]; for two it is
// [v, v_x, v_t, v_xx, v_xt, v_tt]. The same layout is used for cotangents
// (adjoints) of jets during reverse-mode sweeps.
class Jet2 {
public:
  static constexpr int kMaxDims = 2;
  static constexpr int kMaxComponents = 6;

  static constexpr int components(int dims) { return 1 + dims + dims * (dims + 1) / 2; }

  Jet2() = default;
  explicit Jet2(int dims, double value = 0.0);

  static Jet2 constant(double value, int dims) { return Jet2(dims, value); }
  // Independent variable: d/d(input index) = 1.
  static Jet2 variable(double value, int index, int dims);

  int dims() const { return dims_; }
  int size() const { return components(dims_); }

  double value() const { return c_[0]; }
  double& value() { return c_[0]; }
  double d1(int i) const { return c_[1 + i]; }
  double& d1(int i) { return c_[1 + i]; }
  double d2(int i, int j) const { return c_[hess_index(i, j)]; }
  double& d2(int i, int j) { return c_[hess_index(i, j)]; }

  double operator[](int k) const { return c_[k]; }
  double& operator[](int k) { return c_[k]; }
  const double* data() const { return c_.data(); }
  double* data() { return c_.data(); }

  // Position of d2(i, j) in the flat component array.
  int hess_index(int i, int j) const;

  // Composition with a scalar function given f, f', f'' at value().
  Jet2 chain(double f0, double f1, double f2) const;

  Jet2& operator+=(const Jet2& o);
  Jet2& operator-=(const Jet2& o);
  Jet2& operator*=(double s);

private:
  int dims_ = 0;
  std::array<double, kMaxComponents> c_{};
};

Jet2 operator+(Jet2 a, const Jet2& b);
Jet2 operator-(Jet2 a, const Jet2& b);
Jet2 operator-(const Jet2& a);
Jet2 operator*(const Jet2& a, const Jet2& b);
Jet2 operator/(const Jet2& a, const Jet2& b);
Jet2 operator+(Jet2 a, double s);
Jet2 operator+(double s, Jet2 a);
Jet2 operator-(Jet2 a, double s);
Jet2 operator-(double s, const Jet2& a);
Jet2 operator*(Jet2 a, double s);
Jet2 operator*(double s, Jet2 a);
Jet2 operator/(Jet2 a, double s);
Jet2 operator/(double s, const Jet2& a);

Jet2 exp(const Jet2& a);
Jet2 log(const Jet2& a);
Jet2 sin(const Jet2& a);
Jet2 cos(const Jet2& a);
Jet2 tanh(const Jet2& a);
Jet2 sigmoid(const Jet2& a);
Jet2 square(const Jet2& a);
// sin(pi*a) and cos(pi*a), exact zeros of sin at integers.
Jet2 sin_pi(const Jet2& a);
Jet2 cos_pi(const Jet2& a);

// sin(pi*x) with sin_pi(k) == 0 exactly for every integer k.
double sin_pi(double x);
double cos_pi(double x);

} // namespace eabp
