#include "eabp/adam.hpp"

#include <cmath>

#include "eabp/error.hpp"

namespace eabp::nn {

AdamState make_adam(std::size_t n_params, double learning_rate) {
  AdamState s;
  s.first_moment.assign(n_params, 0.0);
  s.second_moment.assign(n_params, 0.0);
  s.learning_rate = learning_rate;
  return s;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state) {
  if (params.size() != grads.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size())
    throw Error(ErrorKind::shape, "adam_step: parameter, gradient and moment shapes differ");
  for (double g : grads)
    if (!std::isfinite(g)) throw Error(ErrorKind::training_diverged, "non-finite gradient", state.step_count);

  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  auto& m = state.first_moment;
  auto& v = state.second_moment;
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * grads[i];
    v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
    const double mhat = m[i] / c1;
    const double vhat = v[i] / c2;
    params[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.eps);
  }
}

} // namespace eabp::nn
