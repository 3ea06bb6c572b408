#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace eabp::nn {

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step_count = 0;
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

AdamState make_adam(std::size_t n_params, double learning_rate);

// One bias-corrected Adam update of `params` in place. Throws
// ErrorKind::training_diverged (leaving params and state untouched) when a
// gradient entry is not finite.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

} // namespace eabp::nn
