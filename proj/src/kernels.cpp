#include "eabp/kernels.hpp"

namespace eabp::kernels {

std::vector<double> surrogate_values_serial(const problems::Problem& problem, std::span<const nn::Network> samples,
                                            std::span<const Point> grid) {
  const std::size_t S = samples.size();
  std::vector<double> out(grid.size() * S);
  for (std::size_t g = 0; g < grid.size(); ++g)
    for (std::size_t s = 0; s < S; ++s) out[g * S + s] = problems::surrogate_value(problem, samples[s], grid[g]);
  return out;
}

std::vector<double> surrogate_values(const problems::Problem& problem, std::span<const nn::Network> samples,
                                     std::span<const Point> grid) {
  const std::size_t S = samples.size();
  std::vector<double> out(grid.size() * S);
  parallel_for(grid.size(), [&](std::size_t g) {
    const double offset = problem.offset(grid[g]).value();
    const double mask = problem.mask(grid[g]).value();
    const std::span<const double> x(grid[g].data(), static_cast<std::size_t>(problem.input_dim()));
    for (std::size_t s = 0; s < S; ++s) out[g * S + s] = offset + mask * nn::forward(samples[s], x);
  });
  return out;
}

std::vector<double> residuals_serial(const problems::Problem& problem, const nn::Network& net,
                                     std::span<const Point> points) {
  std::vector<double> r(points.size());
  for (std::size_t j = 0; j < points.size(); ++j) r[j] = problems::residual_at(problem, net, points[j]);
  return r;
}

std::vector<double> residuals(const problems::Problem& problem, const nn::Network& net, std::span<const Point> points) {
  std::vector<double> r(points.size());
  parallel_for(points.size(), [&](std::size_t j) { r[j] = problems::residual_at(problem, net, points[j]); });
  return r;
}

} // namespace eabp::kernels
