#pragma once

// Data-parallel kernels over collocation points, evaluation grids and
// posterior samples. Each OpenMP kernel has a serial twin kept as the
// reference implementation for tests and the benchmark.
//
// Reductions use a fixed number of chunks that depends only on the problem
// size, never on the thread count, so results are bit-identical for any
// OMP_NUM_THREADS.

#include <algorithm>
#include <cstddef>
#include <exception>
#include <span>
#include <vector>

#include <omp.h>

#include "eabp/error.hpp"
#include "eabp/jet.hpp"
#include "eabp/network.hpp"
#include "eabp/problems.hpp"

namespace eabp::kernels {

using problems::Point;

inline constexpr std::size_t kReductionChunks = 64;

// Loss contribution of one point and its cotangent on the raw network jet.
struct PointLoss {
  double loss = 0.0;
  Jet2 cotangent;
};

// Runs body(i) for i in [0, n) on the OpenMP team; the first exception thrown
// by any iteration is rethrown on the calling thread.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  std::exception_ptr failure;
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(eabp_parallel_for_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

namespace detail {

inline void check_points(const nn::Network& net, std::span<const int> tracked, std::span<double> grad) {
  if (grad.size() != net.size()) throw Error(ErrorKind::shape, "gradient buffer size mismatch");
  if (tracked.size() > static_cast<std::size_t>(Jet2::kMaxDims))
    throw Error(ErrorKind::unsupported_order, "at most two tracked inputs are supported");
}

} // namespace detail

// Sum over points of head(j, raw_jet(points[j])).loss, writing the parameter
// gradient of that sum into `grad`. The head maps the raw network jet to a
// loss and its cotangent.
template <class Head>
double loss_and_gradient_serial(const nn::Network& net, std::span<const Point> points, std::span<const int> tracked,
                                Head&& head, std::span<double> grad) {
  detail::check_points(net, tracked, grad);
  std::fill(grad.begin(), grad.end(), 0.0);
  nn::JetTape tape;
  double total = 0.0;
  const auto dim = static_cast<std::size_t>(net.input_dim());
  for (std::size_t j = 0; j < points.size(); ++j) {
    const Jet2 raw = nn::forward_jet(net, std::span<const double>(points[j].data(), dim), tracked, &tape);
    const PointLoss pl = head(j, raw);
    total += pl.loss;
    nn::backward(net, tape, pl.cotangent, grad);
  }
  return total;
}

template <class Head>
double loss_and_gradient(const nn::Network& net, std::span<const Point> points, std::span<const int> tracked,
                         Head&& head, std::span<double> grad) {
  detail::check_points(net, tracked, grad);
  const std::size_t n = points.size();
  const std::size_t chunks = std::max<std::size_t>(1, std::min(n, kReductionChunks));
  const std::size_t P = net.size();
  std::vector<double> partial(chunks * P, 0.0);
  std::vector<double> partial_loss(chunks, 0.0);
  const auto dim = static_cast<std::size_t>(net.input_dim());
  std::exception_ptr failure;

#pragma omp parallel
  {
    nn::JetTape tape;
#pragma omp for schedule(static)
    for (long long k = 0; k < static_cast<long long>(chunks); ++k) {
      try {
        const std::size_t begin = n * k / chunks, end = n * (k + 1) / chunks;
        std::span<double> g(partial.data() + k * P, P);
        double loss = 0.0;
        for (std::size_t j = begin; j < end; ++j) {
          const Jet2 raw = nn::forward_jet(net, std::span<const double>(points[j].data(), dim), tracked, &tape);
          const PointLoss pl = head(j, raw);
          loss += pl.loss;
          nn::backward(net, tape, pl.cotangent, g);
        }
        partial_loss[k] = loss;
      } catch (...) {
#pragma omp critical(eabp_loss_failure)
        if (!failure) failure = std::current_exception();
      }
    }
  }
  if (failure) std::rethrow_exception(failure);

  std::fill(grad.begin(), grad.end(), 0.0);
  double total = 0.0;
  for (std::size_t k = 0; k < chunks; ++k) {
    total += partial_loss[k];
    const double* pk = partial.data() + k * P;
    for (std::size_t i = 0; i < P; ++i) grad[i] += pk[i];
  }
  return total;
}

// Transformed surrogate values for every (grid point, sample) pair, row-major
// [grid][sample].
std::vector<double> surrogate_values_serial(const problems::Problem& problem, std::span<const nn::Network> samples,
                                            std::span<const Point> grid);
std::vector<double> surrogate_values(const problems::Problem& problem, std::span<const nn::Network> samples,
                                     std::span<const Point> grid);

// Residual of the surrogate at each point.
std::vector<double> residuals_serial(const problems::Problem& problem, const nn::Network& net,
                                     std::span<const Point> points);
std::vector<double> residuals(const problems::Problem& problem, const nn::Network& net, std::span<const Point> points);

} // namespace eabp::kernels
