#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "eabp/jet.hpp"

namespace eabp::nn {

enum class Activation { tanh, sigmoid };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

// Fully connected network with a scalar linear output layer.
//
// All weights and biases live in one flat vector in the order
// W_1, b_1, W_2, b_2, ..., each W_l row-major with shape (out x in).
// Optimizers and variational families operate on that flat vector directly.
class Network {
public:
  Network() = default;
  // Zero-initialized parameters. Throws ErrorKind::config on invalid sizes.
  Network(std::vector<int> layer_sizes, Activation activation);

  const std::vector<int>& layer_sizes() const { return sizes_; }
  Activation activation() const { return activation_; }
  int input_dim() const { return sizes_.front(); }
  int num_layers() const { return static_cast<int>(sizes_.size()) - 1; }
  int fan_in(int layer) const { return sizes_[layer]; }
  int fan_out(int layer) const { return sizes_[layer + 1]; }
  // Width of the last hidden layer (the feature dimension of the linear head).
  int feature_dim() const { return sizes_[sizes_.size() - 2]; }

  std::size_t size() const { return params_.size(); }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  void set_parameters(std::span<const double> values);

  std::size_t weight_offset(int layer) const { return offsets_[2 * layer]; }
  std::size_t bias_offset(int layer) const { return offsets_[2 * layer + 1]; }
  std::span<const double> weights(int layer) const;
  std::span<const double> biases(int layer) const;
  std::span<double> weights(int layer);
  std::span<double> biases(int layer);

  bool same_architecture(const Network& other) const;

private:
  std::vector<int> sizes_;
  Activation activation_ = Activation::tanh;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

// Glorot-style fan-in/fan-out scaled uniform weights, U(-a, a) with
// a = sqrt(6 / (fan_in + fan_out)); zero biases. Deterministic in seed.
Network init_network(std::vector<int> layer_sizes, Activation activation, std::uint64_t seed);

// Activations recorded by forward_jet, consumed by backward. Buffers are
// component-major ([component][unit]) and reused across calls.
struct JetTape {
  int dims = 0;
  std::vector<int> layer_sizes;
  std::vector<std::vector<double>> inputs; // input jets of every affine layer
  std::vector<std::vector<double>> pre;    // pre-activation jets of hidden layers
  std::vector<std::vector<double>> deriv;  // s', s'', s''' of hidden units, interleaved
};

double forward(const Network& net, std::span<const double> x);

// Network output with exact first/second derivatives w.r.t. the inputs named
// in `tracked` (at most two). value() is bit-identical to forward().
Jet2 forward_jet(const Network& net, std::span<const double> x, std::span<const int> tracked,
                 JetTape* tape = nullptr);

// Reverse sweep: accumulates into `grad` the parameter gradient of
// <upstream, output jet>, i.e. including paths through d1 and d2.
void backward(const Network& net, const JetTape& tape, const Jet2& upstream, std::span<double> grad);

// Last-hidden-layer activations at x (without the bias feature).
std::vector<double> hidden_features(const Network& net, std::span<const double> x);

// Textual weights file, 17 significant digits, round-trips bit-exactly.
void write_network(const Network& net, std::ostream& out);
Network read_network(std::istream& in);
void save_network(const Network& net, const std::filesystem::path& path);
Network load_network(const std::filesystem::path& path);

} // namespace eabp::nn
