#include "eabp/network.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

#include "eabp/error.hpp"

namespace eabp::nn {

std::string_view to_string(Activation a) {
  return a == Activation::tanh ? "tanh" : "sigmoid";
}

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "sigmoid") return Activation::sigmoid;
  throw Error(ErrorKind::config, "unknown activation '" + std::string(name) + "'");
}

Network::Network(std::vector<int> layer_sizes, Activation activation)
    : sizes_(std::move(layer_sizes)), activation_(activation) {
  if (sizes_.size() < 2) throw Error(ErrorKind::config, "layer_sizes needs at least an input and an output entry");
  for (int s : sizes_)
    if (s < 1) throw Error(ErrorKind::config, "layer sizes must be positive");
  if (sizes_.back() != 1) throw Error(ErrorKind::config, "network output must be scalar");
  if (sizes_.front() > Jet2::kMaxDims) throw Error(ErrorKind::config, "at most two network inputs are supported");
  std::size_t off = 0;
  for (int l = 0; l < num_layers(); ++l) {
    offsets_.push_back(off);
    off += static_cast<std::size_t>(fan_in(l)) * fan_out(l);
    offsets_.push_back(off);
    off += fan_out(l);
  }
  params_.assign(off, 0.0);
}

void Network::set_parameters(std::span<const double> values) {
  if (values.size() != params_.size()) throw Error(ErrorKind::shape, "parameter vector size mismatch");
  std::copy(values.begin(), values.end(), params_.begin());
}

std::span<const double> Network::weights(int l) const {
  return std::span<const double>(params_).subspan(weight_offset(l), static_cast<std::size_t>(fan_in(l)) * fan_out(l));
}
std::span<const double> Network::biases(int l) const {
  return std::span<const double>(params_).subspan(bias_offset(l), fan_out(l));
}
std::span<double> Network::weights(int l) {
  return std::span<double>(params_).subspan(weight_offset(l), static_cast<std::size_t>(fan_in(l)) * fan_out(l));
}
std::span<double> Network::biases(int l) {
  return std::span<double>(params_).subspan(bias_offset(l), fan_out(l));
}

bool Network::same_architecture(const Network& other) const {
  return sizes_ == other.sizes_ && activation_ == other.activation_;
}

Network init_network(std::vector<int> layer_sizes, Activation activation, std::uint64_t seed) {
  Network net(std::move(layer_sizes), activation);
  std::mt19937_64 rng(seed);
  for (int l = 0; l < net.num_layers(); ++l) {
    const double limit = std::sqrt(6.0 / (net.fan_in(l) + net.fan_out(l)));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& w : net.weights(l)) w = dist(rng);
  }
  return net;
}

namespace {

struct ActDerivs {
  double s, s1, s2, s3;
};

inline ActDerivs activate(Activation a, double z) {
  if (a == Activation::tanh) {
    const double t = std::tanh(z);
    const double s1 = 1.0 - t * t;
    return {t, s1, -2.0 * t * s1, s1 * (6.0 * t * t - 2.0)};
  }
  const double s = 1.0 / (1.0 + std::exp(-z));
  const double s1 = s * (1.0 - s);
  return {s, s1, s1 * (1.0 - 2.0 * s), s1 * (1.0 - 6.0 * s + 6.0 * s * s)};
}

// out[c][o] = sum_i W[o][i] in[c][i] (+ b[o] for the value component).
void affine(std::span<const double> w, std::span<const double> b, const double* in, double* out, int n_in,
            int n_out, int ncomp) {
  for (int c = 0; c < ncomp; ++c) {
    const double* a = in + c * n_in;
    for (int o = 0; o < n_out; ++o) {
      const double* row = w.data() + static_cast<std::size_t>(o) * n_in;
      double acc = 0.0;
#pragma omp simd reduction(+ : acc)
      for (int i = 0; i < n_in; ++i) acc += row[i] * a[i];
      out[c * n_out + o] = c == 0 ? acc + b[o] : acc;
    }
  }
}

// Hessian slot of (k, l) for the component-major layout; mirrors Jet2::hess_index.
inline int hess_slot(int dims, int k, int l) { return 1 + dims + k * dims - k * (k - 1) / 2 + (l - k); }

} // namespace

Jet2 forward_jet(const Network& net, std::span<const double> x, std::span<const int> tracked, JetTape* tape) {
  const int n_in0 = net.input_dim();
  if (static_cast<int>(x.size()) != n_in0) throw Error(ErrorKind::shape, "input dimension does not match network");
  if (tracked.size() > static_cast<std::size_t>(Jet2::kMaxDims))
    throw Error(ErrorKind::unsupported_order, "at most two tracked inputs are supported");
  for (int t : tracked)
    if (t < 0 || t >= n_in0) throw Error(ErrorKind::shape, "tracked input index out of range");

  const int dims = static_cast<int>(tracked.size());
  const int ncomp = Jet2::components(dims);
  const int L = net.num_layers();

  JetTape local;
  JetTape& tp = tape ? *tape : local;
  tp.dims = dims;
  tp.layer_sizes = net.layer_sizes();
  tp.inputs.resize(L);
  tp.pre.resize(L - 1);
  tp.deriv.resize(L - 1);

  auto& in0 = tp.inputs[0];
  in0.assign(static_cast<std::size_t>(ncomp) * n_in0, 0.0);
  for (int i = 0; i < n_in0; ++i) in0[i] = x[i];
  for (int k = 0; k < dims; ++k) in0[(1 + k) * n_in0 + tracked[k]] = 1.0;

  double out[Jet2::kMaxComponents];
  for (int l = 0; l < L; ++l) {
    const int n_in = net.fan_in(l), n_out = net.fan_out(l);
    const double* a = tp.inputs[l].data();
    if (l == L - 1) {
      affine(net.weights(l), net.biases(l), a, out, n_in, 1, ncomp);
      break;
    }
    auto& z = tp.pre[l];
    z.resize(static_cast<std::size_t>(ncomp) * n_out);
    affine(net.weights(l), net.biases(l), a, z.data(), n_in, n_out, ncomp);

    auto& d = tp.deriv[l];
    d.resize(3 * static_cast<std::size_t>(n_out));
    auto& next = tp.inputs[l + 1];
    next.resize(static_cast<std::size_t>(ncomp) * n_out);
    for (int o = 0; o < n_out; ++o) {
      const ActDerivs s = activate(net.activation(), z[o]);
      d[3 * o] = s.s1;
      d[3 * o + 1] = s.s2;
      d[3 * o + 2] = s.s3;
      next[o] = s.s;
      for (int k = 0; k < dims; ++k) next[(1 + k) * n_out + o] = s.s1 * z[(1 + k) * n_out + o];
      for (int k = 0; k < dims; ++k)
        for (int m = k; m < dims; ++m) {
          const int h = hess_slot(dims, k, m);
          next[h * n_out + o] =
              s.s2 * z[(1 + k) * n_out + o] * z[(1 + m) * n_out + o] + s.s1 * z[h * n_out + o];
        }
    }
  }

  Jet2 result(dims);
  for (int c = 0; c < ncomp; ++c) result[c] = out[c];
  return result;
}

double forward(const Network& net, std::span<const double> x) {
  return forward_jet(net, x, {}, nullptr).value();
}

void backward(const Network& net, const JetTape& tape, const Jet2& upstream, std::span<double> grad) {
  if (tape.layer_sizes != net.layer_sizes() || static_cast<int>(tape.inputs.size()) != net.num_layers())
    throw Error(ErrorKind::internal, "tape was recorded for a different network");
  if (upstream.dims() != tape.dims) throw Error(ErrorKind::internal, "cotangent order does not match tape");
  if (grad.size() != net.size()) throw Error(ErrorKind::shape, "gradient buffer size mismatch");

  const int dims = tape.dims;
  const int ncomp = Jet2::components(dims);
  const int L = net.num_layers();

  std::vector<double> zbar(upstream.data(), upstream.data() + ncomp);
  std::vector<double> abar;

  for (int l = L - 1; l >= 0; --l) {
    const int n_in = net.fan_in(l), n_out = net.fan_out(l);
    const double* a = tape.inputs[l].data();
    double* gw = grad.data() + net.weight_offset(l);
    double* gb = grad.data() + net.bias_offset(l);
    const auto w = net.weights(l);

    for (int o = 0; o < n_out; ++o) {
      gb[o] += zbar[o];
      double* grow = gw + static_cast<std::size_t>(o) * n_in;
      for (int c = 0; c < ncomp; ++c) {
        const double zc = zbar[c * n_out + o];
        if (zc == 0.0) continue;
        const double* ac = a + c * n_in;
#pragma omp simd
        for (int i = 0; i < n_in; ++i) grow[i] += zc * ac[i];
      }
    }
    if (l == 0) break;

    abar.assign(static_cast<std::size_t>(ncomp) * n_in, 0.0);
    for (int c = 0; c < ncomp; ++c) {
      double* ab = abar.data() + c * n_in;
      for (int o = 0; o < n_out; ++o) {
        const double zc = zbar[c * n_out + o];
        if (zc == 0.0) continue;
        const double* row = w.data() + static_cast<std::size_t>(o) * n_in;
#pragma omp simd
        for (int i = 0; i < n_in; ++i) ab[i] += zc * row[i];
      }
    }

    // Through the activation of hidden layer l-1 (width n_in).
    const auto& z = tape.pre[l - 1];
    const auto& d = tape.deriv[l - 1];
    zbar.assign(static_cast<std::size_t>(ncomp) * n_in, 0.0);
    for (int u = 0; u < n_in; ++u) {
      const double s1 = d[3 * u], s2 = d[3 * u + 1], s3 = d[3 * u + 2];
      double zv = abar[u] * s1;
      for (int k = 0; k < dims; ++k) {
        const double ak = abar[(1 + k) * n_in + u];
        zv += ak * z[(1 + k) * n_in + u] * s2;
        zbar[(1 + k) * n_in + u] += ak * s1;
      }
      for (int k = 0; k < dims; ++k)
        for (int m = k; m < dims; ++m) {
          const int h = hess_slot(dims, k, m);
          const double ah = abar[h * n_in + u];
          const double zk = z[(1 + k) * n_in + u], zm = z[(1 + m) * n_in + u];
          zv += ah * (s3 * zk * zm + s2 * z[h * n_in + u]);
          zbar[(1 + k) * n_in + u] += ah * s2 * zm;
          zbar[(1 + m) * n_in + u] += ah * s2 * zk;
          zbar[h * n_in + u] += ah * s1;
        }
      zbar[u] = zv;
    }
  }
}

std::vector<double> hidden_features(const Network& net, std::span<const double> x) {
  if (net.num_layers() < 2) throw Error(ErrorKind::config, "network has no hidden layer");
  JetTape tape;
  forward_jet(net, x, {}, &tape);
  const auto& last = tape.inputs[net.num_layers() - 1];
  return std::vector<double>(last.begin(), last.begin() + net.feature_dim());
}

void write_network(const Network& net, std::ostream& out) {
  out << "eabp-network 1\n";
  out << "activation " << to_string(net.activation()) << "\n";
  out << "layers " << net.layer_sizes().size();
  for (int s : net.layer_sizes()) out << ' ' << s;
  out << "\nparameters " << net.size() << "\n";
  char buf[32];
  for (double v : net.parameters()) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf << '\n';
  }
}

namespace {

double parse_double(const std::string& tok) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw Error(ErrorKind::config, "malformed number '" + tok + "' in weights file");
  return v;
}

} // namespace

Network read_network(std::istream& in) {
  std::string tag;
  int version = 0;
  if (!(in >> tag >> version) || tag != "eabp-network")
    throw Error(ErrorKind::config, "not an eabp weights file");
  if (version != 1) throw Error(ErrorKind::config, "unsupported weights file version " + std::to_string(version));
  std::string key, act;
  in >> key >> act;
  if (key != "activation") throw Error(ErrorKind::config, "weights file: expected 'activation'");
  std::size_t n_sizes = 0;
  in >> key >> n_sizes;
  if (key != "layers" || !in) throw Error(ErrorKind::config, "weights file: expected 'layers'");
  std::vector<int> sizes(n_sizes);
  for (auto& s : sizes) in >> s;
  std::size_t count = 0;
  in >> key >> count;
  if (key != "parameters" || !in) throw Error(ErrorKind::config, "weights file: expected 'parameters'");
  Network net(sizes, parse_activation(act));
  if (count != net.size()) throw Error(ErrorKind::config, "weights file: parameter count does not match layers");
  std::vector<double> values(count);
  std::string tok;
  for (auto& v : values) {
    if (!(in >> tok)) throw Error(ErrorKind::config, "weights file: truncated parameter list");
    v = parse_double(tok);
  }
  net.set_parameters(values);
  return net;
}

void save_network(const Network& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot open '" + path.string() + "' for writing");
  write_network(net, out);
  if (!out) throw Error(ErrorKind::io, "failed writing '" + path.string() + "'");
}

Network load_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open '" + path.string() + "'");
  return read_network(in);
}

} // namespace eabp::nn
