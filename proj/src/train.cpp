#include "eabp/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "eabp/adam.hpp"
#include "eabp/error.hpp"

namespace eabp::train {

using json = nlohmann::json;

TrainConfig ode_config(std::size_t epochs, std::uint64_t seed) {
  TrainConfig c;
  c.epochs = epochs;
  c.seed = seed;
  return c;
}

TrainConfig burgers_config(std::size_t nx, std::size_t nt, std::size_t epochs, std::uint64_t seed) {
  TrainConfig c;
  c.epochs = epochs;
  c.seed = seed;
  c.learning_rate = 1e-3;
  c.activation = nn::Activation::sigmoid;
  c.collocation.counts = {nx, nt};
  c.collocation.jitter = 0.5;
  c.batch_size = nx * nt;
  return c;
}

std::vector<Point> collocation_grid(const problems::Problem& problem, const CollocationSpec& spec) {
  const auto box = problem.train_box();
  if (spec.counts.size() != box.size())
    throw Error(ErrorKind::config, "collocation counts must match the problem's input dimension");
  for (auto c : spec.counts)
    if (c < 2) throw Error(ErrorKind::config, "collocation needs at least 2 points per dimension");
  auto coord = [&](std::size_t d, std::size_t i) {
    if (i + 1 == spec.counts[d]) return box[d].hi;
    return box[d].lo + (box[d].hi - box[d].lo) * static_cast<double>(i) / static_cast<double>(spec.counts[d] - 1);
  };
  std::vector<Point> pts;
  if (box.size() == 1) {
    for (std::size_t i = 0; i < spec.counts[0]; ++i) pts.push_back({coord(0, i), 0.0});
  } else {
    for (std::size_t it = 0; it < spec.counts[1]; ++it)
      for (std::size_t ix = 0; ix < spec.counts[0]; ++ix) pts.push_back({coord(0, ix), coord(1, it)});
  }
  return pts;
}

std::vector<Point> TrainedPINN::collocation_points() const { return collocation_grid(*problem, config.collocation); }

kernels::PointLoss residual_square_head(const problems::Problem& problem, const Point& p, const Jet2& raw,
                                        double weight) {
  const Jet2 mask = problem.mask(p);
  const Jet2 u = problem.offset(p) + mask * raw;
  const double r = problem.residual(u, p);
  Jet2 ubar = problem.residual_cotangent(u, p);
  ubar *= 2.0 * weight * r;
  return {weight * r * r, problems::reparameterize_pullback(mask, ubar)};
}

double mse_residual_loss(const problems::Problem& problem, const nn::Network& net, std::span<const Point> points) {
  if (points.empty()) return 0.0;
  const auto r = kernels::residuals(problem, net, points);
  double s = 0.0;
  for (double v : r) s += v * v;
  return s / static_cast<double>(r.size());
}

namespace {

void jitter_points(const problems::Problem& problem, const CollocationSpec& spec, std::span<const Point> base,
                   std::span<Point> out, std::mt19937_64& rng) {
  const auto box = problem.train_box();
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (std::size_t j = 0; j < base.size(); ++j) {
    for (std::size_t d = 0; d < box.size(); ++d) {
      const double cell = (box[d].hi - box[d].lo) / static_cast<double>(spec.counts[d] - 1);
      out[j][d] = std::clamp(base[j][d] + spec.jitter * cell * unit(rng), box[d].lo, box[d].hi);
    }
  }
}

} // namespace

TrainedPINN train_deterministic(std::shared_ptr<const problems::Problem> problem, const TrainConfig& config) {
  if (!problem) throw Error(ErrorKind::config, "no problem given");
  if (!(config.learning_rate > 0.0)) throw Error(ErrorKind::config, "learning rate must be positive");
  const auto base = collocation_grid(*problem, config.collocation);
  if (config.batch_size == 0 || config.batch_size > base.size())
    throw Error(ErrorKind::config, "batch_size must be in [1, collocation count]");

  std::vector<int> sizes{problem->input_dim()};
  sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
  sizes.push_back(1);

  TrainedPINN out;
  out.problem = problem;
  out.config = config;
  out.params = nn::init_network(sizes, config.activation, config.seed);
  out.loss_history.reserve(config.epochs);

  nn::Network& net = out.params;
  nn::AdamState adam = nn::make_adam(net.size(), config.learning_rate);
  std::vector<double> grad(net.size());
  std::vector<Point> points = base;
  std::mt19937_64 jitter_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  const std::size_t M = points.size();

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.collocation.jitter > 0.0) jitter_points(*problem, config.collocation, base, points, jitter_rng);
    double epoch_sum = 0.0;
    for (std::size_t begin = 0; begin < M; begin += config.batch_size) {
      const std::size_t end = std::min(M, begin + config.batch_size);
      const std::span<const Point> batch(points.data() + begin, end - begin);
      const double w = 1.0 / static_cast<double>(batch.size());
      const double loss = kernels::loss_and_gradient(
          net, batch, problem->tracked(),
          [&](std::size_t j, const Jet2& raw) { return residual_square_head(*problem, batch[j], raw, w); }, grad);
      if (!std::isfinite(loss))
        throw Error(ErrorKind::training_diverged, "non-finite residual loss at epoch " + std::to_string(epoch), epoch);
      epoch_sum += loss * static_cast<double>(batch.size());
      try {
        nn::adam_step(net.parameters(), grad, adam);
      } catch (const Error& e) {
        throw Error(e.kind(), std::string(e.what()) + " at epoch " + std::to_string(epoch), epoch);
      }
    }
    out.loss_history.push_back(epoch_sum / static_cast<double>(M));
  }
  return out;
}

void save_trained(const TrainedPINN& trained, const std::filesystem::path& weights_path) {
  nn::save_network(trained.params, weights_path);
  const auto& c = trained.config;
  json meta = {
      {"problem", trained.problem->id()},
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"learning_rate", c.learning_rate},
      {"collocation", {{"counts", c.collocation.counts}, {"jitter", c.collocation.jitter}}},
      {"seed", c.seed},
      {"hidden", c.hidden},
      {"activation", std::string(nn::to_string(c.activation))},
      {"final_loss", trained.final_loss()},
  };
  auto sidecar = weights_path;
  sidecar += ".json";
  std::ofstream out(sidecar);
  if (!out) throw Error(ErrorKind::io, "cannot open '" + sidecar.string() + "' for writing");
  out << meta.dump(2) << '\n';
}

TrainedPINN load_trained(const std::filesystem::path& weights_path, std::shared_ptr<const problems::Problem> problem) {
  TrainedPINN t;
  t.problem = std::move(problem);
  t.params = nn::load_network(weights_path);
  if (t.params.input_dim() != t.problem->input_dim())
    throw Error(ErrorKind::config, "weights input dimension does not match problem '" + t.problem->id() + "'");
  t.config.activation = t.params.activation();
  t.config.hidden.assign(t.params.layer_sizes().begin() + 1, t.params.layer_sizes().end() - 1);
  if (t.problem->input_dim() == 2) t.config.collocation.counts = {32, 32};

  auto sidecar = weights_path;
  sidecar += ".json";
  std::ifstream in(sidecar);
  if (in) {
    json meta;
    try {
      in >> meta;
    } catch (const json::exception& e) {
      throw Error(ErrorKind::config, "malformed sidecar '" + sidecar.string() + "': " + e.what());
    }
    if (meta.value("problem", t.problem->id()) != t.problem->id())
      throw Error(ErrorKind::config, "weights were trained for problem '" + meta.value("problem", std::string()) + "'");
    t.config.epochs = meta.value("epochs", t.config.epochs);
    t.config.batch_size = meta.value("batch_size", t.config.batch_size);
    t.config.learning_rate = meta.value("learning_rate", t.config.learning_rate);
    t.config.seed = meta.value("seed", t.config.seed);
    if (meta.contains("collocation")) {
      t.config.collocation.counts = meta["collocation"].value("counts", t.config.collocation.counts);
      t.config.collocation.jitter = meta["collocation"].value("jitter", 0.0);
    }
    if (meta.contains("final_loss")) t.loss_history = {meta["final_loss"].get<double>()};
  }
  return t;
}

} // namespace eabp::train
