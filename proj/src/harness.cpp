#include "eabp/harness.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <boost/version.hpp>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "eabp/bounds.hpp"
#include "eabp/error.hpp"
#include "eabp/kernels.hpp"
#include "eabp/nlm.hpp"

namespace eabp::harness {

using json = nlohmann::json;

namespace {

constexpr std::string_view kVersion = "0.1.0";

template <class F>
auto staged(std::string_view stage, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw e.with_stage(stage);
  }
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  if (n < 2) throw Error(ErrorKind::config, "grids need at least two points");
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  v.back() = hi;
  return v;
}

const problems::OdeProblem* as_ode(const problems::Problem& p) { return dynamic_cast<const problems::OdeProblem*>(&p); }

bool is_first_order_ode(const problems::Problem& p) {
  const auto* ode = as_ode(p);
  return ode && ode->order() == 1;
}

} // namespace

std::string_view to_string(Method m) {
  switch (m) {
  case Method::deterministic: return "deterministic";
  case Method::baseline_vi: return "baseline_vi";
  case Method::error_aware_vi: return "error_aware_vi";
  case Method::error_aware_nlm: return "error_aware_nlm";
  }
  return "unknown";
}

std::string_view to_string(Profile p) { return p == Profile::desk ? "desk" : "paper"; }

Method parse_method(std::string_view name) {
  for (Method m : {Method::deterministic, Method::baseline_vi, Method::error_aware_vi, Method::error_aware_nlm})
    if (to_string(m) == name) return m;
  throw Error(ErrorKind::config, "unknown method '" + std::string(name) + "'");
}

Profile parse_profile(std::string_view name) {
  if (name == "paper") return Profile::paper;
  if (name == "desk") return Profile::desk;
  throw Error(ErrorKind::config, "unknown profile '" + std::string(name) + "'");
}

std::string ExperimentConfig::to_key_values() const {
  std::ostringstream o;
  o << std::setprecision(17);
  o << "problem=" << problem_id << '\n'
    << "method=" << to_string(method) << '\n'
    << "profile=" << to_string(profile) << '\n'
    << "det-epochs=" << det_epochs << '\n'
    << "vi-epochs=" << vi_epochs << '\n'
    << "seed=" << seed << '\n'
    << "grid-points=" << grid_points << '\n'
    << "posterior-samples=" << posterior_samples << '\n'
    << "envelope-subintervals=" << envelope_subintervals << '\n'
    << "envelope-oversample=" << envelope_oversample << '\n'
    << "envelope-safety=" << envelope_safety << '\n'
    << "prior-candidates=" << prior_candidates << '\n'
    << "prior-grid-points=" << prior_grid_points << '\n'
    << "burgers-nx=" << burgers_nx << '\n'
    << "burgers-nt=" << burgers_nt << '\n'
    << "burgers-grid-x=" << burgers_grid_x << '\n'
    << "burgers-grid-t=" << burgers_grid_t << '\n'
    << "burgers-time-samples=" << burgers_time_samples << '\n';
  return o.str();
}

void apply_desk_profile(ExperimentConfig& c) {
  c.profile = Profile::desk;
  if (c.problem_id == "burgers") {
    c.burgers_nx = 50;
    c.burgers_nt = 50;
    c.det_epochs = 2000;
    c.vi_epochs = 1000;
    c.posterior_samples = 200;
  } else {
    c.det_epochs = 2000;
    c.vi_epochs = 5000;
    c.grid_points = 201;
  }
}

namespace {

void apply_paper_budget(ExperimentConfig& c) {
  if (c.problem_id == "burgers") {
    c.burgers_nx = 100;
    c.burgers_nt = 100;
    c.det_epochs = 20000;
    c.vi_epochs = 20000;
  } else {
    c.det_epochs = 10000;
    c.vi_epochs = 50000;
    c.grid_points = 401;
  }
  c.posterior_samples = 1000;
}

std::vector<std::string> family(std::string_view prefix) {
  std::vector<std::string> out;
  for (const auto& id : problems::problem_ids())
    if (id.rfind(prefix, 0) == 0) out.push_back(id);
  return out;
}

} // namespace

std::vector<std::string> preset_names() { return {"paper", "desk", "fig1", "fig2", "fig4", "fig5", "burgers"}; }

std::vector<ExperimentConfig> expand_preset(std::string_view preset, const ExperimentConfig& base) {
  std::vector<std::pair<std::string, Method>> cells;
  if (preset == "paper" || preset == "desk") {
    cells.emplace_back(base.problem_id, base.method);
  } else if (preset == "fig1") {
    for (const auto& id : family("ode1.")) cells.emplace_back(id, Method::baseline_vi);
  } else if (preset == "fig2" || preset == "fig4" || preset == "fig5") {
    const std::string_view prefix = preset == "fig2" ? "ode1." : preset == "fig4" ? "ode2.harmonic." : "ode2.damped.";
    for (const auto& id : family(prefix)) {
      cells.emplace_back(id, Method::error_aware_nlm);
      cells.emplace_back(id, Method::error_aware_vi);
    }
  } else if (preset == "burgers") {
    cells.emplace_back("burgers", Method::baseline_vi);
    cells.emplace_back("burgers", Method::error_aware_vi);
  } else {
    throw Error(ErrorKind::config, "unknown preset '" + std::string(preset) + "'");
  }

  std::vector<ExperimentConfig> out;
  for (const auto& [id, method] : cells) {
    ExperimentConfig c = base;
    c.problem_id = id;
    c.method = method;
    apply_paper_budget(c);
    if (preset == "desk" || base.profile == Profile::desk) apply_desk_profile(c);
    out.push_back(std::move(c));
  }
  return out;
}

Coverage coverage_metrics(std::span<const double> mean, std::span<const double> sd, std::span<const double> truth,
                          double k) {
  if (mean.size() != sd.size() || mean.size() != truth.size())
    throw Error(ErrorKind::shape, "band and truth grids differ in length");
  if (!(k > 0.0)) throw Error(ErrorKind::config, "k must be positive");
  Coverage c;
  c.points = mean.size();
  if (mean.empty()) {
    c.fraction = std::numeric_limits<double>::quiet_NaN();
    c.mean_width = std::numeric_limits<double>::quiet_NaN();
    return c;
  }
  std::size_t hits = 0;
  double width = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    if (std::abs(truth[i] - mean[i]) <= k * sd[i]) ++hits;
    width += 2.0 * k * sd[i];
  }
  c.fraction = static_cast<double>(hits) / static_cast<double>(mean.size());
  c.mean_width = width / static_cast<double>(mean.size());
  return c;
}

Coverage coverage_metrics(const vi::PredictiveBand& band, std::span<const double> truth, double k) {
  std::vector<double> sd(band.total_var.size());
  for (std::size_t i = 0; i < sd.size(); ++i) sd[i] = std::sqrt(band.total_var[i]);
  return coverage_metrics(band.mean, sd, truth, k);
}

std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream o;
  o << std::hex << std::setw(16) << std::setfill('0') << h;
  return o.str();
}

namespace {

std::vector<Point> report_grid(const problems::Problem& problem, const ExperimentConfig& c) {
  std::vector<Point> g;
  if (problem.input_dim() == 1) {
    const auto box = problem.test_box();
    for (double x : linspace(box[0].lo, box[0].hi, c.grid_points)) g.push_back({x, 0.0});
  } else {
    const auto box = problem.test_box();
    const auto xs = linspace(box[0].lo, box[0].hi, c.burgers_grid_x);
    const auto ts = linspace(box[1].lo, box[1].hi, c.burgers_grid_t);
    for (double x : xs)
      for (double t : ts) g.push_back({x, t});
  }
  return g;
}

vi::ViConfig vi_config(const ExperimentConfig& c, const train::TrainedPINN& trained, vi::Likelihood likelihood) {
  vi::ViConfig v;
  v.prior_sigma = is_first_order_ode(*trained.problem) ? 0.1 : 1.0;
  v.epochs = c.vi_epochs;
  v.likelihood = likelihood;
  v.sigma_d = 1.0;
  v.n_posterior_samples = c.posterior_samples;
  v.seed = c.seed;
  v.learning_rate = trained.config.learning_rate;
  return v;
}

json vi_details(const vi::ViConfig& v, const vi::ViResult& r) {
  double mean_sigma = 0.0;
  for (std::size_t i = 0; i < r.posterior.size(); ++i) mean_sigma += r.posterior.sigma(i);
  mean_sigma /= static_cast<double>(std::max<std::size_t>(1, r.posterior.size()));
  return {
      {"likelihood", std::string(vi::to_string(v.likelihood))},
      {"prior_sigma", v.prior_sigma},
      {"epochs", v.epochs},
      {"learning_rate", v.learning_rate},
      {"posterior_samples", v.n_posterior_samples},
      {"final_elbo", r.elbo_trace.empty() ? 0.0 : r.elbo_trace.back()},
      {"final_elbo_monitor", r.monitor_trace.empty() ? 0.0 : r.monitor_trace.back()},
      {"mean_weight_sigma", mean_sigma},
  };
}

} // namespace

ExperimentReport run_experiment(const ExperimentConfig& config, const train::TrainedPINN& trained) {
  if (!trained.problem) throw Error(ErrorKind::config, "trained model has no problem attached");
  if (trained.problem->id() != config.problem_id)
    throw Error(ErrorKind::config, "trained model solves '" + trained.problem->id() + "', config asks for '" +
                                       config.problem_id + "'");
  const auto& problem = *trained.problem;
  const auto* ode = as_ode(problem);

  ExperimentReport rep;
  rep.config = config;
  rep.space_time = problem.input_dim() == 2;
  rep.config_hash = fnv1a_hex(config.to_key_values());

  const auto grid = report_grid(problem, config);
  const auto u_det = kernels::surrogate_values(problem, std::span<const nn::Network>(&trained.params, 1), grid);
  const auto collocation = trained.collocation_points();

  const auto sigma = staged("error bound", [&] {
    if (ode) {
      bounds::EnvelopeOptions opt{config.envelope_subintervals, config.envelope_oversample, config.envelope_safety};
      return bounds::PseudoSigma::for_ode(trained, bounds::estimate_envelope(trained, opt));
    }
    return bounds::PseudoSigma::for_burgers(trained, config.burgers_time_samples);
  });
  const auto bound = staged("error bound", [&] { return sigma.evaluate(grid); });

  std::vector<double> mean = u_det, sd(grid.size(), 0.0), sp_col(grid.size(), 0.0);
  json details = {{"bound_kind", std::string(bounds::to_string(sigma.kind()))},
                  {"det_epochs", trained.loss_history.size()},
                  {"det_final_loss", trained.final_loss()}};
  if (sigma.envelope()) details["envelope_epsilons"] = sigma.envelope()->epsilons;

  auto sample_band = [&](const vi::ViConfig& v, const vi::ViResult& r, bool error_aware) {
    const auto samples = vi::sample_posterior(r.posterior, v.n_posterior_samples, config.seed ^ 0x6a09e667f3bcc908ULL);
    const auto band = error_aware ? vi::predictive_moments(samples, problem, grid, std::span<const double>(bound))
                                  : vi::predictive_moments(samples, problem, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      mean[i] = band.mean[i];
      sd[i] = std::sqrt(band.total_var[i]);
      sp_col[i] = error_aware ? bound[i] : 0.0;
    }
    rep.elbo_trace = r.elbo_trace;
    rep.elbo_monitor = r.monitor_trace;
    details["vi"] = vi_details(v, r);
  };

  switch (config.method) {
  case Method::deterministic: break;
  case Method::baseline_vi: {
    const auto v = vi_config(config, trained, vi::Likelihood::baseline_residual);
    const auto r = staged("variational inference", [&] { return vi::train_vi(trained, v); });
    sample_band(v, r, false);
    break;
  }
  case Method::error_aware_vi: {
    const auto v = vi_config(config, trained, vi::Likelihood::error_aware_simulated);
    const auto sp = staged("error bound", [&] { return sigma.evaluate(collocation); });
    const auto r = staged("variational inference", [&] { return vi::train_vi(trained, v, std::span<const double>(sp)); });
    sample_band(v, r, true);
    break;
  }
  case Method::error_aware_nlm: {
    staged("neural linear model", [&] {
      const auto sp = sigma.evaluate(collocation);
      const Eigen::MatrixXd phi = nlm::feature_matrix(trained, collocation);
      const auto data = nlm::simulated_dataset(trained, collocation, sp);

      std::vector<Point> pg;
      if (ode) {
        for (double x : linspace(ode->x0(), ode->spec().test_end, config.prior_grid_points)) pg.push_back({x, 0.0});
      } else {
        pg = grid;
      }
      const auto pg_sigma = sigma.evaluate(pg);
      std::vector<Point> pg_finite;
      std::vector<double> pg_sigma_finite;
      for (std::size_t i = 0; i < pg.size(); ++i)
        if (std::isfinite(pg_sigma[i])) {
          pg_finite.push_back(pg[i]);
          pg_sigma_finite.push_back(pg_sigma[i]);
        }
      const auto eval = nlm::make_eval_grid(trained, pg_finite, pg_sigma_finite);
      const auto candidates = config.prior_candidates == 100 ? nlm::default_prior_candidates()
                                                              : linspace(0.1, 1.0, config.prior_candidates);
      const auto search = nlm::optimize_prior(phi, data, eval, candidates);

      const Eigen::MatrixXd grid_phi = nlm::feature_matrix(trained, grid);
      for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto pr = nlm::nlm_predict(search.posterior, grid_phi.row(static_cast<Eigen::Index>(i)).transpose(),
                                         bound[i], problem.offset(grid[i]).value(), problem.mask(grid[i]).value());
        mean[i] = pr.mean;
        sd[i] = std::sqrt(pr.variance);
        sp_col[i] = bound[i];
      }
      details["nlm"] = {{"prior_sigma", search.prior_sigma},
                        {"objective", search.objective},
                        {"violations", search.violations},
                        {"flagged", search.flagged},
                        {"candidates_scanned", search.candidates.size()},
                        {"posterior", nlm::posterior_to_json(search.posterior, search.flagged)}};
      return 0;
    });
    break;
  }
  }

  rep.rows.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    auto& r = rep.rows[i];
    r.p = grid[i];
    r.u_true = ode ? problems::analytic_solution(config.problem_id, grid[i][0]) : std::numeric_limits<double>::quiet_NaN();
    r.u_det = u_det[i];
    r.mean = mean[i];
    r.sd_total = sd[i];
    r.sigma_p = sp_col[i];
    r.bound = bound[i];
    r.covered = std::abs(r.u_true - r.mean) <= 3.0 * r.sd_total;
  }

  // Scalar metrics over points where the exact solution exists.
  auto& m = rep.metrics;
  m.det_final_loss = trained.final_loss();
  const double train_end = ode ? ode->spec().train_end : problem.train_box()[1].hi;
  std::vector<double> am, asd, at, tm, tsd, tt, em, esd, et;
  double width = 0.0;
  std::size_t width_n = 0;
  for (const auto& r : rep.rows) {
    if (std::isfinite(r.sd_total)) {
      width += 6.0 * r.sd_total;
      ++width_n;
    }
    if (!std::isfinite(r.u_true)) continue;
    m.max_abs_error_det = std::max(m.max_abs_error_det, std::abs(r.u_true - r.u_det));
    m.max_abs_error_mean = std::max(m.max_abs_error_mean, std::abs(r.u_true - r.mean));
    if (std::abs(r.u_true - r.u_det) > r.bound) ++m.bound_violations;
    am.push_back(r.mean), asd.push_back(r.sd_total), at.push_back(r.u_true);
    const double x = rep.space_time ? r.p[1] : r.p[0];
    if (x <= train_end) tm.push_back(r.mean), tsd.push_back(r.sd_total), tt.push_back(r.u_true);
    if (x >= train_end) em.push_back(r.mean), esd.push_back(r.sd_total), et.push_back(r.u_true);
  }
  m.mean_band_width = width_n ? width / static_cast<double>(width_n) : 0.0;
  m.all = coverage_metrics(am, asd, at);
  m.train = coverage_metrics(tm, tsd, tt);
  m.extrapolation = coverage_metrics(em, esd, et);
  rep.details = std::move(details);
  return rep;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
  const auto problem = staged("setup", [&] { return problems::make_problem(config.problem_id); });
  train::TrainConfig tc = problem->input_dim() == 2
                              ? train::burgers_config(config.burgers_nx, config.burgers_nt, config.det_epochs, config.seed)
                              : train::ode_config(config.det_epochs, config.seed);
  const auto trained = staged("deterministic training", [&] { return train::train_deterministic(problem, tc); });
  return run_experiment(config, trained);
}

std::vector<ExperimentReport> run_cells(std::span<const ExperimentConfig> cells) {
  std::vector<ExperimentReport> out(cells.size());
  kernels::parallel_for(cells.size(), [&](std::size_t i) { out[i] = run_experiment(cells[i]); });
  return out;
}

std::string output_stem(const ExperimentConfig& c) {
  return c.problem_id + "_" + std::string(to_string(c.method)) + "_det" + std::to_string(c.det_epochs);
}

void write_report_csv(const ExperimentReport& report, std::ostream& out) {
  out << (report.space_time ? "x,t," : "x,") << "u_true,u_det,mean,sd_total,sigma_P,bound,covered_3sigma\n";
  const auto old = out.precision(17);
  for (const auto& r : report.rows) {
    out << r.p[0] << ',';
    if (report.space_time) out << r.p[1] << ',';
    out << r.u_true << ',' << r.u_det << ',' << r.mean << ',' << r.sd_total << ',' << r.sigma_p << ',' << r.bound << ','
        << (r.covered ? 1 : 0) << '\n';
  }
  out.precision(old);
}

void write_band_file(const ExperimentReport& report, std::ostream& out) {
  out << "# x mean mean-3sd mean+3sd truth\n";
  const auto old = out.precision(17);
  for (const auto& r : report.rows) {
    if (report.space_time) continue;
    out << r.p[0] << ' ' << r.mean << ' ' << r.mean - 3.0 * r.sd_total << ' ' << r.mean + 3.0 * r.sd_total << ' '
        << r.u_true << '\n';
  }
  out.precision(old);
}

namespace {

json coverage_json(const Coverage& c) {
  return {{"fraction", c.fraction}, {"mean_width", c.mean_width}, {"points", c.points}};
}

} // namespace

json report_json(const ExperimentReport& report) {
  const auto& c = report.config;
  const auto& m = report.metrics;
  return {
      {"problem", c.problem_id},
      {"method", std::string(to_string(c.method))},
      {"profile", std::string(to_string(c.profile))},
      {"det_epochs", c.det_epochs},
      {"vi_epochs", c.vi_epochs},
      {"seed", c.seed},
      {"grid_points", report.rows.size()},
      {"metrics",
       {{"max_abs_error_det", m.max_abs_error_det},
        {"max_abs_error_mean", m.max_abs_error_mean},
        {"mean_band_width", m.mean_band_width},
        {"coverage_3sigma",
         {{"train", coverage_json(m.train)},
          {"extrapolation", coverage_json(m.extrapolation)},
          {"all", coverage_json(m.all)}}},
        {"bound_violations", m.bound_violations},
        {"det_final_loss", m.det_final_loss}}},
      {"details", report.details},
      {"provenance",
       {{"config_hash", report.config_hash},
        {"config", c.to_key_values()},
        {"version", std::string(kVersion)},
        {"compiler", std::string(__VERSION__)},
        {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION)},
        {"boost", std::string(BOOST_LIB_VERSION)}}},
  };
}

namespace {

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p);
  if (!f) throw Error(ErrorKind::io, "cannot open '" + p.string() + "' for writing");
  return f;
}

void check_written(std::ofstream& f, const std::filesystem::path& p) {
  f.flush();
  if (!f) throw Error(ErrorKind::io, "failed writing '" + p.string() + "'");
}

} // namespace

std::vector<std::filesystem::path> emit_outputs(const ExperimentReport& report, const OutputOptions& options) {
  const auto& dir = report.config.out_dir;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create output directory '" + dir.string() + "': " + ec.message());
  const std::string stem = output_stem(report.config);
  std::vector<std::filesystem::path> written;

  auto emit = [&](const std::string& suffix, auto&& body) {
    const auto p = dir / (stem + suffix);
    auto f = open_out(p);
    body(f);
    check_written(f, p);
    written.push_back(p);
  };
  emit(".csv", [&](std::ostream& o) { write_report_csv(report, o); });
  emit(".json", [&](std::ostream& o) { o << report_json(report).dump(2) << '\n'; });
  if (options.band_file && !report.space_time) emit(".band.dat", [&](std::ostream& o) { write_band_file(report, o); });
  if (options.elbo_trace && !report.elbo_trace.empty()) {
    emit(".elbo.csv", [&](std::ostream& o) {
      o << "step,elbo,elbo_monitor\n" << std::setprecision(17);
      for (std::size_t i = 0; i < report.elbo_trace.size(); ++i) {
        o << i << ',' << report.elbo_trace[i] << ',';
        if (i < report.elbo_monitor.size()) o << report.elbo_monitor[i];
        o << '\n';
      }
    });
  }
  return written;
}

} // namespace eabp::harness
