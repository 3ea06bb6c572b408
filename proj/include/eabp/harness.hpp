#pragma once

// Experiment orchestration: train, build sigma_P, fit the Bayesian model,
// form the predictive band and score it against the exact solution.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "eabp/problems.hpp"
#include "eabp/train.hpp"
#include "eabp/vi.hpp"

namespace eabp::harness {

using problems::Point;

enum class Method { deterministic, baseline_vi, error_aware_vi, error_aware_nlm };
enum class Profile { paper, desk };

std::string_view to_string(Method m);
std::string_view to_string(Profile p);
Method parse_method(std::string_view name);
Profile parse_profile(std::string_view name);

struct ExperimentConfig {
  std::string problem_id = "ode1.exp";
  Method method = Method::error_aware_nlm;
  Profile profile = Profile::paper;
  std::size_t det_epochs = 10000;
  std::size_t vi_epochs = 50000;
  std::uint64_t seed = 0;
  std::size_t grid_points = 401;       // ODE evaluation grid on [x0, test_end]
  std::size_t posterior_samples = 1000;
  // sigma_P envelope
  std::size_t envelope_subintervals = 40;
  std::size_t envelope_oversample = 10;
  double envelope_safety = 1.1;
  // NLM prior search
  std::size_t prior_candidates = 100;
  std::size_t prior_grid_points = 200;
  // Burgers
  std::size_t burgers_nx = 100;
  std::size_t burgers_nt = 100;
  std::size_t burgers_grid_x = 101;
  std::size_t burgers_grid_t = 9;
  std::size_t burgers_time_samples = 64;
  std::filesystem::path out_dir = "out";

  // Flat key=value form, one pair per line, in a fixed order.
  std::string to_key_values() const;
};

// Applies the desk profile's reduced budgets in place.
void apply_desk_profile(ExperimentConfig& config);

// Cells of a named preset. "paper" and "desk" yield the single cell
// described by `base`; the figure presets expand over problems and methods.
std::vector<ExperimentConfig> expand_preset(std::string_view preset, const ExperimentConfig& base);
std::vector<std::string> preset_names();

struct ReportRow {
  Point p{};
  double u_true = 0.0;
  double u_det = 0.0;
  double mean = 0.0;
  double sd_total = 0.0;
  double sigma_p = 0.0; // pseudo-aleatoric sd in the band (0 unless error-aware)
  double bound = 0.0;   // sigma_P error bound at the point, for every method
  bool covered = false;
};

struct Coverage {
  double fraction = 0.0;
  double mean_width = 0.0;
  std::size_t points = 0;
};

// Fraction of points with |truth - mean| <= k sd and the mean of 2 k sd.
Coverage coverage_metrics(std::span<const double> mean, std::span<const double> sd, std::span<const double> truth,
                          double k = 3.0);
Coverage coverage_metrics(const vi::PredictiveBand& band, std::span<const double> truth, double k = 3.0);

struct Metrics {
  double max_abs_error_det = 0.0;
  double max_abs_error_mean = 0.0;
  double mean_band_width = 0.0;
  Coverage train;         // x in [x0, train_end]
  Coverage extrapolation; // x in [train_end, test_end]
  Coverage all;
  std::size_t bound_violations = 0; // points with |u_true - u_det| > bound
  double det_final_loss = 0.0;
};

struct ExperimentReport {
  ExperimentConfig config;
  bool space_time = false;
  std::vector<ReportRow> rows; // sorted by x (then t)
  Metrics metrics;
  std::string config_hash;
  nlohmann::json details; // method-specific diagnostics
  std::vector<double> elbo_trace;
  std::vector<double> elbo_monitor;
};

// Trains the deterministic network for config.det_epochs, then runs the method.
ExperimentReport run_experiment(const ExperimentConfig& config);
// Same, on already trained weights.
ExperimentReport run_experiment(const ExperimentConfig& config, const train::TrainedPINN& trained);

// Runs every cell (concurrently) and returns the reports in input order.
std::vector<ExperimentReport> run_cells(std::span<const ExperimentConfig> cells);

struct OutputOptions {
  bool band_file = true;
  bool elbo_trace = true;
};

std::string output_stem(const ExperimentConfig& config);
// <stem>.csv, <stem>.json, <stem>.band.dat (ODEs) and <stem>.elbo.csv (VI).
// Returns the paths written. Throws ErrorKind::io naming the path.
std::vector<std::filesystem::path> emit_outputs(const ExperimentReport& report, const OutputOptions& options = {});

void write_report_csv(const ExperimentReport& report, std::ostream& out);
void write_band_file(const ExperimentReport& report, std::ostream& out);
nlohmann::json report_json(const ExperimentReport& report);

// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(std::string_view data);

} // namespace eabp::harness
