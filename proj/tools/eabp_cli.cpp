// Command-line front end: solve / list-problems / certify / train.

#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "eabp/bounds.hpp"
#include "eabp/error.hpp"
#include "eabp/harness.hpp"
#include "eabp/problems.hpp"
#include "eabp/train.hpp"

namespace {

using namespace eabp;

struct SolveArgs {
  std::string problem = "ode1.exp";
  std::string method = "error_aware_nlm";
  std::string preset = "paper";
  std::string profile = "paper";
  std::optional<std::size_t> det_epochs, vi_epochs, grid_points, posterior_samples;
  std::uint64_t seed = 0;
  std::string out = "out";
};

int run_solve(const SolveArgs& a) {
  harness::ExperimentConfig base;
  base.problem_id = a.problem;
  base.method = harness::parse_method(a.method);
  base.profile = harness::parse_profile(a.profile);
  base.seed = a.seed;
  base.out_dir = a.out;
  if (a.preset == "paper" || a.preset == "desk") problems::make_problem(a.problem); // validate early

  auto cells = harness::expand_preset(a.preset, base);
  for (auto& c : cells) {
    if (a.det_epochs) c.det_epochs = *a.det_epochs;
    if (a.vi_epochs) c.vi_epochs = *a.vi_epochs;
    if (a.grid_points) c.grid_points = *a.grid_points;
    if (a.posterior_samples) c.posterior_samples = *a.posterior_samples;
  }
  const auto reports = harness::run_cells(cells);
  for (const auto& r : reports) {
    harness::emit_outputs(r);
    const auto& m = r.metrics;
    std::printf("%-22s %-16s det=%-6zu max|err|=%.3e coverage train=%.3f extrap=%.3f width=%.3e -> %s\n",
                r.config.problem_id.c_str(), std::string(harness::to_string(r.config.method)).c_str(),
                r.config.det_epochs, m.max_abs_error_det, m.train.fraction, m.extrapolation.fraction,
                m.mean_band_width, (r.config.out_dir / harness::output_stem(r.config)).string().c_str());
  }
  return 0;
}

int run_list() {
  for (const auto& id : problems::problem_ids())
    std::printf("%-22s %s\n", id.c_str(), problems::make_problem(id)->description().c_str());
  return 0;
}

struct CertifyArgs {
  std::string weights;
  std::string problem;
  std::string out;
  std::size_t grid_points = 401;
  bounds::EnvelopeOptions envelope;
};

int run_certify(const CertifyArgs& a) {
  const auto problem = problems::make_problem(a.problem);
  const auto trained = train::load_trained(a.weights, problem);
  const auto* ode = dynamic_cast<const problems::OdeProblem*>(problem.get());
  std::vector<problems::Point> grid;
  std::optional<bounds::PseudoSigma> sigma;
  if (ode) {
    sigma = bounds::PseudoSigma::for_ode(trained, bounds::estimate_envelope(trained, a.envelope));
    const double lo = ode->x0(), hi = ode->spec().test_end;
    for (std::size_t i = 0; i < a.grid_points; ++i)
      grid.push_back({i + 1 == a.grid_points ? hi : lo + (hi - lo) * double(i) / double(a.grid_points - 1), 0.0});
  } else {
    sigma = bounds::PseudoSigma::for_burgers(trained);
    const auto box = problem->test_box();
    for (std::size_t i = 0; i < a.grid_points; ++i)
      for (std::size_t j = 0; j < 9; ++j)
        grid.push_back({box[0].lo + (box[0].hi - box[0].lo) * double(i) / double(a.grid_points - 1),
                        box[1].lo + (box[1].hi - box[1].lo) * double(j) / 8.0});
  }
  const auto profile = bounds::pseudo_profile(*sigma, grid);
  std::fprintf(stderr, "%s: kernel %s\n", a.problem.c_str(), std::string(bounds::to_string(profile.kind)).c_str());
  if (a.out.empty()) {
    bounds::write_profile_csv(profile, std::cout);
  } else {
    std::ofstream f(a.out);
    if (!f) throw Error(ErrorKind::io, "cannot open '" + a.out + "' for writing");
    bounds::write_profile_csv(profile, f);
    if (!f) throw Error(ErrorKind::io, "failed writing '" + a.out + "'");
  }
  return 0;
}

struct TrainArgs {
  std::string problem;
  std::string weights;
  std::size_t epochs = 10000;
  std::uint64_t seed = 0;
};

int run_train(const TrainArgs& a) {
  const auto problem = problems::make_problem(a.problem);
  const auto cfg = problem->input_dim() == 2 ? train::burgers_config(100, 100, a.epochs, a.seed)
                                             : train::ode_config(a.epochs, a.seed);
  const auto trained = train::train_deterministic(problem, cfg);
  train::save_trained(trained, a.weights);
  std::printf("%s: final mean squared residual %.6e -> %s\n", a.problem.c_str(), trained.final_loss(),
              a.weights.c_str());
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Error-aware Bayesian PINN solver for linear ODEs and Burgers' equation"};
  app.require_subcommand(1);

  SolveArgs solve;
  auto* s = app.add_subcommand("solve", "Train and run one experiment cell or a preset of cells");
  s->set_config("--config", "", "Flat key=value file mirroring the flags");
  s->add_option("--problem", solve.problem, "Problem id (see list-problems)");
  s->add_option("--method", solve.method, "deterministic | baseline_vi | error_aware_vi | error_aware_nlm");
  s->add_option("--preset", solve.preset, "paper | desk | fig1 | fig2 | fig4 | fig5 | burgers");
  s->add_option("--profile", solve.profile, "paper | desk budgets");
  s->add_option("--det-epochs", solve.det_epochs, "Deterministic training epochs");
  s->add_option("--vi-epochs", solve.vi_epochs, "Variational inference steps");
  s->add_option("--grid-points", solve.grid_points, "Evaluation grid size");
  s->add_option("--posterior-samples", solve.posterior_samples, "Posterior samples for the predictive band");
  s->add_option("--seed", solve.seed, "Random seed");
  s->add_option("--out", solve.out, "Output directory");

  auto* l = app.add_subcommand("list-problems", "List the built-in equations");

  CertifyArgs cert;
  auto* c = app.add_subcommand("certify", "Error bound of saved weights (no Bayesian step)");
  c->add_option("--weights", cert.weights, "Weights file")->required();
  c->add_option("--problem", cert.problem, "Problem id")->required();
  c->add_option("--out", cert.out, "CSV output path (default stdout)");
  c->add_option("--grid-points", cert.grid_points, "Evaluation grid size");
  c->add_option("--subintervals", cert.envelope.subintervals, "Envelope subintervals");
  c->add_option("--oversample", cert.envelope.oversample, "Residual samples per subinterval");
  c->add_option("--safety", cert.envelope.safety_factor, "Envelope safety factor");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a deterministic network and save its weights");
  t->add_option("--problem", tr.problem, "Problem id")->required();
  t->add_option("--weights", tr.weights, "Weights output path")->required();
  t->add_option("--epochs", tr.epochs, "Training epochs");
  t->add_option("--seed", tr.seed, "Random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (s->parsed()) return run_solve(solve);
    if (l->parsed()) return run_list();
    if (c->parsed()) return run_certify(cert);
    if (t->parsed()) return run_train(tr);
  } catch (const Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", std::string(to_string(e.kind())).c_str(), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
