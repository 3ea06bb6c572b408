#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "eabp/error.hpp"
#include "eabp/harness.hpp"

using namespace eabp;
using namespace eabp::harness;

namespace {

ExperimentConfig tiny(std::string id, Method m) {
  ExperimentConfig c;
  c.problem_id = std::move(id);
  c.method = m;
  c.det_epochs = 20;
  c.vi_epochs = 10;
  c.grid_points = 21;
  c.posterior_samples = 8;
  c.prior_candidates = 5;
  c.prior_grid_points = 20;
  c.out_dir = std::filesystem::temp_directory_path() / "eabp_unit_harness";
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

} // namespace

TEST_CASE("coverage rule") {
  const std::vector<double> mean(10, 0.0), sd(10, 1.0), two(10, 2.0), four(10, 4.0);
  CHECK(coverage_metrics(mean, sd, two).fraction == 1.0);
  CHECK(coverage_metrics(mean, sd, four).fraction == 0.0);
  CHECK(coverage_metrics(mean, sd, two).mean_width == 6.0);
  CHECK(coverage_metrics(mean, sd, mean).fraction == 1.0);
  const std::vector<double> zero(3, 0.0), m3{1.0, 2.0, 3.0}, t3{1.0, 2.5, 3.0};
  CHECK(coverage_metrics(m3, zero, t3).fraction == doctest::Approx(2.0 / 3.0));
  CHECK_THROWS_AS(coverage_metrics(m3, sd, t3), Error);
  CHECK_THROWS_AS(coverage_metrics(m3, zero, t3, 0.0), Error);
}

TEST_CASE("FNV-1a reference vectors") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
  CHECK(fnv1a_hex("foobar") == "85944171f73967e8");
}

TEST_CASE("method and profile names round-trip") {
  for (auto m : {Method::deterministic, Method::baseline_vi, Method::error_aware_vi, Method::error_aware_nlm})
    CHECK(parse_method(to_string(m)) == m);
  CHECK(parse_profile("desk") == Profile::desk);
  CHECK_THROWS_AS(parse_method("bogus"), Error);
}

TEST_CASE("preset expansion") {
  ExperimentConfig base;
  CHECK(expand_preset("fig2", base).size() == 8);
  CHECK(expand_preset("fig4", base).size() == 8);
  CHECK(expand_preset("fig5", base).size() == 8);
  CHECK(expand_preset("fig1", base).size() == 4);
  const auto desk = expand_preset("desk", base);
  REQUIRE(desk.size() == 1);
  CHECK(desk[0].det_epochs == 2000);
  CHECK(desk[0].vi_epochs == 5000);
  CHECK(desk[0].grid_points == 201);
  ExperimentConfig b = base;
  b.problem_id = "burgers";
  const auto bd = expand_preset("desk", b);
  CHECK(bd[0].burgers_nx == 50);
  CHECK(bd[0].burgers_nt == 50);
  CHECK(bd[0].det_epochs == 2000);
  CHECK_THROWS_AS(expand_preset("nope", base), Error);
}

TEST_CASE("deterministic report: zero sd, sorted rows, CSV header, JSON round-trip") {
  const auto r = run_experiment(tiny("ode1.poly", Method::deterministic));
  REQUIRE(r.rows.size() == 21);
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    CHECK(r.rows[i].sd_total == 0.0);
    if (i) CHECK(r.rows[i].p[0] > r.rows[i - 1].p[0]);
  }
  CHECK(r.metrics.all.fraction >= 0.0);
  CHECK(r.metrics.all.fraction <= 1.0);
  std::ostringstream os;
  write_report_csv(r, os);
  CHECK(os.str().rfind("x,u_true,u_det,mean,sd_total,sigma_P,bound,covered_3sigma\n", 0) == 0);

  const auto j = report_json(r);
  const auto back = nlohmann::json::parse(j.dump());
  CHECK(back["metrics"] == j["metrics"]);
  CHECK(back["metrics"]["coverage_3sigma"]["all"]["fraction"].get<double>() == r.metrics.all.fraction);
  CHECK(back["provenance"]["config_hash"].get<std::string>() == r.config_hash);
}

TEST_CASE("bound column majorizes the deterministic error on first-order problems") {
  const auto r = run_experiment(tiny("ode1.cos", Method::error_aware_nlm));
  CHECK(r.metrics.bound_violations == 0);
  for (const auto& row : r.rows) CHECK(std::abs(row.u_true - row.u_det) <= row.bound);
}

TEST_CASE("fig2 preset writes eight band files and reruns byte-identically") {
  ExperimentConfig base = tiny("ode1.exp", Method::error_aware_nlm);
  auto cells = expand_preset("fig2", base);
  for (auto& c : cells) {
    const auto keep = c.problem_id;
    const auto m = c.method;
    c = tiny(keep, m);
  }
  std::filesystem::remove_all(base.out_dir);
  const auto reports = run_cells(cells);
  std::size_t bands = 0;
  for (const auto& r : reports)
    for (const auto& p : emit_outputs(r))
      if (p.string().ends_with(".band.dat")) ++bands;
  CHECK(bands == 8);
  const auto first = slurp(base.out_dir / (output_stem(cells[0]) + ".csv"));
  const auto again = run_experiment(cells[0]);
  std::ostringstream os;
  write_report_csv(again, os);
  CHECK(os.str() == first);
  std::filesystem::remove_all(base.out_dir);
}

TEST_CASE("errors carry the stage that raised them") {
  auto c = tiny("ode1.exp", Method::deterministic);
  c.det_epochs = 30;
  auto bad = c;
  bad.problem_id = "ode9.none";
  try {
    (void)run_experiment(bad);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
    CHECK(std::string(e.what()).rfind("setup: ", 0) == 0);
  }
  const auto t = train::train_deterministic(problems::make_problem("ode1.exp"), train::ode_config(5));
  auto other = c;
  other.problem_id = "ode1.cos";
  CHECK_THROWS_AS(run_experiment(other, t), Error);
}
