#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "ringlaw/cli.hpp"

using namespace ringlaw;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  static int counter = 0;
  const auto p = fs::temp_directory_path() /
                 ("ringlaw_cli_test_" + tag + "_" + std::to_string(counter++));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int count_lines(const std::string& text) {
  int n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

bool any_violation_contains(const std::vector<std::string>& v, const std::string& what) {
  for (const auto& s : v)
    if (s.find(what) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST_CASE("parse_run_config accepts a full well-formed config") {
  const auto j = nlohmann::json::parse(R"({
    "measure": {"type": "truncated", "mu": 0.5},
    "grid": {"points": 51, "r_min": 0.0, "r_max": 0.75},
    "quad": {"panels": 4, "nodes_per_panel": 16, "refine": false},
    "sample": {"N": 8, "samples": 10, "seed": 42},
    "exact": {"N": 8},
    "threads": 2,
    "output": "out_dir"
  })");
  const ParsedConfig pc = parse_run_config(j);
  CHECK(pc.violations.empty());
  CHECK(pc.config.measure.kind == MeasureSpec::Kind::truncated);
  CHECK(pc.config.measure.mu == 0.5);
  CHECK(pc.config.grid.points == 51);
  CHECK(pc.config.grid.r_max.value() == 0.75);
  CHECK(pc.config.quad.panels == 4);
  CHECK(pc.config.quad.refine == false);
  REQUIRE(pc.config.sample.has_value());
  CHECK(pc.config.sample->n == 8);
  CHECK(pc.config.sample->seed == 42);
  REQUIRE(pc.config.exact_size.has_value());
  CHECK(*pc.config.exact_size == 8);
  CHECK(pc.config.threads == 2);
  CHECK(pc.config.output == "out_dir");
}

TEST_CASE("parse_run_config rejects unknown keys at every level") {
  const auto base = nlohmann::json::parse(
      R"({"measure": {"type": "truncated", "mu": 0.5}})");

  auto j = base;
  j["surprise"] = 1;
  CHECK(any_violation_contains(parse_run_config(j).violations, "unknown key: surprise"));

  j = base;
  j["measure"]["sigma"] = 1.0;
  CHECK(any_violation_contains(parse_run_config(j).violations, "measure.sigma"));

  j = base;
  j["grid"] = {{"points", 11}, {"spacing", 0.1}};
  CHECK(any_violation_contains(parse_run_config(j).violations, "grid.spacing"));

  j = base;
  j["quad"] = {{"panels", 4}, {"order", 3}};
  CHECK(any_violation_contains(parse_run_config(j).violations, "quad.order"));

  j = base;
  j["sample"] = {{"N", 4}, {"samples", 2}, {"temperature", 1.0}};
  CHECK(any_violation_contains(parse_run_config(j).violations, "sample.temperature"));

  j = base;
  j["exact"] = {{"N", 4}, {"mode", "fast"}};
  CHECK(any_violation_contains(parse_run_config(j).violations, "exact.mode"));
}

TEST_CASE("parse_run_config reports type and range problems") {
  auto pc = parse_run_config(nlohmann::json::array());
  CHECK(any_violation_contains(pc.violations, "object"));

  pc = parse_run_config(nlohmann::json::parse(R"({"measure": {"type": "warped"}})"));
  CHECK(any_violation_contains(pc.violations, "measure.type"));

  pc = parse_run_config(nlohmann::json::parse(
      R"({"measure": {"type": "truncated", "mu": "half"}})"));
  CHECK(any_violation_contains(pc.violations, "mu"));

  pc = parse_run_config(nlohmann::json::parse(
      R"({"measure": {"type": "truncated", "mu": 1.5}})"));
  CHECK(any_violation_contains(pc.violations, "mu must be in (0,1)"));

  pc = parse_run_config(nlohmann::json::parse(
      R"({"measure": {"type": "uniform", "a": 0.5, "b": 0.5}})"));
  CHECK(any_violation_contains(pc.violations, "a < b"));

  pc = parse_run_config(nlohmann::json::parse(
      R"({"measure": {"type": "truncated", "mu": 0.5}, "grid": {"points": 10.5}})"));
  CHECK(any_violation_contains(pc.violations, "integer"));

  pc = parse_run_config(nlohmann::json::parse(
      R"({"measure": {"type": "truncated", "mu": 0.5},
          "sample": {"N": 4, "samples": 2, "seed": -5}})"));
  CHECK(any_violation_contains(pc.violations, "seed"));

  pc = parse_run_config(nlohmann::json::parse(
      R"({"measure": {"type": "truncated", "mu": 0.5}, "threads": -1})"));
  CHECK(any_violation_contains(pc.violations, "threads"));

  pc = parse_run_config(nlohmann::json::parse(R"({"grid": {"points": 11}})"));
  CHECK(any_violation_contains(pc.violations, "measure"));
}

TEST_CASE("parse_run_config handles the atoms measure") {
  auto pc = parse_run_config(nlohmann::json::parse(
      R"({"measure": {"type": "atoms", "atoms": [[0.25, 0.5], [1.0, 0.5]]}})"));
  CHECK(pc.violations.empty());
  REQUIRE(pc.config.measure.atoms.size() == 2);
  CHECK(pc.config.measure.atoms[1].first == 1.0);

  pc = parse_run_config(nlohmann::json::parse(
      R"({"measure": {"type": "atoms", "atoms": [[0.25]]}})"));
  CHECK(any_violation_contains(pc.violations, "pairs"));

  pc = parse_run_config(nlohmann::json::parse(
      R"({"measure": {"type": "atoms", "atoms": 3}})"));
  CHECK(any_violation_contains(pc.violations, "atoms"));
}

TEST_CASE("validate_for_command checks command prerequisites") {
  RunConfig cfg;
  cfg.measure = MeasureSpec::truncated(0.5);
  CHECK(validate_for_command("bounds", cfg).empty());
  CHECK(validate_for_command("compare", cfg).empty());
  CHECK(any_violation_contains(validate_for_command("exact", cfg), "exact.N"));
  CHECK(any_violation_contains(validate_for_command("sample", cfg), "sample"));
  CHECK(any_violation_contains(validate_for_command("orbit", cfg), "unknown command"));
}

TEST_CASE("run_command bounds prints annulus JSON") {
  RunConfig cfg;
  cfg.measure = MeasureSpec::truncated(0.5);
  cfg.output = fresh_dir("bounds").string();
  std::ostringstream out, err;
  CHECK(run_command("bounds", cfg, out, err) == 0);
  const auto j = nlohmann::json::parse(out.str());
  CHECK(j["r_inner"] == 0.0);
  CHECK(double(j["r_outer"]) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
}

TEST_CASE("run_command asymptotic writes the radial table") {
  const auto dir = fresh_dir("asym");
  RunConfig cfg;
  cfg.measure = MeasureSpec::truncated(0.5);
  cfg.grid.points = 21;
  cfg.output = dir.string();
  std::ostringstream out, err;
  REQUIRE(run_command("asymptotic", cfg, out, err) == 0);
  const std::string csv = slurp(dir / "radial_solution.csv");
  CHECK(csv.rfind("r,s,y,rho_s,nu_area\n", 0) == 0);
  CHECK(count_lines(csv) == 22);
  fs::remove_all(dir);
}

TEST_CASE("run_command exact writes the density table") {
  const auto dir = fresh_dir("exact");
  RunConfig cfg;
  cfg.measure = MeasureSpec::from_atoms({{0.3, 0.5}, {0.9, 0.5}});
  cfg.exact_size = 2;
  cfg.grid.points = 9;
  cfg.output = dir.string();
  std::ostringstream out, err;
  REQUIRE(run_command("exact", cfg, out, err) == 0);
  const std::string csv = slurp(dir / "exact_density.csv");
  CHECK(csv.rfind("s,density\n", 0) == 0);
  CHECK(count_lines(csv) == 10);
  CHECK(err.str().find("normalization") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("run_command sample writes moduli and provenance") {
  const auto dir = fresh_dir("sample");
  RunConfig cfg;
  cfg.measure = MeasureSpec::truncated(0.5);
  SampleParams sp;
  sp.n = 4;
  sp.samples = 4;
  sp.seed = 9;
  cfg.sample = sp;
  cfg.threads = 1;
  cfg.output = dir.string();
  std::ostringstream out, err;
  REQUIRE(run_command("sample", cfg, out, err) == 0);
  const std::string csv = slurp(dir / "moduli.csv");
  CHECK(csv.rfind("modulus\n", 0) == 0);
  CHECK(count_lines(csv) == 17);
  const auto prov = nlohmann::json::parse(slurp(dir / "moduli.provenance.json"));
  CHECK(prov["seed"] == 9);
  CHECK(prov["N"] == 4);
  CHECK(prov["g"].size() == 4);
  CHECK(double(prov["zero_fraction"]) == 0.5);
  fs::remove_all(dir);
}

TEST_CASE("run_command compare merges all routes") {
  const auto dir = fresh_dir("compare");
  RunConfig cfg;
  cfg.measure = MeasureSpec::uniform(0.1, 0.9, 64);
  cfg.raw = nlohmann::json{{"measure", {{"type", "uniform"}, {"a", 0.1}, {"b", 0.9}}}};
  cfg.grid.points = 31;
  cfg.exact_size = 8;
  SampleParams sp;
  sp.n = 8;
  sp.samples = 10;
  sp.seed = 3;
  cfg.sample = sp;
  cfg.output = dir.string();
  std::ostringstream out, err;
  REQUIRE(run_command("compare", cfg, out, err) == 0);

  const auto rep = nlohmann::json::parse(slurp(dir / "compare_report.json"));
  CHECK(rep["tool"] == "ringlaw");
  CHECK(rep["version"] == RINGLAW_VERSION);
  CHECK(rep["config"]["measure"]["a"] == 0.1);
  CHECK(rep["routes"]["exact"] == "ok");
  CHECK(rep["routes"]["sample"] == "ok");
  const auto& metrics = rep["metrics"];
  CHECK(metrics.contains("saddle_identity_max_rel_error"));
  CHECK(metrics.contains("exact_normalization"));
  CHECK(metrics.contains("sup_cdf_distance_exact_vs_asymptotic"));
  CHECK(metrics.contains("levy_cdf_distance_exact_vs_asymptotic"));
  CHECK(metrics.contains("ks_empirical_vs_asymptotic"));
  CHECK(metrics.contains("levy_distance_empirical_vs_asymptotic"));
  CHECK(metrics.contains("zero_fraction"));
  CHECK(double(metrics["saddle_identity_max_rel_error"]) <= 1e-8);
  CHECK(double(metrics["exact_normalization"]) == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(double(metrics["levy_cdf_distance_exact_vs_asymptotic"]) <=
        double(metrics["sup_cdf_distance_exact_vs_asymptotic"]) + 1e-9);
  CHECK(double(metrics["zero_fraction"]) == 0.0);

  const std::string table = slurp(dir / "compare_table.csv");
  CHECK(table.rfind("r,s,y_asymptotic,rho_s,nu_area,y_exact,y_empirical\n", 0) == 0);
  CHECK(count_lines(table) == 32);
  fs::remove_all(dir);
}

TEST_CASE("run_command compare flags exact route lost to cancellation") {
  // a truncated measure discretizes to two tight atom clusters; for N=8 the
  // exact route's term cancellation exceeds double precision and the route
  // must be reported as skipped rather than returning noise
  const auto dir = fresh_dir("cancel");
  RunConfig cfg;
  cfg.measure = MeasureSpec::truncated(0.5);
  cfg.grid.points = 11;
  cfg.exact_size = 8;
  cfg.output = dir.string();
  std::ostringstream out, err;
  REQUIRE(run_command("compare", cfg, out, err) == 0);
  const auto rep = nlohmann::json::parse(slurp(dir / "compare_report.json"));
  const std::string exact_status = rep["routes"]["exact"];
  CHECK(exact_status.rfind("skipped", 0) == 0);
  CHECK(!rep["metrics"].contains("exact_normalization"));
  CHECK(!rep["metrics"].contains("sup_cdf_distance_exact_vs_asymptotic"));
  CHECK(!rep["metrics"].contains("levy_cdf_distance_exact_vs_asymptotic"));
  const std::string table = slurp(dir / "compare_table.csv");
  CHECK(table.rfind("r,s,y_asymptotic,rho_s,nu_area\n", 0) == 0);
  fs::remove_all(dir);
}

TEST_CASE("run_command compare degrades gracefully") {
  const auto dir = fresh_dir("degrade");
  RunConfig cfg;
  cfg.measure = MeasureSpec::from_atoms({{0.9, 1.0}});  // degenerate annulus
  cfg.grid.points = 11;
  cfg.exact_size = 1;
  cfg.output = dir.string();
  std::ostringstream out, err;
  REQUIRE(run_command("compare", cfg, out, err) == 0);
  const auto rep = nlohmann::json::parse(slurp(dir / "compare_report.json"));
  const std::string exact_status = rep["routes"]["exact"];
  CHECK(exact_status.rfind("skipped", 0) == 0);
  CHECK(!rep["metrics"].contains("sup_cdf_distance_exact_vs_asymptotic"));

  RunConfig big = cfg;
  big.exact_size = 4096;
  std::ostringstream out2, err2;
  REQUIRE(run_command("compare", big, out2, err2) == 0);
  const auto rep2 = nlohmann::json::parse(slurp(dir / "compare_report.json"));
  CHECK(rep2["routes"]["exact"] == "skipped: N too large");
  fs::remove_all(dir);
}

TEST_CASE("run_command maps failures to exit codes") {
  RunConfig cfg;
  cfg.measure = MeasureSpec::truncated(0.5);
  cfg.output = fresh_dir("codes").string();
  std::ostringstream out, err;
  CHECK(run_command("exact", cfg, out, err) == 1);  // missing exact.N
  CHECK(err.str().find("validation error") != std::string::npos);

  RunConfig broken;
  broken.measure = MeasureSpec::from_file("/nonexistent/g_values.txt");
  const auto dir = fresh_dir("broken");
  broken.output = dir.string();
  std::ostringstream out2, err2;
  CHECK(run_command("asymptotic", broken, out2, err2) == 2);
  const auto diag = nlohmann::json::parse(err2.str());
  CHECK(diag.contains("error"));
  CHECK(fs::is_empty(dir));  // failed runs leave no partial outputs
  fs::remove_all(dir);
}

TEST_CASE("fmt17 round-trips doubles exactly") {
  for (double x : {1.0 / 3.0, 0.1, 123456.789, 1e-300, -2.5e17}) {
    CHECK(std::stod(fmt17(x)) == x);
  }
}
