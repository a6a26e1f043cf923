// Process-level checks of the command line tool: exit codes, files on disk,
// determinism across worker counts. Takes the binary path as argv[1].
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

static int failures = 0;

static void expect(bool ok, const std::string& what) {
  if (!ok) {
    std::printf("FAIL: %s\n", what.c_str());
    ++failures;
  }
}

static int run(const std::string& command) {
  const int status = std::system(command.c_str());
  if (status == -1 || !WIFEXITED(status)) return -1;
  return WEXITSTATUS(status);
}

static std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

static void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

static int count_lines(const std::string& text) {
  int n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

int main(int argc, char** argv) {
  if (argc < 2) {
    std::printf("usage: cli_process <path-to-binary>\n");
    return 1;
  }
  const std::string bin = argv[1];
  const fs::path root =
      fs::temp_directory_path() / ("ringlaw_cli_proc_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  const auto in = [&](const std::string& name) { return (root / name).string(); };

  // --- configs ---------------------------------------------------------
  write_file(in("ok.json"),
             R"({"measure": {"type": "truncated", "mu": 0.5}, "grid": {"points": 21}})");
  write_file(in("bad_syntax.json"), "{momentum:");
  write_file(in("unknown_key.json"),
             R"({"measure": {"type": "truncated", "mu": 0.5}, "frobnicate": 1})");
  write_file(in("bad_measure_file.json"),
             R"({"measure": {"type": "file", "path": "/nonexistent/g.txt"}})");
  write_file(in("exact.json"),
             R"({"measure": {"type": "atoms", "atoms": [[0.3, 0.5], [0.9, 0.5]]},
                 "exact": {"N": 2}, "grid": {"points": 9}})");
  write_file(in("sample.json"),
             R"({"measure": {"type": "truncated", "mu": 0.5},
                 "sample": {"N": 8, "samples": 10, "seed": 99}})");
  write_file(in("compare.json"),
             R"({"measure": {"type": "truncated", "mu": 0.5}, "grid": {"points": 21},
                 "exact": {"N": 4}, "sample": {"N": 8, "samples": 8, "seed": 5}})");

  // --- exit codes ------------------------------------------------------
  expect(run(bin + " bounds --config " + in("ok.json") + " > " + in("bounds.out") +
             " 2> " + in("bounds.err")) == 0,
         "bounds on a valid config exits 0");
  expect(slurp(in("bounds.out")).find("r_outer") != std::string::npos,
         "bounds prints the annulus JSON");

  expect(run(bin + " --version > /dev/null 2>&1") == 0, "--version exits 0");
  expect(run(bin + " > /dev/null 2>&1") == 1, "missing subcommand exits 1");
  expect(run(bin + " orbit --config " + in("ok.json") + " > /dev/null 2>&1") == 1,
         "unknown subcommand exits 1");
  expect(run(bin + " bounds --config " + in("nope.json") + " > /dev/null 2>&1") == 1,
         "missing config file exits 1");
  expect(run(bin + " bounds --config " + in("bad_syntax.json") +
             " > /dev/null 2> " + in("syntax.err")) == 1,
         "config syntax error exits 1");
  expect(slurp(in("syntax.err")).find("validation error") != std::string::npos,
         "syntax failure is reported as a validation error");
  expect(run(bin + " bounds --config " + in("unknown_key.json") +
             " > /dev/null 2>&1") == 1,
         "unknown config key exits 1");

  const std::string broken_out = in("broken_out");
  expect(run(bin + " asymptotic --config " + in("bad_measure_file.json") +
             " --output " + broken_out + " > /dev/null 2> " + in("broken.err")) == 2,
         "unreadable measure file exits 2");
  expect(slurp(in("broken.err")).find("error") != std::string::npos,
         "numerical failure emits diagnostic JSON on stderr");
  expect(!fs::exists(broken_out) || fs::is_empty(broken_out),
         "failed run leaves no partial outputs");

  // --- asymptotic files ------------------------------------------------
  const std::string asym_out = in("asym_out");
  expect(run(bin + " asymptotic --config " + in("ok.json") + " --output " +
             asym_out + " > /dev/null 2>&1") == 0,
         "asymptotic exits 0");
  const std::string radial = slurp(fs::path(asym_out) / "radial_solution.csv");
  expect(radial.rfind("r,s,y,rho_s,nu_area\n", 0) == 0,
         "radial_solution.csv has the documented header");
  expect(count_lines(radial) == 22, "radial_solution.csv has 21 data rows");

  // --- exact files -----------------------------------------------------
  const std::string exact_out = in("exact_out");
  expect(run(bin + " exact --config " + in("exact.json") + " --output " +
             exact_out + " > /dev/null 2> " + in("exact.err")) == 0,
         "exact exits 0");
  expect(slurp(fs::path(exact_out) / "exact_density.csv").rfind("s,density\n", 0) == 0,
         "exact_density.csv has the documented header");
  expect(slurp(in("exact.err")).find("normalization") != std::string::npos,
         "exact reports the normalization on stderr");

  // --- sample determinism across worker counts -------------------------
  const std::string s1 = in("sample_out1"), s4 = in("sample_out4");
  expect(run(bin + " sample --config " + in("sample.json") + " --threads 1 " +
             "--output " + s1 + " > /dev/null 2>&1") == 0,
         "sample with one worker exits 0");
  expect(run(bin + " sample --config " + in("sample.json") + " --threads 4 " +
             "--output " + s4 + " > /dev/null 2>&1") == 0,
         "sample with four workers exits 0");
  const std::string m1 = slurp(fs::path(s1) / "moduli.csv");
  const std::string m4 = slurp(fs::path(s4) / "moduli.csv");
  expect(!m1.empty() && m1 == m4, "moduli.csv is bit-identical across worker counts");
  expect(slurp(fs::path(s1) / "moduli.provenance.json").find("\"seed\"") !=
             std::string::npos,
         "provenance sidecar is written");

  // --- compare ---------------------------------------------------------
  const std::string cmp_out = in("cmp_out");
  expect(run(bin + " compare --config " + in("compare.json") + " --output " +
             cmp_out + " > /dev/null 2>&1") == 0,
         "compare exits 0");
  const std::string report = slurp(fs::path(cmp_out) / "compare_report.json");
  expect(report.find("\"metrics\"") != std::string::npos,
         "compare_report.json contains the metrics block");
  expect(slurp(fs::path(cmp_out) / "compare_table.csv")
                 .rfind("r,s,y_asymptotic", 0) == 0,
         "compare_table.csv has the merged header");

  fs::remove_all(root);
  if (failures == 0) std::printf("cli_process: all checks passed\n");
  return failures == 0 ? 0 : 1;
}
