#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ringlaw/cli.hpp"
#include "ringlaw/version.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Spectral density of sub-unitary random matrix ensembles: "
               "asymptotic, exact finite-N, and Monte Carlo routes"};
  app.set_version_flag("--version", RINGLAW_VERSION);
  app.require_subcommand(1);

  std::string config_path;
  std::string output_override;
  int threads_override = -1;

  const std::pair<const char*, const char*> commands[] = {
      {"bounds", "print the annulus bounds of the limiting density as JSON"},
      {"asymptotic", "tabulate the large-N radial solution (radial_solution.csv)"},
      {"exact", "tabulate the exact finite-N density (exact_density.csv)"},
      {"sample", "draw Monte Carlo eigenvalue moduli (moduli.csv + provenance)"},
      {"compare", "run all applicable routes and write a comparison report"},
  };
  for (const auto& [name, blurb] : commands) {
    auto* sub = app.add_subcommand(name, blurb);
    sub->add_option("--config", config_path, "JSON run configuration file")
        ->required();
    sub->add_option("--output", output_override,
                    "output directory (overrides the config)");
    sub->add_option("--threads", threads_override,
                    "worker threads, 0 = auto (overrides the config)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;  // pin all argument problems to the validation code
  }
  const std::string command = app.get_subcommands().front()->get_name();

  std::ifstream in(config_path);
  if (!in) {
    std::cerr << "validation error: cannot open config file: " << config_path
              << "\n";
    return 1;
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const std::exception& e) {
    std::cerr << "validation error: config is not valid JSON: " << e.what()
              << "\n";
    return 1;
  }

  auto parsed = ringlaw::parse_run_config(j);
  if (!output_override.empty()) parsed.config.output = output_override;
  if (threads_override >= 0) parsed.config.threads = threads_override;
  if (!parsed.violations.empty()) {
    for (const auto& v : parsed.violations)
      std::cerr << "validation error: " << v << "\n";
    return 1;
  }
  return ringlaw::run_command(command, parsed.config, std::cout, std::cerr);
}
