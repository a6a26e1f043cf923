#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ringlaw/asymptotic.hpp"
#include "ringlaw/ensemble.hpp"
#include "ringlaw/exact_n.hpp"
#include "ringlaw/io.hpp"
#include "ringlaw/measure.hpp"
#include "ringlaw/version.hpp"

namespace ringlaw {

struct SampleParams {
  int n = 0;
  int samples = 0;
  std::uint64_t seed = 0;
};

struct RunConfig {
  MeasureSpec measure;
  GridSpec grid;
  QuadratureSpec quad;
  std::optional<SampleParams> sample;
  std::optional<int> exact_size;
  int threads = 0;
  std::string output = ".";
  nlohmann::json raw;  // config echo for provenance
};

struct ParsedConfig {
  RunConfig config;
  std::vector<std::string> violations;
};

namespace cli_detail {

inline void reject_unknown_keys(const nlohmann::json& obj,
                                const std::set<std::string>& allowed,
                                const std::string& where,
                                std::vector<std::string>& v) {
  for (const auto& item : obj.items())
    if (!allowed.count(item.key()))
      v.push_back("unknown key: " + where + item.key());
}

inline bool get_int(const nlohmann::json& obj, const char* key, int& dst,
                    const std::string& where, std::vector<std::string>& v) {
  if (!obj.contains(key)) return false;
  if (!obj[key].is_number_integer()) {
    v.push_back(where + key + " must be an integer");
    return false;
  }
  dst = obj[key].get<int>();
  return true;
}

inline bool get_double(const nlohmann::json& obj, const char* key, double& dst,
                       const std::string& where, std::vector<std::string>& v) {
  if (!obj.contains(key)) return false;
  if (!obj[key].is_number()) {
    v.push_back(where + key + " must be a number");
    return false;
  }
  dst = obj[key].get<double>();
  return true;
}

inline void parse_measure(const nlohmann::json& j, MeasureSpec& spec,
                          std::vector<std::string>& v) {
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
    v.push_back("measure.type (string) required");
    return;
  }
  const std::string type = j["type"].get<std::string>();
  if (type == "truncated") {
    reject_unknown_keys(j, {"type", "mu"}, "measure.", v);
    spec.kind = MeasureSpec::Kind::truncated;
    if (!get_double(j, "mu", spec.mu, "measure.", v))
      v.push_back("measure.mu required for truncated");
  } else if (type == "atoms") {
    reject_unknown_keys(j, {"type", "atoms"}, "measure.", v);
    spec.kind = MeasureSpec::Kind::atoms;
    spec.atoms.clear();
    if (!j.contains("atoms") || !j["atoms"].is_array()) {
      v.push_back("measure.atoms must be an array of [g, weight] pairs");
      return;
    }
    for (const auto& entry : j["atoms"]) {
      if (!entry.is_array() || entry.size() != 2 || !entry[0].is_number() ||
          !entry[1].is_number()) {
        v.push_back("measure.atoms entries must be [g, weight] number pairs");
        return;
      }
      spec.atoms.emplace_back(entry[0].get<double>(), entry[1].get<double>());
    }
  } else if (type == "uniform") {
    reject_unknown_keys(j, {"type", "a", "b", "points"}, "measure.", v);
    spec.kind = MeasureSpec::Kind::uniform;
    if (!get_double(j, "a", spec.a, "measure.", v))
      v.push_back("measure.a required for uniform");
    if (!get_double(j, "b", spec.b, "measure.", v))
      v.push_back("measure.b required for uniform");
    get_int(j, "points", spec.points, "measure.", v);
  } else if (type == "file") {
    reject_unknown_keys(j, {"type", "path"}, "measure.", v);
    spec.kind = MeasureSpec::Kind::file;
    if (!j.contains("path") || !j["path"].is_string())
      v.push_back("measure.path (string) required for file");
    else
      spec.path = j["path"].get<std::string>();
  } else {
    v.push_back("measure.type must be one of truncated|atoms|uniform|file");
    return;
  }
  for (auto& violation : spec.validate()) v.push_back(violation);
}

}  // namespace cli_detail

/// Parses and validates a run configuration. Never throws: every problem
/// becomes a violation naming the offending key and constraint.
inline ParsedConfig parse_run_config(const nlohmann::json& j) {
  using cli_detail::get_double;
  using cli_detail::get_int;
  using cli_detail::reject_unknown_keys;

  ParsedConfig pc;
  auto& v = pc.violations;
  auto& cfg = pc.config;
  cfg.raw = j;
  if (!j.is_object()) {
    v.push_back("config root must be a JSON object");
    return pc;
  }
  reject_unknown_keys(j, {"measure", "grid", "quad", "sample", "exact", "threads", "output"},
                      "", v);

  if (!j.contains("measure"))
    v.push_back("measure object required");
  else
    cli_detail::parse_measure(j["measure"], cfg.measure, v);

  if (j.contains("grid")) {
    const auto& g = j["grid"];
    if (!g.is_object()) {
      v.push_back("grid must be an object");
    } else {
      reject_unknown_keys(g, {"points", "r_min", "r_max"}, "grid.", v);
      get_int(g, "points", cfg.grid.points, "grid.", v);
      double val = 0.0;
      if (get_double(g, "r_min", val, "grid.", v)) cfg.grid.r_min = val;
      if (get_double(g, "r_max", val, "grid.", v)) cfg.grid.r_max = val;
      for (auto& violation : cfg.grid.validate()) v.push_back(violation);
    }
  }

  if (j.contains("quad")) {
    const auto& q = j["quad"];
    if (!q.is_object()) {
      v.push_back("quad must be an object");
    } else {
      reject_unknown_keys(q, {"panels", "nodes_per_panel", "refine"}, "quad.", v);
      get_int(q, "panels", cfg.quad.panels, "quad.", v);
      get_int(q, "nodes_per_panel", cfg.quad.nodes_per_panel, "quad.", v);
      if (q.contains("refine")) {
        if (!q["refine"].is_boolean())
          v.push_back("quad.refine must be a boolean");
        else
          cfg.quad.refine = q["refine"].get<bool>();
      }
      for (auto& violation : cfg.quad.validate()) v.push_back(violation);
    }
  }

  if (j.contains("sample")) {
    const auto& s = j["sample"];
    if (!s.is_object()) {
      v.push_back("sample must be an object");
    } else {
      reject_unknown_keys(s, {"N", "samples", "seed"}, "sample.", v);
      SampleParams sp;
      if (!get_int(s, "N", sp.n, "sample.", v)) v.push_back("sample.N required");
      if (!get_int(s, "samples", sp.samples, "sample.", v))
        v.push_back("sample.samples required");
      if (s.contains("seed")) {
        if (s["seed"].is_number_unsigned())
          sp.seed = s["seed"].get<std::uint64_t>();
        else if (s["seed"].is_number_integer() && s["seed"].get<std::int64_t>() >= 0)
          sp.seed = static_cast<std::uint64_t>(s["seed"].get<std::int64_t>());
        else
          v.push_back("sample.seed must be a nonnegative integer");
      }
      if (sp.n < 1) v.push_back("sample.N must be >= 1");
      if (sp.samples < 1) v.push_back("sample.samples must be >= 1");
      cfg.sample = sp;
    }
  }

  if (j.contains("exact")) {
    const auto& e = j["exact"];
    if (!e.is_object()) {
      v.push_back("exact must be an object");
    } else {
      reject_unknown_keys(e, {"N"}, "exact.", v);
      int n = 0;
      if (!get_int(e, "N", n, "exact.", v) || n < 1)
        v.push_back("exact.N must be an integer >= 1");
      else
        cfg.exact_size = n;
    }
  }

  if (j.contains("threads")) {
    if (!j["threads"].is_number_integer() || j["threads"].get<int>() < 0)
      v.push_back("threads must be an integer >= 0");
    else
      cfg.threads = j["threads"].get<int>();
  }
  if (j.contains("output")) {
    if (!j["output"].is_string() || j["output"].get<std::string>().empty())
      v.push_back("output must be a non-empty string");
    else
      cfg.output = j["output"].get<std::string>();
  }
  return pc;
}

/// Command-specific requirements on top of structural validation.
inline std::vector<std::string> validate_for_command(const std::string& command,
                                                     const RunConfig& cfg) {
  std::vector<std::string> v;
  static const std::set<std::string> known{"bounds", "asymptotic", "exact", "sample",
                                           "compare"};
  if (!known.count(command)) {
    v.push_back("unknown command: " + command);
    return v;
  }
  if (command == "exact" && !cfg.exact_size)
    v.push_back("exact.N required for the exact command");
  if (command == "sample" && !cfg.sample)
    v.push_back("sample block required for the sample command");
  if (command == "compare" && !cfg.exact_size && !cfg.sample) {
    // allowed: compare degrades to the asymptotic route only
  }
  return v;
}

namespace cli_detail {

// Collects files written by one command so a failed run leaves nothing behind.
class OutputDir {
 public:
  explicit OutputDir(const std::string& dir) : dir_(dir) {
    std::filesystem::create_directories(dir_);
  }
  std::string write(const std::string& name, const std::string& content) {
    const auto p = dir_ / name;
    write_text_file(p.string(), content);
    written_.push_back(p);
    return p.string();
  }
  void discard_all() {
    for (const auto& p : written_) {
      std::error_code ec;
      std::filesystem::remove(p, ec);
    }
    written_.clear();
  }

 private:
  std::filesystem::path dir_;
  std::vector<std::filesystem::path> written_;
};

inline const int kMaxExactSize = 64;  // log-domain path is validated up to here

struct CompareMetrics {
  std::optional<double> saddle_identity_max_rel_error;
  std::optional<double> exact_normalization;
  std::optional<double> sup_cdf_distance_exact_vs_asymptotic;
  std::optional<double> levy_cdf_distance_exact_vs_asymptotic;
  std::optional<double> ks_empirical_vs_asymptotic;
  std::optional<double> levy_distance_empirical_vs_asymptotic;
  std::optional<double> zero_fraction;
};

inline double saddle_max_rel_error(const GSpectrum& m, int points = 50) {
  const AnnulusBounds b = annulus(m);
  const double s_in = b.r_inner * b.r_inner;
  const double s_out = b.r_outer * b.r_outer;
  double worst = 0.0;
  for (int k = 0; k < points; ++k) {
    const double s = s_in + (s_out - s_in) * (k + 0.5) / points;
    const SaddleDiagnostics d = saddle_identity(m, s);
    worst = std::max(worst,
                     std::abs(d.density_lhs - d.density_rhs) / std::abs(d.density_rhs));
  }
  return worst;
}

}  // namespace cli_detail

/// Executes one CLI command. Returns the process exit status: 0 success,
/// 1 validation error, 2 numerical failure (diagnostic JSON on err).
/// Partial outputs are removed on failure.
inline int run_command(const std::string& command, const RunConfig& cfg,
                       std::ostream& out, std::ostream& err) {
  const auto violations = validate_for_command(command, cfg);
  if (!violations.empty()) {
    for (const auto& v : violations) err << "validation error: " << v << "\n";
    return 1;
  }

  cli_detail::OutputDir sink(cfg.output);
  try {
    const GSpectrum m = discretize(cfg.measure);

    if (command == "bounds") {
      const AnnulusBounds b = annulus(m);
      nlohmann::json j{{"r_inner", b.r_inner}, {"r_outer", b.r_outer}};
      out << j.dump(2) << "\n";
      return 0;
    }

    if (command == "asymptotic") {
      const RadialSolution rs = tabulate(m, cfg.grid);
      sink.write("radial_solution.csv", radial_solution_csv(rs));
      return 0;
    }

    if (command == "exact") {
      const ExactEnsemble e = ensemble_from_measure(cfg.measure, *cfg.exact_size);
      const double g_lo = e.g()[0];
      const double g_hi = e.g()[e.size() - 1];
      const double r_lo = cfg.grid.r_min.value_or(std::sqrt(g_lo));
      const double r_hi = cfg.grid.r_max.value_or(std::sqrt(g_hi));
      std::vector<double> s_col, d_col;
      for (int k = 0; k < cfg.grid.points; ++k) {
        const double r = r_lo + (r_hi - r_lo) * k / (cfg.grid.points - 1);
        double s = r * r;
        if (s <= 0.0) {
          s_col.push_back(s);
          d_col.push_back(0.0);
          continue;
        }
        // the density is discontinuous at the g_i; nudge grid collisions off
        for (int i = 0; i < e.size(); ++i)
          if (std::abs(s - e.g()[i]) <= 1e-12) s = e.g()[i] + 3e-12;
        s_col.push_back(s);
        d_col.push_back(exact_density(e, s, cfg.quad));
      }
      sink.write("exact_density.csv", exact_density_csv(s_col, d_col));
      err << "normalization: " << fmt17(normalization_check(e, cfg.quad)) << "\n";
      return 0;
    }

    if (command == "sample") {
      const SampleParams& sp = *cfg.sample;
      SampleConfig sc;
      sc.n = sp.n;
      sc.samples = sp.samples;
      sc.seed = sp.seed;
      sc.g = g_realization(cfg.measure, sp.n);
      const EigenSample es = sample_moduli(sc, cfg.threads);
      sink.write("moduli.csv", moduli_csv(es));
      sink.write("moduli.provenance.json",
                 provenance_json(es, cfg.measure.describe()).dump(2) + "\n");
      if (!es.failed_samples.empty())
        err << "warning: " << es.failed_samples.size()
            << " samples excluded (eigensolver failures)\n";
      return 0;
    }

    // compare: run every applicable route and merge
    const RadialSolution rs = tabulate(m, cfg.grid);
    cli_detail::CompareMetrics metrics;
    nlohmann::json routes;
    routes["asymptotic"] = "ok";

    const AnnulusBounds b = rs.bounds;
    if (b.r_outer - b.r_inner > 1e-9) {
      metrics.saddle_identity_max_rel_error = cli_detail::saddle_max_rel_error(m);
    } else {
      routes["asymptotic"] = "ok (degenerate annulus, saddle metric skipped)";
    }

    std::optional<ArrayXd> y_exact;
    if (cfg.exact_size) {
      if (*cfg.exact_size > cli_detail::kMaxExactSize) {
        routes["exact"] = "skipped: N too large";
      } else {
        try {
          const ExactEnsemble e = ensemble_from_measure(cfg.measure, *cfg.exact_size);
          GridSpec metric_grid;
          metric_grid.points = cfg.grid.points;
          const CdfCompareReport rep =
              exact_cdf_vs_asymptotic(e, m, metric_grid, cfg.quad);
          metrics.sup_cdf_distance_exact_vs_asymptotic = rep.sup_distance;
          metrics.levy_cdf_distance_exact_vs_asymptotic =
              levy_distance(e, m, cfg.quad);
          metrics.exact_normalization = normalization_check(e, cfg.quad);
          std::vector<double> targets(rs.s.data(), rs.s.data() + rs.s.size());
          const auto cdf = exact_cdf(e, targets, cfg.quad);
          ArrayXd col(rs.s.size());
          for (Eigen::Index k = 0; k < rs.s.size(); ++k)
            col[k] = cdf[static_cast<std::size_t>(k)];
          y_exact = std::move(col);
          routes["exact"] = "ok";
        } catch (const std::exception& e) {
          // infeasible for this measure/N (near-coincident g_i, quadrature
          // breakdown, ...): flag and continue with the remaining routes
          routes["exact"] = std::string("skipped: ") + e.what();
          metrics.sup_cdf_distance_exact_vs_asymptotic = std::nullopt;
          metrics.levy_cdf_distance_exact_vs_asymptotic = std::nullopt;
          metrics.exact_normalization = std::nullopt;
          y_exact.reset();
        }
      }
    }

    std::optional<ArrayXd> y_empirical;
    if (cfg.sample) {
      const SampleParams& sp = *cfg.sample;
      SampleConfig sc;
      sc.n = sp.n;
      sc.samples = sp.samples;
      sc.seed = sp.seed;
      sc.g = g_realization(cfg.measure, sp.n);
      const EigenSample es = sample_moduli(sc, cfg.threads);
      metrics.ks_empirical_vs_asymptotic = ks_distance(es, m);
      metrics.levy_distance_empirical_vs_asymptotic = levy_distance(es, m);
      metrics.zero_fraction = es.zero_fraction;
      ArrayXd col(rs.r.size());
      for (Eigen::Index k = 0; k < rs.r.size(); ++k)
        col[k] = empirical_cdf(es, rs.r[k]);
      y_empirical = std::move(col);
      routes["sample"] = es.failed_samples.empty()
                             ? "ok"
                             : "flagged: excluded eigensolver failures";
    }

    std::ostringstream csv;
    csv << "r,s,y_asymptotic,rho_s,nu_area";
    if (y_exact) csv << ",y_exact";
    if (y_empirical) csv << ",y_empirical";
    csv << "\n";
    for (Eigen::Index k = 0; k < rs.r.size(); ++k) {
      csv << fmt17(rs.r[k]) << ',' << fmt17(rs.s[k]) << ',' << fmt17(rs.y[k]) << ','
          << fmt17(rs.rho_s[k]) << ',' << fmt17(rs.nu_area[k]);
      if (y_exact) csv << ',' << fmt17((*y_exact)[k]);
      if (y_empirical) csv << ',' << fmt17((*y_empirical)[k]);
      csv << "\n";
    }
    sink.write("compare_table.csv", csv.str());

    nlohmann::json report;
    report["tool"] = "ringlaw";
    report["version"] = RINGLAW_VERSION;
    report["config"] = cfg.raw;
    report["annulus"] = {{"r_inner", b.r_inner}, {"r_outer", b.r_outer}};
    report["atom_at_zero"] = rs.atom_at_zero;
    report["routes"] = routes;
    nlohmann::json jm;
    const auto put = [&jm](const char* key, const std::optional<double>& v) {
      if (v) jm[key] = *v;
    };
    put("saddle_identity_max_rel_error", metrics.saddle_identity_max_rel_error);
    put("exact_normalization", metrics.exact_normalization);
    put("sup_cdf_distance_exact_vs_asymptotic",
        metrics.sup_cdf_distance_exact_vs_asymptotic);
    put("levy_cdf_distance_exact_vs_asymptotic",
        metrics.levy_cdf_distance_exact_vs_asymptotic);
    put("ks_empirical_vs_asymptotic", metrics.ks_empirical_vs_asymptotic);
    put("levy_distance_empirical_vs_asymptotic",
        metrics.levy_distance_empirical_vs_asymptotic);
    put("zero_fraction", metrics.zero_fraction);
    report["metrics"] = jm;
    report["table_csv"] = "compare_table.csv";
    sink.write("compare_report.json", report.dump(2) + "\n");
    return 0;
  } catch (const std::exception& e) {
    sink.discard_all();
    nlohmann::json diag{{"command", command}, {"error", e.what()}};
    err << diag.dump(2) << "\n";
    return 2;
  }
}

}  // namespace ringlaw
