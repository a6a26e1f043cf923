#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "ringlaw/asymptotic.hpp"
#include "ringlaw/ensemble.hpp"
#include "ringlaw/exact_n.hpp"

namespace ringlaw {

/// 17 significant digits: round-trip safe for double.
inline std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline std::string radial_solution_csv(const RadialSolution& rs) {
  std::ostringstream out;
  out << "r,s,y,rho_s,nu_area\n";
  for (Eigen::Index k = 0; k < rs.r.size(); ++k)
    out << fmt17(rs.r[k]) << ',' << fmt17(rs.s[k]) << ',' << fmt17(rs.y[k]) << ','
        << fmt17(rs.rho_s[k]) << ',' << fmt17(rs.nu_area[k]) << '\n';
  return out.str();
}

inline std::string exact_density_csv(const std::vector<double>& s,
                                     const std::vector<double>& density) {
  if (s.size() != density.size())
    throw std::invalid_argument("exact_density_csv: column length mismatch");
  std::ostringstream out;
  out << "s,density\n";
  for (std::size_t k = 0; k < s.size(); ++k)
    out << fmt17(s[k]) << ',' << fmt17(density[k]) << '\n';
  return out.str();
}

inline std::string moduli_csv(const EigenSample& es) {
  std::ostringstream out;
  out << "modulus\n";
  for (double m : es.moduli) out << fmt17(m) << '\n';
  return out.str();
}

inline nlohmann::json provenance_json(const EigenSample& es,
                                      const std::string& g_source) {
  nlohmann::json j;
  j["seed"] = es.provenance.seed;
  j["N"] = es.provenance.n;
  j["samples"] = es.provenance.samples;
  j["g_source"] = g_source;
  j["g"] = es.provenance.g;
  j["zero_fraction"] = es.zero_fraction;
  j["failed_samples"] = es.failed_samples;
  return j;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace ringlaw
