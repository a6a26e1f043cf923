#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ringlaw/quadrature.hpp"
#include "ringlaw/roots.hpp"

namespace ringlaw {

using Eigen::ArrayXd;

inline constexpr double kAtomMergeTol = 1e-12;

/// Normalized atomic measure of the g values (the squared singular values
/// of the diagonal factor). Atoms are strictly increasing; weights are
/// positive and sum to 1.
class GSpectrum {
 public:
  GSpectrum(ArrayXd g, ArrayXd w) { init(std::move(g), std::move(w)); }

  GSpectrum(std::initializer_list<std::pair<double, double>> atoms)
      : GSpectrum(std::vector<std::pair<double, double>>(atoms)) {}

  explicit GSpectrum(const std::vector<std::pair<double, double>>& atoms) {
    ArrayXd g(atoms.size()), w(atoms.size());
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      g[i] = atoms[i].first;
      w[i] = atoms[i].second;
    }
    init(std::move(g), std::move(w));
  }

  const ArrayXd& g() const { return g_; }
  const ArrayXd& weights() const { return w_; }
  Eigen::Index size() const { return g_.size(); }

  double weight_at_zero() const { return g_[0] == 0.0 ? w_[0] : 0.0; }
  double g_max() const { return g_[g_.size() - 1]; }

 private:
  void init(ArrayXd g, ArrayXd w) {
    if (g.size() == 0 || g.size() != w.size())
      throw std::invalid_argument("GSpectrum: empty or mismatched atom lists");
    std::vector<Eigen::Index> order(g.size());
    for (Eigen::Index i = 0; i < g.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return g[a] < g[b]; });

    std::vector<double> gm, wm;
    for (Eigen::Index k : order) {
      const double gi = g[k], wi = w[k];
      if (!(gi >= 0.0 && gi <= 1.0) || !std::isfinite(gi)) {
        std::ostringstream msg;
        msg << "GSpectrum: g value " << gi << " outside [0, 1]";
        throw std::invalid_argument(msg.str());
      }
      if (!(wi > 0.0) || !std::isfinite(wi)) {
        std::ostringstream msg;
        msg << "GSpectrum: weight " << wi << " must be positive";
        throw std::invalid_argument(msg.str());
      }
      if (!gm.empty() && gi - gm.back() < kAtomMergeTol) {
        // merge to the weighted mean of the pair
        const double wt = wm.back() + wi;
        gm.back() = (gm.back() * wm.back() + gi * wi) / wt;
        wm.back() = wt;
      } else {
        gm.push_back(gi);
        wm.push_back(wi);
      }
    }
    if (gm.front() < kAtomMergeTol) gm.front() = 0.0;

    long double total = 0;
    for (double wi : wm) total += wi;
    g_.resize(static_cast<Eigen::Index>(gm.size()));
    w_.resize(static_cast<Eigen::Index>(wm.size()));
    for (std::size_t i = 0; i < gm.size(); ++i) {
      g_[static_cast<Eigen::Index>(i)] = gm[i];
      w_[static_cast<Eigen::Index>(i)] = static_cast<double>(wm[i] / total);
    }
  }

  ArrayXd g_;
  ArrayXd w_;
};

/// Configuration surface for the measures the library works with.
struct MeasureSpec {
  enum class Kind { truncated, atoms, uniform, file };
  Kind kind = Kind::truncated;
  double mu = 0.5;                                // truncated
  std::vector<std::pair<double, double>> atoms;   // atoms
  double a = 0.0, b = 1.0;                        // uniform
  int points = 64;                                // uniform
  std::string path;                               // file

  static MeasureSpec truncated(double mu) {
    MeasureSpec s;
    s.kind = Kind::truncated;
    s.mu = mu;
    return s;
  }
  static MeasureSpec from_atoms(std::vector<std::pair<double, double>> atoms) {
    MeasureSpec s;
    s.kind = Kind::atoms;
    s.atoms = std::move(atoms);
    return s;
  }
  static MeasureSpec uniform(double a, double b, int points) {
    MeasureSpec s;
    s.kind = Kind::uniform;
    s.a = a;
    s.b = b;
    s.points = points;
    return s;
  }
  static MeasureSpec from_file(std::string path) {
    MeasureSpec s;
    s.kind = Kind::file;
    s.path = std::move(path);
    return s;
  }

  /// Constraint violations, empty when the measure is well-formed. Never throws.
  std::vector<std::string> validate() const {
    std::vector<std::string> v;
    switch (kind) {
      case Kind::truncated:
        if (!(mu > 0.0 && mu < 1.0)) v.push_back("measure.mu must be in (0,1)");
        break;
      case Kind::atoms:
        if (atoms.empty()) v.push_back("measure.atoms must be non-empty");
        for (const auto& [g, w] : atoms) {
          if (!(g >= 0.0 && g <= 1.0))
            v.push_back("measure.atoms g values must be in [0,1]");
          if (!(w > 0.0)) v.push_back("measure.atoms weights must be positive");
        }
        break;
      case Kind::uniform:
        if (!(a >= 0.0 && a < b && b <= 1.0))
          v.push_back("measure.uniform requires 0 <= a < b <= 1");
        if (points < 1) v.push_back("measure.points must be >= 1");
        break;
      case Kind::file:
        if (path.empty()) v.push_back("measure.path must be non-empty");
        break;
    }
    return v;
  }

  std::string describe() const {
    std::ostringstream s;
    switch (kind) {
      case Kind::truncated: s << "truncated(mu=" << mu << ")"; break;
      case Kind::atoms: s << "atoms(" << atoms.size() << ")"; break;
      case Kind::uniform:
        s << "uniform(" << a << "," << b << "," << points << ")";
        break;
      case Kind::file: s << "file(" << path << ")"; break;
    }
    return s.str();
  }
};

/// Plain-text measure file: one g per line, '#' comments and blank lines
/// ignored, values validated to [0, 1], equal weights.
inline std::vector<double> read_measure_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open measure file: " + path);
  std::vector<double> gs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    std::istringstream ls(line);
    double g;
    std::string trailing;
    if (!(ls >> g) || (ls >> trailing))
      throw std::invalid_argument("measure file " + path + ": unparsable line " +
                                  std::to_string(lineno));
    if (!(g >= 0.0 && g <= 1.0))
      throw std::invalid_argument("measure file " + path + ": value outside [0,1] on line " +
                                  std::to_string(lineno));
    gs.push_back(g);
  }
  if (gs.empty()) throw std::invalid_argument("measure file " + path + ": no values");
  return gs;
}

/// Reduce a MeasureSpec to weighted atoms. Continuous inputs are replaced
/// by Gauss-Legendre nodes so that all transforms become finite sums.
inline GSpectrum discretize(const MeasureSpec& spec) {
  const auto violations = spec.validate();
  if (!violations.empty()) {
    std::ostringstream msg;
    msg << "discretize: malformed MeasureSpec:";
    for (const auto& v : violations) msg << " " << v << ";";
    throw std::invalid_argument(msg.str());
  }
  switch (spec.kind) {
    case MeasureSpec::Kind::truncated:
      return GSpectrum({{0.0, 1.0 - spec.mu}, {1.0, spec.mu}});
    case MeasureSpec::Kind::atoms:
      return GSpectrum(spec.atoms);
    case MeasureSpec::Kind::uniform: {
      const auto rule = gauss_legendre<double>(spec.points);
      ArrayXd g = spec.a + (spec.b - spec.a) * (rule.nodes + 1.0) / 2.0;
      ArrayXd w = rule.weights / 2.0;
      return GSpectrum(std::move(g), std::move(w));
    }
    case MeasureSpec::Kind::file: {
      const auto gs = read_measure_file(spec.path);
      ArrayXd g(static_cast<Eigen::Index>(gs.size()));
      for (std::size_t i = 0; i < gs.size(); ++i)
        g[static_cast<Eigen::Index>(i)] = gs[i];
      ArrayXd w = ArrayXd::Constant(g.size(), 1.0 / static_cast<double>(g.size()));
      return GSpectrum(std::move(g), std::move(w));
    }
  }
  throw std::logic_error("discretize: unreachable");
}

/// n-th moment of the g measure. Returns +infinity for negative n when the
/// measure has an atom at zero.
inline double moment(const GSpectrum& m, int n) {
  if (n < 0 && m.weight_at_zero() > 0.0)
    return std::numeric_limits<double>::infinity();
  if (n == 0) return m.weights().sum();
  return (m.weights() * m.g().pow(double(n))).sum();
}

namespace detail {

inline void check_psi_domain(const GSpectrum& m, double u, const char* who) {
  const double gmax = m.g_max();
  if (gmax > 0.0 && u * gmax >= 1.0) {
    std::ostringstream msg;
    msg << who << ": u=" << u << " at or beyond the pole 1/g_max=" << 1.0 / gmax;
    throw std::domain_error(msg.str());
  }
}

}  // namespace detail

/// Moment generating transform: sum of w * (u g)/(1 - u g) over the atoms.
/// Strictly increasing on u < 1/g_max whenever some weight sits on g > 0.
inline double psi(const GSpectrum& m, double u) {
  detail::check_psi_domain(m, u, "psi");
  return (m.weights() * (u * m.g()) / (1.0 - u * m.g())).sum();
}

inline double psi_prime(const GSpectrum& m, double u) {
  detail::check_psi_domain(m, u, "psi_prime");
  return (m.weights() * m.g() / (1.0 - u * m.g()).square()).sum();
}

/// Functional inverse of psi on its real branch: the unique u with
/// psi(u) = y. Bracketed by monotonicity, then bisection plus Newton polish.
inline double chi(const GSpectrum& m, double y) {
  if (y == 0.0) return 0.0;
  const double gmax = m.g_max();
  const double low_limit = -(1.0 - m.weight_at_zero());
  if (gmax == 0.0)
    throw std::domain_error("chi: measure concentrated at 0, psi is identically 0");
  if (y <= low_limit) {
    std::ostringstream msg;
    msg << "chi: y=" << y << " at or below the lower limit " << low_limit;
    throw std::domain_error(msg.str());
  }

  double lo = 0.0, hi = 0.0;
  if (y > 0.0) {
    // march toward the pole at 1/g_max until psi exceeds y
    const double pole = 1.0 / gmax;
    double prev = 0.0;
    bool found = false;
    for (int k = 1; k <= 60; ++k) {
      const double u = pole * (1.0 - std::ldexp(1.0, -k));
      if (psi(m, u) >= y) {
        lo = prev;
        hi = u;
        found = true;
        break;
      }
      prev = u;
    }
    if (!found)
      throw std::domain_error("chi: y not attainable below the pole (y too large)");
  } else {
    double prev = 0.0;
    bool found = false;
    for (double u = -1.0; u >= -1e18; u *= 2.0) {
      if (psi(m, u) <= y) {
        lo = u;
        hi = prev;
        found = true;
        break;
      }
      prev = u;
    }
    if (!found) {
      std::ostringstream msg;
      msg << "chi: y=" << y << " too close to the asymptote " << low_limit;
      throw std::domain_error(msg.str());
    }
  }
  return solve_bracketed([&](double u) { return psi(m, u) - y; },
                         [&](double u) { return psi_prime(m, u); }, lo, hi);
}

/// Multiplicative free-probability transform S(w) = ((w+1)/w) chi(w).
/// w = 0 is rejected; callers needing the limit sample at small w.
inline double s_transform(const GSpectrum& m, double w) {
  if (w == 0.0)
    throw std::domain_error("s_transform: w = 0 (removable singularity, evaluate nearby)");
  return (w + 1.0) / w * chi(m, w);
}

/// Radius at which the integrated radial density reaches y: S(y-1)^(-1/2).
inline double f_of_y(const GSpectrum& m, double y) {
  if (!(y > m.weight_at_zero() && y < 1.0)) {
    std::ostringstream msg;
    msg << "f_of_y: y=" << y << " outside (" << m.weight_at_zero() << ", 1)";
    throw std::domain_error(msg.str());
  }
  const double s = s_transform(m, y - 1.0);
  if (!(s > 0.0)) {
    std::ostringstream msg;
    msg << "f_of_y: S(y-1)=" << s << " not positive at y=" << y;
    throw std::domain_error(msg.str());
  }
  return 1.0 / std::sqrt(s);
}

/// Step quantile of the atomic measure: smallest atom whose cumulative
/// weight reaches p.
inline double quantile(const GSpectrum& m, double p) {
  if (p <= 0.0) return m.g()[0];
  long double cum = 0;
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    cum += m.weights()[i];
    if (static_cast<double>(cum) >= p) return m.g()[i];
  }
  return m.g_max();
}

/// Mid-quantile realization of the measure at size n. Atomic measures keep
/// exact atom values (ties allowed); the uniform spec uses its continuous
/// quantile directly.
inline std::vector<double> g_realization(const MeasureSpec& spec, int n) {
  if (n < 1) throw std::invalid_argument("g_realization: N must be >= 1");
  std::vector<double> g(static_cast<std::size_t>(n));
  if (spec.kind == MeasureSpec::Kind::uniform) {
    const auto v = spec.validate();
    if (!v.empty()) throw std::invalid_argument("g_realization: " + v.front());
    for (int i = 0; i < n; ++i)
      g[static_cast<std::size_t>(i)] = spec.a + (spec.b - spec.a) * (i + 0.5) / n;
    return g;
  }
  const GSpectrum m = discretize(spec);
  for (int i = 0; i < n; ++i)
    g[static_cast<std::size_t>(i)] = quantile(m, (i + 0.5) / n);
  return g;
}

}  // namespace ringlaw
