#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "ringlaw/asymptotic.hpp"
#include "ringlaw/measure.hpp"
#include "ringlaw/quadrature.hpp"

namespace ringlaw {

inline constexpr double kMinGap = 1e-9;

/// Finite list of strictly distinct g values in (0, 1], ascending, for the
/// exact finite-N density formula.
class ExactEnsemble {
 public:
  explicit ExactEnsemble(ArrayXd g) : g_(std::move(g)) {
    if (g_.size() == 0) throw std::invalid_argument("ExactEnsemble: empty g list");
    for (Eigen::Index i = 0; i < g_.size(); ++i) {
      if (!(g_[i] > 0.0 && g_[i] <= 1.0)) {
        std::ostringstream msg;
        msg << "ExactEnsemble: g[" << i << "]=" << g_[i] << " outside (0, 1]";
        throw std::invalid_argument(msg.str());
      }
      if (i > 0 && !(g_[i] - g_[i - 1] >= kMinGap)) {
        std::ostringstream msg;
        msg << "ExactEnsemble: gap g[" << i << "]-g[" << i - 1 << "]="
            << g_[i] - g_[i - 1] << " below " << kMinGap;
        throw std::invalid_argument(msg.str());
      }
    }
  }

  explicit ExactEnsemble(const std::vector<double>& g)
      : ExactEnsemble(Eigen::Map<const ArrayXd>(g.data(),
                                                static_cast<Eigen::Index>(g.size()))) {}

  const ArrayXd& g() const { return g_; }
  int size() const { return static_cast<int>(g_.size()); }

 private:
  ArrayXd g_;
};

/// Value carried as sign * exp(log_magnitude); sign 0 means exactly zero.
struct SignedLog {
  double log_magnitude = -std::numeric_limits<double>::infinity();
  int sign = 0;

  static SignedLog of(double x) {
    SignedLog s;
    if (x != 0.0) {
      s.sign = x > 0.0 ? 1 : -1;
      s.log_magnitude = std::log(std::abs(x));
    }
    return s;
  }
  SignedLog& operator*=(const SignedLog& o) {
    sign *= o.sign;
    log_magnitude += o.log_magnitude;
    return *this;
  }
  double value() const {
    return sign == 0 ? 0.0 : sign * std::exp(log_magnitude);
  }
};

struct QuadratureSpec {
  int panels = 8;
  int nodes_per_panel = 32;
  bool refine = true;

  std::vector<std::string> validate() const {
    std::vector<std::string> v;
    if (panels < 1) v.push_back("quad.panels must be >= 1");
    if (nodes_per_panel < 1) v.push_back("quad.nodes_per_panel must be >= 1");
    return v;
  }
};

struct KahanSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double x) {
    const double y = x - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

namespace detail {

// Composite Gauss-Legendre nodes on (0, 1) with log-weights.
struct UnitNodes {
  std::vector<double> u;
  std::vector<double> log_w;
};

inline UnitNodes unit_nodes(int panels, int nodes_per_panel) {
  const auto rule = gauss_legendre<double>(nodes_per_panel);
  UnitNodes out;
  out.u.reserve(static_cast<std::size_t>(panels) * nodes_per_panel);
  out.log_w.reserve(out.u.capacity());
  const double h = 1.0 / panels;
  for (int p = 0; p < panels; ++p) {
    const double mid = (p + 0.5) * h;
    for (int q = 0; q < nodes_per_panel; ++q) {
      out.u.push_back(mid + 0.5 * h * rule.nodes[q]);
      out.log_w.push_back(std::log(0.5 * h * rule.weights[q]));
    }
  }
  return out;
}

// Stable sum of signed exp-scale contributions: sum_k sign_k exp(log_k).
// Also reports the sum of magnitudes, the cancellation scale of the result.
struct SignedExpSum {
  double value = 0.0;
  double magnitude = 0.0;
};

inline SignedExpSum signed_exp_sum(const std::vector<double>& logs,
                                   const std::vector<int>& signs) {
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < logs.size(); ++k)
    if (signs[k] != 0 && logs[k] > peak) peak = logs[k];
  SignedExpSum out;
  if (std::isinf(peak)) return out;
  KahanSum acc, mag;
  for (std::size_t k = 0; k < logs.size(); ++k) {
    if (signs[k] == 0) continue;
    const double e = std::exp(logs[k] - peak);
    acc.add(signs[k] * e);
    mag.add(e);
  }
  const double scale = std::exp(peak);
  out.value = acc.sum * scale;
  out.magnitude = mag.sum * scale;
  return out;
}

// Prefactor of the i-th term: (g_i - s)^(N-2) / prod_{j != i} (g_i - g_j),
// accumulated in the log domain. Raw products overflow near N ~ 40.
inline SignedLog term_prefactor(const ArrayXd& g, int i, double s) {
  const int n = static_cast<int>(g.size());
  SignedLog pref;
  pref.sign = 1;
  pref.log_magnitude = (n - 2) * std::log(std::abs(g[i] - s));
  if ((n - 2) % 2 != 0 && g[i] < s) pref.sign = -1;
  for (int j = 0; j < n; ++j) {
    if (j == i) continue;
    const double d = g[i] - g[j];
    pref.log_magnitude -= std::log(std::abs(d));
    if (d < 0) pref.sign = -pref.sign;
  }
  return pref;
}

// One term of the exact density sum, t-integral mapped to u = 1/(1+t):
//   F_delta(g_i) = pref * N * int_0^1 u^N prod_{j!=i}(1 + (1-u) g_j/(u s))
//                  * [N - t + (g_i/s)(N t - 1)] du,  t = (1-u)/u.
// Every factor goes through the log domain; only the signed bracket stays
// linear (its sign can flip across the interval).
inline SignedExpSum f_delta_nodes(const ArrayXd& g, int i, double s,
                                  const UnitNodes& nodes) {
  const int n = static_cast<int>(g.size());
  const SignedLog pref = term_prefactor(g, i, s);
  std::vector<double> logs(nodes.u.size());
  std::vector<int> signs(nodes.u.size());
  const double log_n = std::log(double(n));
  for (std::size_t k = 0; k < nodes.u.size(); ++k) {
    const double u = nodes.u[k];
    const double t = (1.0 - u) / u;
    double lw = n * std::log(u);
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      lw += std::log1p(t * g[j] / s);
    }
    const double bracket = n - t + (g[i] / s) * (n * t - 1.0);
    if (bracket == 0.0) {
      signs[k] = 0;
      continue;
    }
    logs[k] = pref.log_magnitude + log_n + lw + nodes.log_w[k] +
              std::log(std::abs(bracket));
    signs[k] = pref.sign * (bracket > 0.0 ? 1 : -1);
  }
  return signed_exp_sum(logs, signs);
}

inline void check_off_poles(const ArrayXd& g, double s, const char* who) {
  for (Eigen::Index j = 0; j < g.size(); ++j) {
    if (std::abs(g[j] - s) <= 1e-12) {
      std::ostringstream msg;
      msg << who << ": s=" << s << " coincides with g[" << j << "]=" << g[j]
          << " (density is discontinuous there)";
      throw std::domain_error(msg.str());
    }
  }
}

inline void check_quad(const QuadratureSpec& quad, const char* who) {
  const auto v = quad.validate();
  if (!v.empty()) {
    std::ostringstream msg;
    msg << who << ": invalid QuadratureSpec:";
    for (const auto& s : v) msg << " " << s << ";";
    throw std::invalid_argument(msg.str());
  }
}

inline void check_converged(double coarse, double fine, double scale,
                            double s, const char* who) {
  const double diff = std::abs(coarse - fine);
  if (diff <= 1e-6 * std::max(std::abs(coarse), std::abs(fine))) return;
  if (diff <= 1e-12 * scale) return;  // cancellation floor of the signed sum
  std::ostringstream msg;
  msg << who << ": quadrature did not converge at s=" << s << " (coarse="
      << coarse << ", refined=" << fine << ", term scale=" << scale << ")";
  throw std::runtime_error(msg.str());
}

// The signed terms cancel down from `scale` to `value`; each carries ~1e-15
// relative rounding, so the absolute error of the result is ~1e-15 * scale.
// Once that wipes out every digit of an O(1) density the value is pure noise
// -- e.g. near-coincident g_i drive the Vandermonde prefactors to 1e20+ and
// no double-precision summation can recover the result.
inline void check_cancellation(double value, double scale, double s,
                               const char* who) {
  const double abs_err = 1e-15 * scale;
  if (abs_err <= 1e-2 * std::max(1.0, std::abs(value))) return;
  std::ostringstream msg;
  msg << who << ": cancellation beyond double precision at s=" << s
      << " (result=" << value << ", summed magnitude=" << scale
      << "); the g_i are too close together for this route";
  throw std::runtime_error(msg.str());
}

}  // namespace detail

/// One term F_delta(g_i) of the exact finite-N density, i zero-based.
inline double f_delta(const ExactEnsemble& e, int i, double s,
                      const QuadratureSpec& quad = {}) {
  detail::check_quad(quad, "f_delta");
  const int n = e.size();
  if (i < 0 || i >= n) throw std::invalid_argument("f_delta: index out of range");
  if (!(s > 0.0 && s < e.g()[n - 1]))
    throw std::domain_error("f_delta: s must lie in (0, g_max)");
  detail::check_off_poles(e.g(), s, "f_delta");
  const auto nodes = detail::unit_nodes(quad.panels, quad.nodes_per_panel);
  const auto coarse = detail::f_delta_nodes(e.g(), i, s, nodes);
  if (!quad.refine) {
    detail::check_cancellation(coarse.value, coarse.magnitude, s, "f_delta");
    return coarse.value;
  }
  const auto fine_nodes = detail::unit_nodes(quad.panels, 2 * quad.nodes_per_panel);
  const auto fine = detail::f_delta_nodes(e.g(), i, s, fine_nodes);
  detail::check_converged(coarse.value, fine.value,
                          std::max(coarse.magnitude, fine.magnitude), s, "f_delta");
  detail::check_cancellation(fine.value, fine.magnitude, s, "f_delta");
  return fine.value;
}

namespace detail {

// Both partial sums of the terms, split at s. Summed over *all* i the terms
// vanish identically: as a function of the atom position the i-th term is the
// residue of a rational expression with no pole at infinity, and the one
// remaining pole contributes -(N/s)(2u-1) to the u-integrand, which
// integrates to zero over [0,1]. Hence
//   density = (1/N) sum over g_i > s  =  -(1/N) sum over g_i < s,
// and whichever side has the smaller magnitude sum is the numerically
// trustworthy one: near the inner support edge the upper sum cancels across
// ~15 orders while the lower sum has a couple of tiny terms, and vice versa.
struct DensityForms {
  double upper = 0.0;        // (1/n) sum of terms with g_i > s
  double lower = 0.0;        // (1/n) sum of terms with g_i < s
  double upper_scale = 0.0;  // matching (1/n) sums of term magnitudes
  double lower_scale = 0.0;
};

// One sweep over the terms on one node grid. The product over j is shared
// across the i terms (per-node log-sum minus the i-th factor), which drops
// the cost from O(N^2) to O(N) per node. Each partial sum is combined by
// compensated summation in ascending i order.
inline DensityForms density_pass(const ArrayXd& g, double s,
                                 const UnitNodes& nodes) {
  const int n = static_cast<int>(g.size());
  const std::size_t nk = nodes.u.size();
  std::vector<double> shared(nk);
  std::vector<double> base(nk);
  std::vector<std::vector<double>> log1p_terms(static_cast<std::size_t>(n),
                                               std::vector<double>(nk));
  for (std::size_t k = 0; k < nk; ++k) {
    const double u = nodes.u[k];
    const double t = (1.0 - u) / u;
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
      const double lp = std::log1p(t * g[j] / s);
      log1p_terms[static_cast<std::size_t>(j)][k] = lp;
      sum += lp;
    }
    shared[k] = sum;
    base[k] = n * std::log(u) + nodes.log_w[k];
  }
  const double log_n = std::log(double(n));
  std::vector<double> logs(nk);
  std::vector<int> signs(nk);
  KahanSum up, lo;
  DensityForms out;
  for (int i = 0; i < n; ++i) {
    const SignedLog pref = term_prefactor(g, i, s);
    for (std::size_t k = 0; k < nk; ++k) {
      const double u = nodes.u[k];
      const double t = (1.0 - u) / u;
      const double bracket = n - t + (g[i] / s) * (n * t - 1.0);
      if (bracket == 0.0) {
        signs[k] = 0;
        continue;
      }
      logs[k] = pref.log_magnitude + log_n + base[k] + shared[k] -
                log1p_terms[static_cast<std::size_t>(i)][k] +
                std::log(std::abs(bracket));
      signs[k] = pref.sign * (bracket > 0.0 ? 1 : -1);
    }
    const auto term = signed_exp_sum(logs, signs);
    if (g[i] > s) {
      up.add(term.value / n);
      out.upper_scale += term.magnitude / n;
    } else {
      lo.add(term.value / n);
      out.lower_scale += term.magnitude / n;
    }
  }
  out.upper = up.sum;
  out.lower = lo.sum;
  return out;
}

}  // namespace detail

/// Exact finite-N mean density per unit squared modulus at s = |z|^2.
/// Piecewise smooth with jumps exactly at the g_i; zero outside [g_1, g_N].
/// Internally evaluates both equivalent partial-sum forms and returns the
/// better-conditioned one (see detail::DensityForms).
inline double exact_density(const ExactEnsemble& e, double s,
                            const QuadratureSpec& quad = {}) {
  detail::check_quad(quad, "exact_density");
  if (!(s > 0.0)) throw std::domain_error("exact_density: s must be positive");
  detail::check_off_poles(e.g(), s, "exact_density");
  const int n = e.size();
  if (s < e.g()[0] || s > e.g()[n - 1]) return 0.0;
  const auto nodes = detail::unit_nodes(quad.panels, quad.nodes_per_panel);
  const auto coarse = detail::density_pass(e.g(), s, nodes);
  if (!quad.refine) {
    const bool use_lower = coarse.lower_scale <= coarse.upper_scale;
    const double value = use_lower ? -coarse.lower : coarse.upper;
    const double scale = use_lower ? coarse.lower_scale : coarse.upper_scale;
    detail::check_cancellation(value, scale, s, "exact_density");
    if (value < -1e-6) {
      std::ostringstream msg;
      msg << "exact_density: negative density " << value << " at s=" << s
          << " beyond quadrature-noise scale";
      throw std::runtime_error(msg.str());
    }
    return value;
  }
  const auto fine_nodes = detail::unit_nodes(quad.panels, 2 * quad.nodes_per_panel);
  const auto fine = detail::density_pass(e.g(), s, fine_nodes);
  const bool use_lower = fine.lower_scale <= fine.upper_scale;
  const double cv = use_lower ? -coarse.lower : coarse.upper;
  const double fv = use_lower ? -fine.lower : fine.upper;
  const double scale = use_lower ? fine.lower_scale : fine.upper_scale;
  detail::check_converged(cv, fv, scale, s, "exact_density");
  detail::check_cancellation(fv, scale, s, "exact_density");
  if (fv < -1e-6) {
    std::ostringstream msg;
    msg << "exact_density: negative density " << fv << " at s=" << s
        << " beyond quadrature-noise scale";
    throw std::runtime_error(msg.str());
  }
  return fv;
}

/// Integral of the exact density over its support, evaluated piecewise
/// between consecutive g_i where the density is smooth. Should be 1.
inline double normalization_check(const ExactEnsemble& e,
                                  const QuadratureSpec& quad = {}) {
  detail::check_quad(quad, "normalization_check");
  KahanSum total;
  for (int k = 0; k + 1 < e.size(); ++k) {
    total.add(integrate_composite<double>(
        [&](double s) { return exact_density(e, s, quad); }, e.g()[k], e.g()[k + 1],
        quad.panels, quad.nodes_per_panel));
  }
  return total.sum;
}

/// Exact CDF (integral of the density from 0) at ascending target points.
inline std::vector<double> exact_cdf(const ExactEnsemble& e,
                                     const std::vector<double>& targets,
                                     const QuadratureSpec& quad = {}) {
  detail::check_quad(quad, "exact_cdf");
  for (std::size_t k = 1; k < targets.size(); ++k)
    if (!(targets[k] >= targets[k - 1]))
      throw std::invalid_argument("exact_cdf: targets must be ascending");

  const double g_lo = e.g()[0];
  const double g_hi = e.g()[e.size() - 1];
  // Event points: ensemble breakpoints plus clipped targets. The density is
  // integrated once over each elementary interval and accumulated.
  std::vector<double> events;
  for (int i = 0; i < e.size(); ++i) events.push_back(e.g()[i]);
  for (double t : targets)
    if (t > g_lo && t < g_hi) events.push_back(t);
  std::sort(events.begin(), events.end());
  events.erase(std::unique(events.begin(), events.end(),
                           [](double a, double b) { return std::abs(a - b) < 1e-15; }),
               events.end());

  std::vector<double> cum_at;  // cumulative integral at each event point
  cum_at.resize(events.size());
  KahanSum acc;
  cum_at[0] = 0.0;
  for (std::size_t k = 1; k < events.size(); ++k) {
    acc.add(integrate_composite<double>(
        [&](double s) { return exact_density(e, s, quad); }, events[k - 1],
        events[k], std::max(1, quad.panels / 4), quad.nodes_per_panel));
    cum_at[k] = acc.sum;
  }

  std::vector<double> out;
  out.reserve(targets.size());
  for (double t : targets) {
    if (t <= g_lo) {
      out.push_back(0.0);
      continue;
    }
    if (t >= g_hi) {
      out.push_back(cum_at.back());
      continue;
    }
    const auto it = std::lower_bound(events.begin(), events.end(), t - 1e-15);
    out.push_back(cum_at[static_cast<std::size_t>(it - events.begin())]);
  }
  return out;
}

/// Mid-quantile realization of a measure at finite N. Ties (atomic
/// measures) are spread over a 2e-6 band, shifted inside (0, 1] at the ends.
inline ExactEnsemble ensemble_from_measure(const GSpectrum& m, int n) {
  if (n < 1) throw std::invalid_argument("ensemble_from_measure: N must be >= 1");
  if (m.g_max() == 0.0)
    throw std::invalid_argument("ensemble_from_measure: measure entirely at 0");
  std::vector<double> raw(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    raw[static_cast<std::size_t>(i)] = quantile(m, (i + 0.5) / n);

  constexpr double delta = 1e-6;
  std::vector<double> out;
  out.reserve(raw.size());
  std::size_t lo = 0;
  while (lo < raw.size()) {
    std::size_t hi = lo + 1;
    while (hi < raw.size() && raw[hi] - raw[hi - 1] < kMinGap) ++hi;
    const std::size_t count = hi - lo;
    const double g = raw[lo];
    if (count == 1 && g > 0.0) {
      out.push_back(g);
    } else {
      const double width = 2.0 * delta;
      for (std::size_t j = 0; j < count; ++j) {
        double v;
        if (g - delta <= 0.0)
          v = (double(j) + 1.0) * width / double(count);  // (0, 2 delta]
        else if (g + delta >= 1.0)
          v = 1.0 - double(count - 1 - j) * width / double(count);  // [1-2 delta, 1]
        else
          v = g - delta + (double(j) + 0.5) * width / double(count);
        out.push_back(v);
      }
    }
    lo = hi;
  }
  return ExactEnsemble(out);
}

inline ExactEnsemble ensemble_from_measure(const MeasureSpec& spec, int n) {
  if (spec.kind == MeasureSpec::Kind::uniform)
    return ExactEnsemble(g_realization(spec, n));  // continuous quantiles
  return ensemble_from_measure(discretize(spec), n);
}

/// Sup distance between the exact finite-N CDF and the asymptotic y(s),
/// with the per-point table.
struct CdfCompareReport {
  ArrayXd r;
  ArrayXd s;
  ArrayXd cdf_exact;
  ArrayXd y_asymptotic;
  double sup_distance = 0.0;
};

inline CdfCompareReport exact_cdf_vs_asymptotic(const ExactEnsemble& e,
                                                const GSpectrum& m,
                                                const GridSpec& grid,
                                                const QuadratureSpec& quad = {}) {
  const auto violations = grid.validate();
  if (!violations.empty())
    throw std::invalid_argument("exact_cdf_vs_asymptotic: " + violations.front());
  const AnnulusBounds b = annulus(m);
  const double r_lo =
      grid.r_min.value_or(std::min(std::sqrt(e.g()[0]), b.r_inner));
  const double r_hi = grid.r_max.value_or(
      std::max(std::sqrt(e.g()[e.size() - 1]), b.r_outer));
  if (!(r_lo < r_hi))
    throw std::invalid_argument("exact_cdf_vs_asymptotic: empty radius range");

  const int n = grid.points;
  CdfCompareReport rep;
  rep.r.resize(n);
  rep.s.resize(n);
  rep.y_asymptotic.resize(n);
  std::vector<double> targets(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const double r = r_lo + (r_hi - r_lo) * k / (n - 1);
    rep.r[k] = r;
    rep.s[k] = r * r;
    targets[static_cast<std::size_t>(k)] = rep.s[k];
    rep.y_asymptotic[k] = solve_y_at(m, rep.s[k]).y;
  }
  const auto cdf = exact_cdf(e, targets, quad);
  rep.cdf_exact.resize(n);
  rep.sup_distance = 0.0;
  for (int k = 0; k < n; ++k) {
    rep.cdf_exact[k] = cdf[static_cast<std::size_t>(k)];
    rep.sup_distance =
        std::max(rep.sup_distance, std::abs(rep.cdf_exact[k] - rep.y_asymptotic[k]));
  }
  return rep;
}

/// Levy distance between the exact finite-N CDF and the asymptotic law.
/// The finite-N edge layers have height O(N^{-1/2}) but width O(N^{-1/2})
/// too, so this distance converges where the vertical sup saturates at the
/// layer height; it is the right gauge of weak convergence to the annulus
/// law. `points` controls the CDF sampling density (error ~ one cell's mass).
inline double levy_distance(const ExactEnsemble& e, const GSpectrum& m,
                            const QuadratureSpec& quad = {}, int points = 801) {
  if (points < 2) throw std::invalid_argument("levy_distance: points must be >= 2");
  const double r_hi = std::max(std::sqrt(e.g()[e.size() - 1]), annulus(m).r_outer) + 0.01;
  std::vector<double> targets(static_cast<std::size_t>(points));
  for (int k = 0; k < points; ++k) {
    const double r = r_hi * k / (points - 1);
    targets[static_cast<std::size_t>(k)] = r * r;
  }
  const auto cdf = exact_cdf(e, targets, quad);
  // densify by interpolation so the per-cell CDF increment, not the grid
  // spacing, bounds the step-approximation error
  std::vector<CdfJump> jumps;
  jumps.reserve(4 * static_cast<std::size_t>(points));
  for (int k = 0; k < points; ++k) {
    const double r = r_hi * k / (points - 1);
    jumps.push_back({r, cdf[static_cast<std::size_t>(k)], cdf[static_cast<std::size_t>(k)]});
    if (k + 1 < points) {
      const double r1 = r_hi * (k + 1) / (points - 1);
      const double f0 = cdf[static_cast<std::size_t>(k)];
      const double f1 = cdf[static_cast<std::size_t>(k + 1)];
      for (int q = 1; q <= 3; ++q) {
        const double t = q / 4.0;
        const double f = f0 * (1.0 - t) + f1 * t;
        jumps.push_back({r * (1.0 - t) + r1 * t, f, f});
      }
    }
  }
  return levy_distance(jumps, asymptotic_cdf(m, r_hi));
}

}  // namespace ringlaw
