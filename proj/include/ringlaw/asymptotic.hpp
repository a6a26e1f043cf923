#pragma once

#include <Eigen/Core>

#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "ringlaw/measure.hpp"
#include "ringlaw/roots.hpp"

namespace ringlaw {

/// Support of the limiting eigenvalue density: a centered annulus with
/// radii fixed by the first and minus-first moments of the g measure.
struct AnnulusBounds {
  double r_inner = 0.0;
  double r_outer = 0.0;
};

inline AnnulusBounds annulus(const GSpectrum& m) {
  AnnulusBounds b;
  b.r_outer = std::sqrt(moment(m, 1));
  const double inv = moment(m, -1);
  b.r_inner = std::isinf(inv) ? 0.0 : 1.0 / std::sqrt(inv);
  return b;
}

struct GridSpec {
  int points = 101;
  std::optional<double> r_min;
  std::optional<double> r_max;

  std::vector<std::string> validate() const {
    std::vector<std::string> v;
    if (points < 2) v.push_back("grid.points must be >= 2");
    if (r_min && *r_min < 0.0) v.push_back("grid.r_min must be >= 0");
    if (r_min && r_max && !(*r_min < *r_max)) v.push_back("grid.r_min < grid.r_max required");
    return v;
  }
};

struct YSolve {
  double y = 0.0;
  bool boundary = false;  // query fell outside the open annulus, y is clamped
};

/// Integrated radial density y(s), s = r^2: the fraction of eigenvalues with
/// squared modulus <= s, atom at the origin included. Inside the open
/// annulus y solves psi((y-1)/(y s)) = y - 1; outside it clamps to the
/// boundary values.
inline YSolve solve_y_at(const GSpectrum& m, double s) {
  // clamp against the moments themselves, not the rounded radii squared;
  // within ~1e-12 of an edge the root is closer to 0 or 1 than the solver
  // can resolve, so treat that sliver as boundary too
  const double s_out = moment(m, 1);
  const double inv = moment(m, -1);
  const double s_in = std::isinf(inv) ? 0.0 : 1.0 / inv;
  const double edge = 1e-12;
  if (s <= s_in + edge * std::max(1.0, s_in)) return {m.weight_at_zero(), true};
  if (s >= s_out - edge * std::max(1.0, s_out)) return {1.0, true};

  // The master equation psi((y-1)/(y s)) = y - 1 has trivial roots at y = 0
  // and y = 1 in its raw form; both factor out exactly:
  //   psi(u) - (y-1) = y (1-y) H(y),
  //   H(y) = sum_j w_j (s - g_j) / (y s + (1-y) g_j).
  // H is cancellation-free (denominators stay within [min(s,g), max(s,g)]),
  // and H'(y) = -sum w (s-g)^2 / (.)^2 < 0, so H is strictly decreasing:
  // inside the annulus H(0+) > 0 > H(1-), and the root is unique.
  const auto H = [&](double y) {
    return (m.weights() * (s - m.g()) / (y * s + (1.0 - y) * m.g())).sum();
  };
  const auto dH = [&](double y) {
    const ArrayXd den = y * s + (1.0 - y) * m.g();
    return -(m.weights() * (s - m.g()).square() / den.square()).sum();
  };

  RootOptions opt;
  opt.f_tol = 1e-13;
  const double y = solve_bracketed(H, dH, 1e-18, 1.0 - 1e-16, opt);
  if (std::abs(H(y)) > 1e-11) {
    std::ostringstream msg;
    msg << "solve_y: residual " << H(y) << " above tolerance at s=" << s;
    throw std::runtime_error(msg.str());
  }
  return {y, false};
}

inline double solve_y(const GSpectrum& m, double s) { return solve_y_at(m, s).y; }

namespace detail {

// dy/ds at a solved point, from differentiating the master equation.
inline double density_given_y(const GSpectrum& m, double s, double y) {
  const double u = (y - 1.0) / (y * s);
  const double pp = psi_prime(m, u);
  const double denom = 1.0 - pp / (y * y * s);
  if (std::abs(denom) < 1e-14) {
    std::ostringstream msg;
    msg << "density_s: degenerate saddle, 1 - psi'/(y^2 s) = " << denom
        << " at s=" << s << ", y=" << y;
    throw std::runtime_error(msg.str());
  }
  return -(y - 1.0) / (y * s * s) * pp / denom;
}

}  // namespace detail

/// Density per unit squared modulus, dy/ds. Zero outside the annulus.
inline double density_s(const GSpectrum& m, double s) {
  const YSolve ys = solve_y_at(m, s);
  if (ys.boundary) return 0.0;
  return detail::density_given_y(m, s, ys.y);
}

/// Large-deviation exponent of the radial integrand:
/// phi(v) = ln v + sum of w ln(1 - (v-1) g / (v s)) over the atoms.
inline double phi(const GSpectrum& m, double v, double s) {
  if (!(v > 0.0 && v <= 1.0))
    throw std::domain_error("phi: v must lie in (0, 1]");
  if (!(s > 0.0)) throw std::domain_error("phi: s must be positive");
  // (1-v) g / (v s) >= 0 on this domain, so every log argument is >= 1
  const ArrayXd x = ((1.0 - v) / (v * s)) * m.g();
  return std::log(v) + (m.weights() * x.log1p()).sum();
}

/// Closed form of phi'' at the saddle y; strictly negative inside the annulus.
inline double phi_second(const GSpectrum& m, double y, double s) {
  if (!(y > 0.0 && y < 1.0))
    throw std::domain_error("phi_second: y must lie strictly in (0, 1)");
  const double u = (y - 1.0) / (y * s);
  return (1.0 - psi_prime(m, u) / (y * y * s)) / (y * (y - 1.0));
}

struct SaddleDiagnostics {
  double s = 0.0;
  double y = 0.0;
  double phi_second = 0.0;
  double pole_term = 0.0;     // y(y-1)/s, the moving-pole contribution
  double density_lhs = 0.0;   // (1/s) (1/|phi''| + y(y-1))
  double density_rhs = 0.0;   // dy/ds from the master equation
};

/// Evaluates both sides of the saddle-point identity at one interior point:
/// the saddle-plus-pole expression and the dy/ds route must agree.
inline SaddleDiagnostics saddle_identity(const GSpectrum& m, double s) {
  const YSolve ys = solve_y_at(m, s);
  if (ys.boundary) {
    std::ostringstream msg;
    msg << "saddle_identity: s=" << s << " not strictly inside the annulus";
    throw std::domain_error(msg.str());
  }
  SaddleDiagnostics d;
  d.s = s;
  d.y = ys.y;
  d.phi_second = phi_second(m, ys.y, s);
  d.pole_term = ys.y * (ys.y - 1.0) / s;
  d.density_lhs = (1.0 / std::abs(d.phi_second) + ys.y * (ys.y - 1.0)) / s;
  d.density_rhs = detail::density_given_y(m, s, ys.y);
  return d;
}

/// Radial solution tabulated over a grid of radii, in both normalization
/// conventions: rho_s = dy/ds per unit squared modulus, nu_area = rho_s/pi
/// per unit area.
struct RadialSolution {
  ArrayXd r;
  ArrayXd s;
  ArrayXd y;
  ArrayXd rho_s;
  ArrayXd nu_area;
  double atom_at_zero = 0.0;
  AnnulusBounds bounds;
};

inline RadialSolution tabulate(const GSpectrum& m, const GridSpec& grid) {
  const auto violations = grid.validate();
  if (!violations.empty()) {
    std::ostringstream msg;
    msg << "tabulate: invalid GridSpec:";
    for (const auto& v : violations) msg << " " << v << ";";
    throw std::invalid_argument(msg.str());
  }
  RadialSolution out;
  out.bounds = annulus(m);
  out.atom_at_zero = m.weight_at_zero();
  const double pad =
      std::max(0.05 * (out.bounds.r_outer - out.bounds.r_inner), 0.02);
  const double r_lo = grid.r_min.value_or(std::max(0.0, out.bounds.r_inner - pad));
  const double r_hi = grid.r_max.value_or(out.bounds.r_outer + pad);
  if (!(r_lo < r_hi))
    throw std::invalid_argument("tabulate: empty radius range");

  const int n = grid.points;
  out.r.resize(n);
  out.s.resize(n);
  out.y.resize(n);
  out.rho_s.resize(n);
  out.nu_area.resize(n);
  for (int k = 0; k < n; ++k) {
    const double r = r_lo + (r_hi - r_lo) * k / (n - 1);
    const double s = r * r;
    try {
      const YSolve ys = solve_y_at(m, s);
      out.r[k] = r;
      out.s[k] = s;
      out.y[k] = ys.y;
      out.rho_s[k] = ys.boundary ? 0.0 : detail::density_given_y(m, s, ys.y);
      out.nu_area[k] = out.rho_s[k] / std::numbers::pi;
    } catch (const std::exception& e) {
      std::ostringstream msg;
      msg << "tabulate: failure at grid index " << k << " (r=" << r << "): "
          << e.what();
      throw std::runtime_error(msg.str());
    }
  }
  return out;
}

/// Asymptotic radial CDF Y(r) sampled on a uniform grid for fast repeated
/// evaluation. Y(r) = 0 for r < 0, the clamped y(r^2) on [0, r_max], and
/// Y(r_max) beyond; build with r_max past the outer edge so the tail is 1.
struct RadialCdf {
  double r_max = 0.0;
  ArrayXd y;

  double operator()(double r) const {
    if (r < 0.0) return 0.0;
    if (r >= r_max) return y[y.size() - 1];
    const double x = r / r_max * static_cast<double>(y.size() - 1);
    const auto i = static_cast<Eigen::Index>(x);
    const double f = x - static_cast<double>(i);
    return y[i] * (1.0 - f) + y[i + 1] * f;
  }
};

inline RadialCdf asymptotic_cdf(const GSpectrum& m, double r_max,
                                int points = 8001) {
  if (points < 2) throw std::invalid_argument("asymptotic_cdf: points must be >= 2");
  RadialCdf out;
  out.r_max = std::max(r_max, annulus(m).r_outer + 0.01);
  out.y.resize(points);
  for (int k = 0; k < points; ++k)
    out.y[k] = solve_y(m, std::pow(out.r_max * k / (points - 1), 2));
  return out;
}

/// One point of a radial CDF given by its one-sided values: a jump of an
/// empirical CDF, or f_left == f_right for a sampled continuous CDF.
struct CdfJump {
  double r = 0.0;
  double f_left = 0.0;
  double f_right = 0.0;
};

/// Levy metric between a CDF given by its jumps and the asymptotic CDF:
/// the least eps with Y(r - eps) - eps <= F(r) <= Y(r + eps) + eps for all r.
/// This is the canonical metric for weak convergence; where the limit CDF is
/// steep, a finite-N edge layer of width w contributes ~w to this distance
/// while contributing its full height to the vertical sup.
inline double levy_distance(const std::vector<CdfJump>& jumps,
                            const RadialCdf& cdf) {
  // For a step CDF it is enough to test at the jumps: between them F is
  // constant while both Y(r + eps) and Y(r - eps) are nondecreasing, so the
  // two inequalities are tightest at the right value of the previous jump
  // and the left value of the next one. Sampled continuous CDFs must be
  // passed densely enough that the per-cell increment is negligible.
  const auto feasible = [&](double eps) {
    for (const CdfJump& p : jumps) {
      if (p.f_right > cdf(p.r + eps) + eps + 1e-12) return false;
      if (p.f_left < cdf(p.r - eps) - eps - 1e-12) return false;
    }
    return true;
  };
  double lo = 0.0, hi = 1.0;
  if (feasible(lo)) return 0.0;
  for (int it = 0; it < 50; ++it) {
    const double mid = 0.5 * (lo + hi);
    (feasible(mid) ? hi : lo) = mid;
  }
  return hi;
}

}  // namespace ringlaw
