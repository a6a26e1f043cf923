#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <vector>

#include "ringlaw/asymptotic.hpp"
#include "ringlaw/measure.hpp"

namespace ringlaw {

inline constexpr double kZeroModulusTol = 1e-10;
inline constexpr double kUnitarityTol = 1e-12;

struct SampleConfig {
  int n = 0;                 // matrix dimension
  int samples = 0;
  std::uint64_t seed = 0;
  std::vector<double> g;     // length n, each in [0, 1]

  std::vector<std::string> validate() const {
    std::vector<std::string> v;
    if (n < 1) v.push_back("sample.N must be >= 1");
    if (samples < 1) v.push_back("sample.samples must be >= 1");
    if (static_cast<int>(g.size()) != n)
      v.push_back("sample.g length must equal sample.N");
    for (double gi : g)
      if (!(gi >= 0.0 && gi <= 1.0)) {
        v.push_back("sample.g values must be in [0, 1]");
        break;
      }
    return v;
  }
};

/// Sorted eigenvalue moduli of a Monte Carlo run, with provenance.
struct EigenSample {
  std::vector<double> moduli;        // ascending, samples*n values
  double zero_fraction = 0.0;        // fraction with modulus <= 1e-10
  SampleConfig provenance;
  std::vector<int> failed_samples;   // excluded eigensolver failures
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed for the per-sample substream: parallel sampling stays reproducible
/// and independent of worker count.
inline std::uint64_t substream_seed(std::uint64_t seed, int sample_index) {
  return splitmix64(seed + 0x9E3779B97F4A7C15ULL *
                               (static_cast<std::uint64_t>(sample_index) + 1));
}

/// Haar-distributed unitary: complex Ginibre fill, QR, then each column of
/// Q rescaled by the unit phase of the matching diagonal entry of R. The
/// rescale removes the phase bias of the raw QR convention.
inline Eigen::MatrixXcd haar_unitary(int n, std::mt19937_64& rng) {
  if (n < 1) throw std::invalid_argument("haar_unitary: N must be >= 1");
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXcd a(n, n);
  for (int c = 0; c < n; ++c)
    for (int r = 0; r < n; ++r) a(r, c) = std::complex<double>(gauss(rng), gauss(rng));

  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(a);
  Eigen::MatrixXcd q = qr.householderQ();
  const auto rdiag = qr.matrixQR().diagonal();
  for (int k = 0; k < n; ++k) {
    const double mag = std::abs(rdiag[k]);
    if (mag == 0.0)
      throw std::runtime_error("haar_unitary: degenerate QR factor");
    q.col(k) *= rdiag[k] / mag;
  }
  const double residual =
      (q.adjoint() * q - Eigen::MatrixXcd::Identity(n, n)).cwiseAbs().maxCoeff();
  if (residual > kUnitarityTol) {
    std::ostringstream msg;
    msg << "haar_unitary: unitarity residual " << residual << " above "
        << kUnitarityTol;
    throw std::runtime_error(msg.str());
  }
  return q;
}

namespace detail {

inline std::vector<double> sample_one(const SampleConfig& cfg, int index,
                                      const Eigen::VectorXd& sqrt_g) {
  std::mt19937_64 rng(substream_seed(cfg.seed, index));
  const Eigen::MatrixXcd u = haar_unitary(cfg.n, rng);
  const Eigen::MatrixXcd t = u * sqrt_g.asDiagonal();
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(t, false);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("eigensolver failed");
  std::vector<double> mods(static_cast<std::size_t>(cfg.n));
  for (int k = 0; k < cfg.n; ++k)
    mods[static_cast<std::size_t>(k)] = std::abs(solver.eigenvalues()[k]);
  return mods;
}

}  // namespace detail

/// Draws `samples` matrices T = U diag(sqrt(g)), U Haar, and collects all
/// eigenvalue moduli. Deterministic: the output depends only on cfg, never
/// on the number of worker threads.
inline EigenSample sample_moduli(const SampleConfig& cfg, int threads = 0) {
  const auto violations = cfg.validate();
  if (!violations.empty()) {
    std::ostringstream msg;
    msg << "sample_moduli: invalid SampleConfig:";
    for (const auto& v : violations) msg << " " << v << ";";
    throw std::invalid_argument(msg.str());
  }
  Eigen::VectorXd sqrt_g(cfg.n);
  for (int i = 0; i < cfg.n; ++i) sqrt_g[i] = std::sqrt(cfg.g[static_cast<std::size_t>(i)]);

  int workers = threads;
  if (workers <= 0)
    workers = static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, cfg.samples);

  std::vector<std::vector<double>> per_sample(static_cast<std::size_t>(cfg.samples));
  std::vector<char> failed(static_cast<std::size_t>(cfg.samples), 0);
  std::atomic<int> next{0};
  std::atomic<bool> fatal{false};
  std::string fatal_message;
  std::mutex fatal_mutex;

  const auto work = [&] {
    for (;;) {
      const int k = next.fetch_add(1);
      if (k >= cfg.samples || fatal.load()) return;
      try {
        per_sample[static_cast<std::size_t>(k)] = detail::sample_one(cfg, k, sqrt_g);
      } catch (const std::runtime_error&) {
        failed[static_cast<std::size_t>(k)] = 1;  // excluded, run flagged
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(fatal_mutex);
        fatal_message = e.what();
        fatal.store(true);
      }
    }
  };

  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (fatal.load())
    throw std::runtime_error("sample_moduli: " + fatal_message);

  EigenSample out;
  out.provenance = cfg;
  for (int k = 0; k < cfg.samples; ++k) {
    if (failed[static_cast<std::size_t>(k)]) {
      out.failed_samples.push_back(k);
      continue;
    }
    const auto& mods = per_sample[static_cast<std::size_t>(k)];
    out.moduli.insert(out.moduli.end(), mods.begin(), mods.end());
  }
  if (out.moduli.empty())
    throw std::runtime_error("sample_moduli: every sample failed");
  std::sort(out.moduli.begin(), out.moduli.end());

  const bool sub_unitary =
      std::all_of(cfg.g.begin(), cfg.g.end(), [](double g) { return g <= 1.0; });
  if (sub_unitary && out.moduli.back() > 1.0 + 1e-8) {
    std::ostringstream msg;
    msg << "sample_moduli: modulus " << out.moduli.back()
        << " violates sub-unitarity";
    throw std::runtime_error(msg.str());
  }
  std::size_t zeros = 0;
  while (zeros < out.moduli.size() && out.moduli[zeros] <= kZeroModulusTol) ++zeros;
  out.zero_fraction = static_cast<double>(zeros) / static_cast<double>(out.moduli.size());
  return out;
}

/// Fraction of moduli <= r; right-continuous step function.
inline double empirical_cdf(const EigenSample& es, double r) {
  const auto it = std::upper_bound(es.moduli.begin(), es.moduli.end(), r);
  return static_cast<double>(it - es.moduli.begin()) /
         static_cast<double>(es.moduli.size());
}

/// Sup distance between the empirical radial CDF and the asymptotic y(r).
/// Moduli at eigensolver-noise scale are folded into the atom at zero, and
/// both sides of each empirical jump are compared.
inline double ks_distance(const EigenSample& es, const GSpectrum& m) {
  const double total = static_cast<double>(es.moduli.size());
  std::size_t zeros = 0;
  while (zeros < es.moduli.size() && es.moduli[zeros] <= kZeroModulusTol) ++zeros;

  double dist = std::abs(static_cast<double>(zeros) / total - m.weight_at_zero());
  std::size_t k = zeros;
  while (k < es.moduli.size()) {
    const double v = es.moduli[k];
    std::size_t k2 = k;
    while (k2 < es.moduli.size() && es.moduli[k2] == v) ++k2;
    const double y = solve_y_at(m, v * v).y;
    dist = std::max(dist, std::abs(static_cast<double>(k2) / total - y));
    dist = std::max(dist, std::abs(static_cast<double>(k) / total - y));
    k = k2;
  }
  return dist;
}

/// Levy distance between the empirical radial CDF and the asymptotic law.
/// Unlike ks_distance this measures the O(N^{-1/2}) edge layer by its width
/// rather than its height, so it tracks weak convergence at the edges.
inline double levy_distance(const EigenSample& es, const GSpectrum& m) {
  const double total = static_cast<double>(es.moduli.size());
  std::vector<CdfJump> jumps;
  std::size_t zeros = 0;
  while (zeros < es.moduli.size() && es.moduli[zeros] <= kZeroModulusTol) ++zeros;
  if (zeros > 0) jumps.push_back({0.0, 0.0, static_cast<double>(zeros) / total});
  std::size_t k = zeros;
  while (k < es.moduli.size()) {
    const double v = es.moduli[k];
    std::size_t k2 = k;
    while (k2 < es.moduli.size() && es.moduli[k2] == v) ++k2;
    jumps.push_back({v, static_cast<double>(k) / total,
                     static_cast<double>(k2) / total});
    k = k2;
  }
  const double r_hi = es.moduli.empty() ? 1.0 : es.moduli.back() + 0.01;
  return levy_distance(jumps, asymptotic_cdf(m, r_hi));
}

}  // namespace ringlaw
