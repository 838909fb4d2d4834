#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "intermittent/error.hpp"
#include "intermittent/holder.hpp"
#include "intermittent/maps.hpp"
#include "intermittent/measure.hpp"
#include "intermittent/parallel.hpp"
#include "intermittent/rng.hpp"
#include "intermittent/stats.hpp"
#include "intermittent/transfer.hpp"
#include "intermittent/ulam.hpp"

namespace intermittent {

enum class ObservableKind { Identity, Power, Indicator, Coboundary };
enum class Regularity { Holder, BV };

/// Built-in observables. The value is scale * raw(x) - mean.
struct Observable {
  ObservableKind kind = ObservableKind::Identity;
  double alpha = 1.0;      // Power exponent; Coboundary psi exponent
  double a = 0.0, b = 1.0; // Indicator interval
  double scale = 1.0;
  double mean = 0.0;
  bool centered = false;
  MapSpec map{};           // used by Coboundary only
  double psi_mean = 0.0;   // centering of psi inside the coboundary

  static Observable identity() { return {}; }
  static Observable power(double alpha) {
    require(alpha > 0, "Observable::power: exponent must be positive");
    Observable o;
    o.kind = ObservableKind::Power;
    o.alpha = alpha;
    return o;
  }
  static Observable indicator(double a, double b) {
    require(0 <= a && a < b && b <= 1, "Observable::indicator: need 0 <= a < b <= 1");
    Observable o;
    o.kind = ObservableKind::Indicator;
    o.a = a;
    o.b = b;
    return o;
  }
  /// psi o f - psi with psi(x) = x^alpha.
  static Observable coboundary(const MapSpec& map, double alpha = 2.0) {
    Observable o;
    o.kind = ObservableKind::Coboundary;
    o.alpha = alpha;
    o.map = map;
    return o;
  }

  Observable scaled(double c) const {
    Observable o = *this;
    o.scale *= c;
    o.mean *= c;
    return o;
  }

  double psi(double x) const { return std::pow(x, alpha) - psi_mean; }

  double raw(double x) const {
    switch (kind) {
      case ObservableKind::Identity: return x;
      case ObservableKind::Power: return std::pow(x, alpha);
      case ObservableKind::Indicator: return (x >= a && x <= b) ? 1.0 : 0.0;
      case ObservableKind::Coboundary: return psi(evaluate(map, x).f) - psi(x);
    }
    return 0.0;
  }
  double operator()(double x) const { return scale * raw(x) - mean; }

  Regularity regularity() const {
    return (kind == ObservableKind::Indicator || kind == ObservableKind::Coboundary) ? Regularity::BV
                                                                                      : Regularity::Holder;
  }
  double holder_exponent() const { return kind == ObservableKind::Power ? std::min(alpha, 1.0) : 1.0; }
  double holder_constant() const {
    return std::abs(scale) * (kind == ObservableKind::Power ? std::max(alpha, 1.0) : 1.0);
  }
  /// Variation bound with extension by zero outside [0, 1].
  double variation_bound() const {
    switch (kind) {
      case ObservableKind::Identity: return 2.0 * std::abs(scale) + 2.0 * std::abs(mean);
      case ObservableKind::Power: return 2.0 * std::abs(scale) + 2.0 * std::abs(mean);
      case ObservableKind::Indicator: return 2.0 * std::abs(scale) + 2.0 * std::abs(mean);
      case ObservableKind::Coboundary: {
        // psi o f has one monotone sweep per branch plus the jump at 1/2
        const double swing = 1.0 + std::abs(psi_mean);
        return std::abs(scale) * (5.0 * swing + 2.0) + 2.0 * std::abs(mean);
      }
    }
    return 0.0;
  }
  /// Every built-in raw value lies in [-1, 1].
  double sup_bound() const { return std::abs(scale) + std::abs(mean); }
};

/// Integral of raw(x) against the cell density, with 5-point Gauss rules per cell.
inline double integrate_raw(const Observable& obs, const DensityGrid& nu) {
  const auto& gl = gauss_legendre<5>();
  double s = 0;
  for (std::size_t c = 0; c < nu.cells(); ++c) {
    if (nu.values[c] == 0.0) continue;
    const double lo = nu.edges[c], hi = nu.edges[c + 1];
    double avg = 0;
    if (obs.kind == ObservableKind::Indicator) {
      avg = std::max(0.0, std::min(hi, obs.b) - std::max(lo, obs.a)) / (hi - lo);
    } else {
      for (const auto& [t, w] : gl) avg += 0.5 * w * obs.raw(lo + 0.5 * (t + 1.0) * (hi - lo));
    }
    s += nu.mass(c) * avg;
  }
  return s / nu.total_mass();
}

/// Sets the centering constants from the given density.
inline Observable center(Observable obs, const DensityGrid& nu) {
  if (obs.kind == ObservableKind::Coboundary) {
    Observable psi = Observable::power(obs.alpha);
    obs.psi_mean = integrate_raw(psi, nu);
  }
  obs.mean = 0.0;
  obs.mean = obs.scale * integrate_raw(obs, nu);
  obs.centered = true;
  return obs;
}

/// Integral of raw(x) against a density on [lo, hi], splitting at the indicator edges.
template <typename Density>
inline std::pair<double, double> panel_integral(const Observable& obs, const Density& h, double lo, double hi) {
  std::vector<double> cuts{lo};
  if (obs.kind == ObservableKind::Indicator)
    for (double e : {obs.a, obs.b})
      if (e > lo && e < hi) cuts.push_back(e);
  cuts.push_back(hi);
  const auto& gl = gauss_legendre<8>();
  double mass = 0, moment = 0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double a = cuts[i], b = cuts[i + 1];
    for (const auto& [t, w] : gl) {
      const double x = 0.5 * (a + b) + 0.5 * (b - a) * t;
      const double hw = 0.5 * (b - a) * w * h(x);
      mass += hw;
      moment += hw * obs.raw(x);
    }
  }
  return {mass, moment};
}

/// Centering against the smooth density on Y and J_1..J_depth; the coarse grid
/// covers the remaining mass near 0.
inline Observable center(Observable obs, const SmoothDensity& h, const DensityGrid& coarse, std::size_t depth = 64,
                         std::size_t y_panels = 64) {
  require(depth <= coarse.depth, "center: smooth depth exceeds the coarse grid");
  auto integrate_all = [&](const Observable& o) {
    double mass = 0, moment = 0;
    for (std::size_t j = 0; j < y_panels; ++j) {
      const double a = 0.5 + 0.5 * static_cast<double>(j) / static_cast<double>(y_panels);
      const double b = 0.5 + 0.5 * static_cast<double>(j + 1) / static_cast<double>(y_panels);
      const auto [m, mo] = panel_integral(o, [&](double x) { return h.on_y(x); }, a, b);
      mass += m;
      moment += mo;
    }
    for (std::size_t k = 1; k <= depth; ++k) {
      const std::size_t c = coarse.ladder_cell(k);
      const auto [m, mo] = panel_integral(o, h, coarse.edges[c], coarse.edges[c + 1]);
      mass += m;
      moment += mo;
    }
    const auto& gl = gauss_legendre<5>();
    for (std::size_t c = 0; c < coarse.ladder_cell(depth); ++c) {
      const double lo = coarse.edges[c], hi = coarse.edges[c + 1];
      double avg = 0;
      for (const auto& [t, w] : gl) avg += 0.5 * w * o.raw(lo + 0.5 * (t + 1.0) * (hi - lo));
      mass += coarse.mass(c);
      moment += coarse.mass(c) * avg;
    }
    return moment / mass;
  };
  if (obs.kind == ObservableKind::Coboundary) obs.psi_mean = integrate_all(Observable::power(obs.alpha));
  obs.mean = 0.0;
  obs.mean = obs.scale * integrate_all(obs);
  obs.centered = true;
  return obs;
}

inline double integrate(const Observable& obs, const DensityGrid& nu) {
  return obs.scale * integrate_raw(obs, nu) - obs.mean;
}

/// Largest ratio |phi(x) - phi(y)| / |x - y|^e over random pairs.
inline double sampled_holder_ratio(const Observable& obs, std::size_t pairs, std::uint64_t seed) {
  Rng rng = make_stream(seed, 0);
  const double e = obs.holder_exponent();
  double worst = 0;
  for (std::size_t i = 0; i < pairs; ++i) {
    const double x = uniform01(rng), y = uniform01(rng);
    if (x == y) continue;
    worst = std::max(worst, std::abs(obs(x) - obs(y)) / std::pow(std::abs(x - y), e));
  }
  return worst;
}

/// Total variation on a uniform grid of the given size, extended by zero.
inline double grid_variation(const Observable& obs, std::size_t points) {
  require(points >= 2, "grid_variation: need at least two points");
  double prev = 0.0, v = 0.0;
  for (std::size_t i = 0; i < points; ++i) {
    const double x = (static_cast<double>(i) + 0.5) / static_cast<double>(points);
    const double cur = obs(x);
    v += std::abs(cur - prev);
    prev = cur;
  }
  return v + std::abs(prev);
}

/// Cell averages of an observable on an Ulam grid.
inline Vec observable_on_grid(const UlamChain& ch, const Observable& obs) {
  const auto& gl = gauss_legendre<5>();
  Vec v(static_cast<Eigen::Index>(ch.cells()));
  for (std::size_t c = 0; c < ch.cells(); ++c) {
    const double lo = ch.grid.left(c), hi = ch.grid.right(c);
    double avg = 0;
    if (obs.kind == ObservableKind::Indicator) {
      avg = obs.scale * std::max(0.0, std::min(hi, obs.b) - std::max(lo, obs.a)) / (hi - lo) - obs.mean;
    } else {
      for (const auto& [t, w] : gl) avg += 0.5 * w * obs(lo + 0.5 * (t + 1.0) * (hi - lo));
    }
    v[static_cast<Eigen::Index>(c)] = avg;
  }
  return v;
}

/// Draws points from a piecewise-constant density by inverse CDF.
class NuSampler {
 public:
  explicit NuSampler(const DensityGrid& nu) : edges_(nu.edges) {
    cdf_.reserve(nu.cells());
    double acc = 0;
    for (std::size_t c = 0; c < nu.cells(); ++c) cdf_.push_back(acc += nu.mass(c));
    require(acc > 0, "NuSampler: density has no mass");
    for (auto& v : cdf_) v /= acc;
  }
  double operator()(Rng& rng) const {
    const double u = uniform01(rng);
    auto c = static_cast<std::size_t>(std::upper_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin());
    c = std::min(c, cdf_.size() - 1);
    const double x = edges_[c] + uniform01(rng) * (edges_[c + 1] - edges_[c]);
    return std::clamp(x, 1e-300, std::nextafter(1.0, 0.0));
  }

 private:
  std::vector<double> edges_;
  std::vector<double> cdf_;
};

/// W_n at t = k / n, built from S_k with increments phi o f^k.
inline PathSample birkhoff_path(const MapSpec& map, const Observable& obs, std::size_t n, double x0) {
  require(n >= 2, "birkhoff_path: n must be at least 2");
  require(x0 > 0 && x0 < 1, "birkhoff_path: start must lie in (0, 1)");
  PathSample p{n, std::vector<double>(n + 1)};
  const double norm = 1.0 / std::sqrt(static_cast<double>(n));
  double x = x0, s = 0.0;
  p.values[0] = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    s += obs(x);
    x = evaluate(map, x).f;
    if (!(x > 0.0 && x < 1.0)) throw NumericFailure("birkhoff_path: orbit reached a fixed point", x, 0.0);
    p.values[k] = s * norm;
  }
  return p;
}

inline PathSample birkhoff_path(const MapSpec& map, const Observable& obs, std::size_t n, const NuSampler& nu,
                                Rng& rng) {
  return birkhoff_path(map, obs, n, nu(rng));
}

// ---------------------------------------------------------------------------
// sigma^2

enum class SigmaMethod { Ulam, MonteCarlo };

inline std::string to_tag(SigmaMethod m) { return m == SigmaMethod::Ulam ? "ulam" : "montecarlo"; }

struct SigmaEstimate {
  SigmaMethod method = SigmaMethod::Ulam;
  double variance = 0.0;                // Var(phi)
  std::vector<double> partial_sums;     // Var + 2 sum_{j <= k} Cov_j, k = 0..K_max (Ulam)
  double sigma2 = 0.0;
  double std_error = 0.0;
  double tail_oscillation = 0.0;        // max - min of partial sums beyond the window start
  std::size_t samples = 0;              // MC: number of independent blocks
  bool partial = false;                 // MC: budget exhausted
};

/// Var(phi) + 2 sum_k Cov(phi, phi o f^k) from powers of the Ulam transfer operator.
inline SigmaEstimate sigma_squared_ulam(const UlamChain& ch, const Observable& obs, std::size_t k_max,
                                        std::size_t window_start = 64) {
  require(k_max >= 1, "sigma_squared_ulam: k_max must be positive");
  const Vec phi = observable_on_grid(ch, obs);
  const auto cov = covariance_series(ch, phi, phi, k_max);
  SigmaEstimate est;
  est.method = SigmaMethod::Ulam;
  est.variance = cov[0];
  double acc = cov[0];
  est.partial_sums.push_back(acc);
  for (std::size_t k = 1; k <= k_max; ++k) est.partial_sums.push_back(acc += 2.0 * cov[k]);
  est.sigma2 = acc;
  const std::size_t w0 = std::min(window_start, k_max);
  const auto [lo, hi] = std::minmax_element(est.partial_sums.begin() + static_cast<std::ptrdiff_t>(w0), est.partial_sums.end());
  est.tail_oscillation = *hi - *lo;
  est.std_error = est.tail_oscillation;
  return est;
}

/// sigma^2 from independent nu-distributed orbits of length 2b.
///
/// V(m) = E[S_m^2] / m carries an O(1/m) bias, so the estimate is the
/// extrapolation 2 V(2b) - V(b) averaged over orbits.
inline SigmaEstimate sigma_squared_mc(const MapSpec& map, const Observable& obs, const NuSampler& nu,
                                      std::size_t block, std::size_t blocks, std::uint64_t seed, int threads,
                                      std::size_t budget = 0) {
  require(obs.centered, "sigma_squared_mc: observable must be centered");
  require(block >= 2 && blocks >= 2, "sigma_squared_mc: need block >= 2 and at least two blocks");
  SigmaEstimate est;
  est.method = SigmaMethod::MonteCarlo;
  if (budget > 0 && 2 * block * blocks > budget) {
    blocks = std::max<std::size_t>(2, budget / (2 * block));
    est.partial = true;
  }
  std::vector<double> terms(blocks), var_terms(blocks);
  parallel_for(blocks, threads, [&](std::size_t i) {
    Rng rng = make_stream(seed, i);
    double x = nu(rng), s = 0.0, s_half = 0.0;
    var_terms[i] = obs(x) * obs(x);
    for (std::size_t k = 0; k < 2 * block; ++k) {
      if (k == block) s_half = s;
      s += obs(x);
      x = evaluate(map, x).f;
      if (!(x > 0.0 && x < 1.0)) throw NumericFailure("sigma_squared_mc: orbit reached a fixed point", x, 0.0);
    }
    const double b = static_cast<double>(block);
    terms[i] = s * s / b - s_half * s_half / b;  // 2 V(2b) - V(b) per orbit
  });
  est.sigma2 = stats::mean(terms);
  est.variance = stats::mean(var_terms);
  est.samples = blocks;
  est.std_error = std::sqrt(stats::variance(terms) / static_cast<double>(blocks));
  return est;
}

// ---------------------------------------------------------------------------
// Brownian references

/// Gaussian random walk with step variance sigma^2 / n.
inline PathSample brownian_path(std::size_t n_grid, double sigma, Rng& rng) {
  require(sigma >= 0, "brownian_path: sigma must be non-negative");
  require(n_grid >= 1, "brownian_path: grid must be non-empty");
  PathSample p{n_grid, std::vector<double>(n_grid + 1, 0.0)};
  std::normal_distribution<double> gauss(0.0, sigma / std::sqrt(static_cast<double>(n_grid)));
  for (std::size_t k = 1; k <= n_grid; ++k) p.values[k] = p.values[k - 1] + (sigma > 0 ? gauss(rng) : 0.0);
  return p;
}

inline std::vector<PathSample> brownian_reference(std::size_t n_grid, std::size_t count, double sigma,
                                                  std::uint64_t seed, int threads = 0) {
  std::vector<PathSample> out(count);
  parallel_for(count, threads, [&](std::size_t i) {
    Rng rng = make_stream(seed, i);
    out[i] = brownian_path(n_grid, sigma, rng);
  });
  return out;
}

/// P(sup_{[0,1]} sigma W <= m) for m >= 0.
inline double brownian_sup_cdf(double m, double sigma) {
  if (m < 0) return 0.0;
  if (sigma == 0) return 1.0;
  return 2.0 * stats::normal_cdf(m / sigma) - 1.0;
}

// ---------------------------------------------------------------------------
// Invariance principle experiments

inline const std::vector<std::string>& functional_names() {
  static const std::vector<std::string> names{"endpoint", "sup", "holder_norm", "integral"};
  return names;
}

/// Per path: endpoint, sup, ||.||_eta, integral.
struct FunctionalEnsemble {
  std::vector<std::vector<double>> values = std::vector<std::vector<double>>(4);
  std::size_t size() const { return values[0].size(); }
};

inline void record(FunctionalEnsemble& ens, std::size_t i, const HolderResult& h) {
  ens.values[0][i] = h.endpoint;
  ens.values[1][i] = h.sup;
  ens.values[2][i] = h.norm;
  ens.values[3][i] = h.integral;
}

inline FunctionalEnsemble brownian_functionals(std::size_t n_grid, std::size_t count, double sigma, double eta,
                                               std::uint64_t seed, int threads) {
  FunctionalEnsemble ens;
  for (auto& v : ens.values) v.resize(count);
  parallel_for(count, threads, [&](std::size_t i) {
    Rng rng = make_stream(seed, i);
    record(ens, i, holder_functionals(brownian_path(n_grid, sigma, rng), eta, {}));
  });
  return ens;
}

inline FunctionalEnsemble birkhoff_functionals(const MapSpec& map, const Observable& obs, const NuSampler& nu,
                                               std::size_t n, std::size_t count, double eta, std::uint64_t seed,
                                               int threads, bool exhaustive = false) {
  FunctionalEnsemble ens;
  for (auto& v : ens.values) v.resize(count);
  parallel_for(count, threads, [&](std::size_t i) {
    Rng rng = make_stream(seed, i);
    record(ens, i, holder_functionals(birkhoff_path(map, obs, n, nu, rng), eta, {}, exhaustive));
  });
  return ens;
}

struct HipRow {
  std::size_t n = 0;
  std::string functional;
  double ks = 0.0;
  double p_value = 0.0;
  std::size_t paths = 0;
  std::size_t reference = 0;
  double sample_variance = 0.0;  // endpoint rows only
};

struct HipConfig {
  std::vector<std::size_t> n_list{4096, 16384, 65536};
  std::size_t paths = 2000;
  double eta = 0.2;
  double sigma = 1.0;
  std::size_t ref_grid = 16384;
  std::size_t ref_count = 20000;
  std::uint64_t seed = 1;
  int threads = 0;
  bool exhaustive = false;
};

/// Two-sample KS of W_n functionals against sigma W, for each n in the list.
inline std::vector<HipRow> hip_experiment(const MapSpec& map, const Observable& obs, const NuSampler& nu,
                                          const HipConfig& cfg) {
  require(obs.centered, "hip_experiment: observable must be centered");
  require(cfg.eta > 0 && cfg.eta < 0.5, "hip_experiment: eta must lie in (0, 1/2)");
  const FunctionalEnsemble ref =
      brownian_functionals(cfg.ref_grid, cfg.ref_count, std::sqrt(std::max(cfg.sigma, 0.0)), cfg.eta,
                           splitmix64(cfg.seed ^ 0xb1u), cfg.threads);
  std::vector<HipRow> rows;
  for (std::size_t idx = 0; idx < cfg.n_list.size(); ++idx) {
    const std::size_t n = cfg.n_list[idx];
    const FunctionalEnsemble ens =
        birkhoff_functionals(map, obs, nu, n, cfg.paths, cfg.eta, splitmix64(cfg.seed + 1000 * (idx + 1)),
                             cfg.threads, cfg.exhaustive);
    for (std::size_t f = 0; f < functional_names().size(); ++f) {
      const auto ks = stats::ks_two_sample(ens.values[f], ref.values[f]);
      HipRow r{n, functional_names()[f], ks.statistic, ks.p_value, cfg.paths, cfg.ref_count, 0.0};
      if (f == 0) r.sample_variance = stats::variance(ens.values[0]);
      rows.push_back(r);
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Baum-Katz

struct BaumKatzConfig {
  double a = 1.0;
  double x = 0.5;
  double p = 3.5;          // moment order with int R^p dm finite
  double order = 1.5;      // exponent r of the n^{-1/r} |S_n| almost-sure proxy
  std::size_t N = 65536;
  std::size_t mc = 2000;
  std::size_t windows = 4;
  std::uint64_t seed = 1;
  int threads = 0;
};

struct BaumKatzResult {
  std::vector<double> probability;   // index n - 1
  std::vector<double> term;
  std::vector<double> partial;
  std::vector<bool> censored;        // no exceedance observed
  std::size_t censored_count = 0;
  double tail_ratio = 0.0;           // partial-sum increment over the last half decade / total
  std::vector<std::size_t> window_start;
  std::vector<double> window_max;    // mean over paths of max_{n in window} n^{-1/r} |S_n|
};

inline BaumKatzResult baum_katz_partial(const MapSpec& map, const Observable& obs, const NuSampler& nu,
                                        const BaumKatzConfig& cfg) {
  require(obs.centered, "baum_katz_partial: observable must be centered");
  require(cfg.p > 1, "baum_katz_partial: p must exceed 1");
  const double a_lo = cfg.p >= 2 ? 0.5 : 1.0 / cfg.p;
  require(cfg.a <= 1.0 && (cfg.p >= 2 ? cfg.a > a_lo : cfg.a >= a_lo), "baum_katz_partial: a outside the admissible range");
  require(cfg.x > 0 && cfg.N >= 16 && cfg.mc >= 1, "baum_katz_partial: bad parameters");
  require(cfg.order > 1, "baum_katz_partial: order must exceed 1");
  const std::size_t N = cfg.N;
  std::size_t top = 1;
  while (2 * top <= N) top *= 2;  // windows [2^k, 2^{k+1}) ending at or below N
  std::vector<std::size_t> starts;
  for (std::size_t w = top / 2; w >= 1 && starts.size() < cfg.windows; w /= 2) starts.insert(starts.begin(), w);

  const std::size_t chunks = std::min<std::size_t>(cfg.mc, 64);
  std::vector<std::vector<std::uint32_t>> counts(chunks, std::vector<std::uint32_t>(N, 0));
  std::vector<std::vector<double>> wsum(chunks, std::vector<double>(starts.size(), 0.0));
  std::vector<double> thresh(N), weight(N);
  for (std::size_t n = 1; n <= N; ++n) {
    thresh[n - 1] = cfg.x * std::pow(static_cast<double>(n), cfg.a);
    weight[n - 1] = std::pow(static_cast<double>(n), -1.0 / cfg.order);
  }
  parallel_for(chunks, cfg.threads, [&](std::size_t c) {
    for (std::size_t i = c; i < cfg.mc; i += chunks) {
      Rng rng = make_stream(cfg.seed, i);
      double x = nu(rng), s = 0.0, run = 0.0;
      std::vector<double> wmax(starts.size(), 0.0);
      for (std::size_t n = 1; n <= N; ++n) {
        s += obs(x);
        x = evaluate(map, x).f;
        if (!(x > 0.0 && x < 1.0)) throw NumericFailure("baum_katz_partial: orbit reached a fixed point", x, 0.0);
        run = std::max(run, std::abs(s));
        if (run >= thresh[n - 1]) ++counts[c][n - 1];
        for (std::size_t w = 0; w < starts.size(); ++w)
          if (n >= starts[w] && n < 2 * starts[w]) wmax[w] = std::max(wmax[w], weight[n - 1] * std::abs(s));
      }
      for (std::size_t w = 0; w < starts.size(); ++w) wsum[c][w] += wmax[w];
    }
  });

  BaumKatzResult out;
  out.probability.resize(N);
  out.term.resize(N);
  out.partial.resize(N);
  out.censored.resize(N);
  double acc = 0;
  for (std::size_t n = 1; n <= N; ++n) {
    std::uint64_t hits = 0;
    for (std::size_t c = 0; c < chunks; ++c) hits += counts[c][n - 1];
    out.probability[n - 1] = static_cast<double>(hits) / static_cast<double>(cfg.mc);
    out.censored[n - 1] = hits == 0;
    out.censored_count += hits == 0;
    out.term[n - 1] = std::pow(static_cast<double>(n), cfg.a * cfg.p - 2.0) * out.probability[n - 1];
    out.partial[n - 1] = acc += out.term[n - 1];
  }
  const auto half = static_cast<std::size_t>(std::floor(static_cast<double>(N) / std::sqrt(10.0)));
  out.tail_ratio = acc > 0 ? (acc - out.partial[half - 1]) / acc : 0.0;
  out.window_start = starts;
  for (std::size_t w = 0; w < starts.size(); ++w) {
    double s = 0;
    for (std::size_t c = 0; c < chunks; ++c) s += wsum[c][w];
    out.window_max.push_back(s / static_cast<double>(cfg.mc));
  }
  return out;
}

}  // namespace intermittent
