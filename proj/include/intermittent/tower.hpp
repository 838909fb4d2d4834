#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "intermittent/error.hpp"
#include "intermittent/maps.hpp"
#include "intermittent/parallel.hpp"
#include "intermittent/rng.hpp"
#include "intermittent/stats.hpp"

namespace intermittent {

/// Law of a positive integer letter R given by its survival function
/// S[n] = P(R > n) for n = 0..D, extended beyond D by a Pareto tail of index tail_p.
struct LetterLaw {
  std::vector<double> surv;
  double tail_p = 0.0;  // 0: no mass beyond D
  std::vector<double> biased_cdf;  // cumulative n P(R = n) / E[R], n = 1..D
  double mean = 0.0;
  double biased_tail = 0.0;  // size-biased mass beyond D

  std::size_t depth() const { return surv.size() - 1; }

  static LetterLaw from_survival(std::vector<double> surv, double tail_p) {
    require(surv.size() >= 2 && surv[0] == 1.0, "LetterLaw: survival must start at 1");
    for (std::size_t n = 1; n < surv.size(); ++n)
      require(surv[n] <= surv[n - 1] && surv[n] >= 0, "LetterLaw: survival must be non-increasing");
    require(tail_p == 0.0 || tail_p > 1.0, "LetterLaw: tail index must exceed 1");
    LetterLaw law;
    law.surv = std::move(surv);
    law.tail_p = tail_p;
    const std::size_t D = law.depth();
    const double sD = law.surv[D];
    double mean = 0;
    for (double s : law.surv) mean += s;
    mean -= sD;  // sum_{n=0}^{D-1} S[n]
    double beyond = 0, biased_beyond = 0;
    if (tail_p > 0 && sD > 0) {
      // continuous Pareto above D: E[R; R > D] ~ D S_D p / (p - 1)
      beyond = static_cast<double>(D) * sD / (tail_p - 1.0) + sD;
      biased_beyond = static_cast<double>(D) * sD * tail_p / (tail_p - 1.0);
    }
    law.mean = mean + beyond;
    law.biased_cdf.resize(D);
    double acc = 0;
    for (std::size_t n = 1; n <= D; ++n) {
      acc += static_cast<double>(n) * (law.surv[n - 1] - law.surv[n]);
      law.biased_cdf[n - 1] = acc;
    }
    const double total = acc + biased_beyond;
    for (auto& c : law.biased_cdf) c /= total;
    law.biased_tail = biased_beyond / total;
    return law;
  }

  /// Return-time letters of the map: P(R > n) = z_n.
  static LetterLaw from_ladder(const ZLadder& ladder, double p) {
    std::vector<double> s(ladder.z.begin(), ladder.z.end() - 1);
    return from_survival(std::move(s), p);
  }

  /// Synthetic letters with P(R > n) = n^-p for n >= 1.
  static LetterLaw pareto(double p, std::size_t D) {
    std::vector<double> s(D + 1);
    s[0] = 1.0;
    for (std::size_t n = 1; n <= D; ++n) s[n] = std::pow(static_cast<double>(n), -p);
    return from_survival(std::move(s), p);
  }

  static LetterLaw constant_one() { return from_survival({1.0, 0.0}, 0.0); }

  long sample(Rng& rng) const {
    const double u = uniform01(rng);
    const std::size_t D = depth();
    if (u <= surv[D]) {
      if (tail_p <= 0) return static_cast<long>(D);
      const double x = static_cast<double>(D) * std::pow(surv[D] / u, 1.0 / tail_p);
      return static_cast<long>(std::min(x, 9e15)) + 1;
    }
    // smallest n with S[n] < u
    const auto it = std::upper_bound(surv.begin(), surv.end(), u, [](double v, double s) { return v > s; });
    return static_cast<long>(it - surv.begin());
  }

  long sample_size_biased(Rng& rng) const {
    const double u = uniform01(rng);
    if (u > 1.0 - biased_tail) {
      const double v = uniform01(rng);
      const double x = static_cast<double>(depth()) * std::pow(v, -1.0 / (tail_p - 1.0));
      return static_cast<long>(std::min(x, 9e15)) + 1;
    }
    const auto it = std::lower_bound(biased_cdf.begin(), biased_cdf.end(), u);
    return static_cast<long>(std::min<std::size_t>(static_cast<std::size_t>(it - biased_cdf.begin()), depth() - 1)) + 1;
  }
};

/// How xi enters the block-height law.
enum class WordReading {
  GeometricLength,  // h = R_1 + ... + R_L, L geometric(xi) on {1, 2, ...}
  GeometricHeight   // h itself geometric(xi) on {1, 2, ...}
};

struct BlockHeightLaw {
  double xi = 0.5;
  LetterLaw letters;
  WordReading reading = WordReading::GeometricLength;

  BlockHeightLaw(double xi_, LetterLaw letters_, WordReading r = WordReading::GeometricLength)
      : xi(xi_), letters(std::move(letters_)), reading(r) {
    require(xi > 0 && xi < 1, "BlockHeightLaw: xi must lie in (0, 1)");
  }

  double mean() const {
    return reading == WordReading::GeometricLength ? letters.mean / xi : 1.0 / xi;
  }
};

inline long sample_geometric(double xi, Rng& rng) {
  // number of trials up to and including the first success
  const double u = uniform01(rng);
  return 1 + static_cast<long>(std::floor(std::log(u) / std::log1p(-xi)));
}

inline long sample_block_height(const BlockHeightLaw& law, Rng& rng) {
  const long L = sample_geometric(law.xi, rng);
  if (law.reading == WordReading::GeometricHeight) return L;
  long h = 0;
  for (long i = 0; i < L; ++i) h += law.letters.sample(rng);
  return h;
}

/// Residual time to the next renewal under the stationary law P(res = r) ∝ P(h > r).
/// Drawn as a uniform position inside a size-biased block.
inline long sample_stationary_residual(const BlockHeightLaw& law, Rng& rng) {
  long biased;
  if (law.reading == WordReading::GeometricHeight) {
    biased = sample_geometric(law.xi, rng) + sample_geometric(law.xi, rng) - 1;
  } else {
    // size-biasing h = sum of L letters: L size-biased, one letter size-biased
    const long L = sample_geometric(law.xi, rng) + sample_geometric(law.xi, rng) - 1;
    biased = law.letters.sample_size_biased(rng);
    for (long i = 1; i < L; ++i) biased += law.letters.sample(rng);
  }
  std::uniform_int_distribution<long> pos(0, biased - 1);
  return pos(rng);
}

struct MeetingSample {
  long T = 0;
  bool censored = false;
};

/// First common renewal epoch of two independent stationary renewal sequences.
inline MeetingSample meeting_time(const BlockHeightLaw& law, Rng& rng, long cap = 10'000'000) {
  long a = sample_stationary_residual(law, rng);
  long b = sample_stationary_residual(law, rng);
  while (a != b) {
    if (std::min(a, b) > cap) return {cap, true};
    if (a < b) a += sample_block_height(law, rng);
    else b += sample_block_height(law, rng);
  }
  if (a > cap) return {cap, true};
  return {a, false};
}

/// Exact pmf of h on 0..D by P_h = xi P_R + (1 - xi) P_R * P_h.
inline std::vector<double> block_height_pmf(const BlockHeightLaw& law, std::size_t D) {
  std::vector<double> pr(D + 1, 0.0), ph(D + 1, 0.0);
  if (law.reading == WordReading::GeometricHeight) {
    for (std::size_t n = 1; n <= D; ++n) ph[n] = law.xi * std::pow(1.0 - law.xi, static_cast<double>(n - 1));
    return ph;
  }
  const auto& s = law.letters.surv;
  for (std::size_t n = 1; n <= D; ++n) {
    const double hi = n - 1 < s.size() ? s[n - 1] : 0.0;
    const double lo = n < s.size() ? s[n] : 0.0;
    pr[n] = hi - lo;
  }
  for (std::size_t n = 1; n <= D; ++n) {
    double conv = 0;
    for (std::size_t k = 1; k < n; ++k) conv += pr[k] * ph[n - k];
    ph[n] = law.xi * pr[n] + (1.0 - law.xi) * conv;
  }
  return ph;
}

/// P(h > n) restricted to the table, n = 0..D.
inline std::vector<double> survival_from_pmf(const std::vector<double>& pmf) {
  std::vector<double> s(pmf.size());
  double tail = 0;
  for (std::size_t n = pmf.size(); n-- > 0;) {
    s[n] = tail;
    tail += pmf[n];
  }
  return s;
}

/// Renewal sequence u_n = P(renewal at n | renewal at 0) and the stationary
/// autocovariance of the renewal indicator, (u_n - 1/mu) / mu.
inline std::vector<double> renewal_autocovariance(const std::vector<double>& pmf, double mu, std::size_t N) {
  require(pmf.size() > N, "renewal_autocovariance: pmf table too short");
  std::vector<double> u(N + 1, 0.0), cov(N + 1);
  u[0] = 1.0;
  for (std::size_t n = 1; n <= N; ++n) {
    double acc = 0;
    for (std::size_t k = 1; k <= n; ++k) acc += pmf[k] * u[n - k];
    u[n] = acc;
  }
  for (std::size_t n = 0; n <= N; ++n) cov[n] = (u[n] - 1.0 / mu) / mu;
  return cov;
}

struct TailReport {
  std::vector<long> grid;
  std::vector<double> survival;     // empirical P(X > n) or P(X >= n)
  std::vector<std::size_t> counts;  // exceedance counts
  std::vector<bool> used;
  double slope = std::numeric_limits<double>::quiet_NaN();
  double slope_stderr = 0.0;
  double band_lo = 0.0, band_hi = 0.0;
  bool widened = false;  // some grid points had too few exceedances
  double c1 = std::numeric_limits<double>::quiet_NaN();  // min P / z_n
  double c2 = std::numeric_limits<double>::quiet_NaN();  // max P n^p
  std::size_t min_count = 10;
};

/// Log-log survival fit on a geometric grid over [n_lo, n_hi]. Only grid points
/// with at least min_count exceedances enter the fit; the band is slope ± 2 se,
/// widened to ± 0.5 when fewer than 4 points remain.
inline TailReport tail_report(std::vector<long> samples, double p, long n_lo, long n_hi, int points,
                              const ZLadder* ladder = nullptr, bool inclusive = false, std::size_t min_count = 10) {
  require(samples.size() >= 100000, "tail_report: need at least 1e5 samples");
  std::sort(samples.begin(), samples.end());
  TailReport rep;
  rep.min_count = min_count;
  rep.grid = stats::geometric_grid(n_lo, n_hi, points);
  const double N = static_cast<double>(samples.size());
  std::vector<double> xs, ys;
  for (long n : rep.grid) {
    const auto it = inclusive ? std::lower_bound(samples.begin(), samples.end(), n)
                              : std::upper_bound(samples.begin(), samples.end(), n);
    const auto cnt = static_cast<std::size_t>(samples.end() - it);
    const double s = static_cast<double>(cnt) / N;
    rep.counts.push_back(cnt);
    rep.survival.push_back(s);
    const bool ok = cnt >= min_count;
    rep.used.push_back(ok);
    if (!ok) {
      rep.widened = true;
      continue;
    }
    xs.push_back(std::log(static_cast<double>(n)));
    ys.push_back(std::log(s));
    const double c2 = s * std::pow(static_cast<double>(n), p);
    rep.c2 = std::isnan(rep.c2) ? c2 : std::max(rep.c2, c2);
    if (ladder && static_cast<std::size_t>(n) < ladder->z.size()) {
      const double c1 = s / ladder->z[static_cast<std::size_t>(n)];
      rep.c1 = std::isnan(rep.c1) ? c1 : std::min(rep.c1, c1);
    }
  }
  if (xs.size() >= 2) {
    const auto fit = stats::fit_line(xs, ys);
    rep.slope = fit.slope;
    rep.slope_stderr = fit.slope_stderr;
    const double half = xs.size() >= 4 ? 2.0 * fit.slope_stderr : 0.5;
    rep.band_lo = fit.slope - half;
    rep.band_hi = fit.slope + half;
  }
  return rep;
}

struct TowerRun {
  std::vector<long> heights;
  std::vector<long> meetings;
  std::size_t censored = 0;
};

/// Draws count block heights and count meeting times; sample i uses stream (seed, i)
/// so the output does not depend on the thread count.
inline TowerRun simulate_tower(const BlockHeightLaw& law, std::size_t count, std::uint64_t seed, int threads,
                               long cap = 10'000'000) {
  TowerRun run;
  run.heights.resize(count);
  run.meetings.resize(count);
  std::vector<char> cens(count, 0);
  const std::size_t chunk = 4096;
  const std::size_t chunks = (count + chunk - 1) / chunk;
  parallel_for(chunks, threads, [&](std::size_t c) {
    Rng rng = make_stream(seed, c);
    for (std::size_t i = c * chunk; i < std::min(count, (c + 1) * chunk); ++i) {
      run.heights[i] = sample_block_height(law, rng);
      const auto m = meeting_time(law, rng, cap);
      run.meetings[i] = m.T;
      cens[i] = m.censored;
    }
  });
  for (char c : cens) run.censored += static_cast<std::size_t>(c);
  return run;
}

}  // namespace intermittent
