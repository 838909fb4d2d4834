#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "intermittent/error.hpp"

namespace intermittent {

/// Piecewise-linear path on [0, 1] through (k/n, values[k]).
struct PathSample {
  std::size_t n = 0;
  std::vector<double> values;

  double at(double t) const {
    const double pos = t * static_cast<double>(n);
    const auto k = std::min(static_cast<std::size_t>(pos), n - 1);
    const double frac = pos - static_cast<double>(k);
    return values[k] + frac * (values[k + 1] - values[k]);
  }
};

struct HolderResult {
  std::vector<double> modulus;  // w_eta(x, delta) per requested delta
  double norm = 0.0;            // w_eta(x, 1) + |x(0)|
  double sup_abs = 0.0;
  double sup = 0.0;
  double endpoint = 0.0;
  double integral = 0.0;
};

namespace detail {

/// Range min/max over index windows in O(1) after O(n log n) setup.
class SparseTable {
 public:
  explicit SparseTable(const std::vector<double>& v) {
    const std::size_t n = v.size();
    levels_ = 1;
    while ((std::size_t{1} << levels_) <= n) ++levels_;
    mx_.assign(levels_, std::vector<double>());
    mn_.assign(levels_, std::vector<double>());
    mx_[0] = v;
    mn_[0] = v;
    for (std::size_t l = 1; l < levels_; ++l) {
      const std::size_t span = std::size_t{1} << l;
      if (span > n) break;
      mx_[l].resize(n - span + 1);
      mn_[l].resize(n - span + 1);
      for (std::size_t i = 0; i + span <= n; ++i) {
        mx_[l][i] = std::max(mx_[l - 1][i], mx_[l - 1][i + span / 2]);
        mn_[l][i] = std::min(mn_[l - 1][i], mn_[l - 1][i + span / 2]);
      }
    }
  }
  // inclusive [a, b]
  std::pair<double, double> minmax(std::size_t a, std::size_t b) const {
    const std::size_t len = b - a + 1;
    std::size_t l = 0;
    while ((std::size_t{2} << l) <= len) ++l;
    const std::size_t off = std::size_t{1} << l;
    return {std::min(mn_[l][a], mn_[l][b + 1 - off]), std::max(mx_[l][a], mx_[l][b + 1 - off])};
  }

 private:
  std::size_t levels_ = 0;
  std::vector<std::vector<double>> mx_, mn_;
};

/// Candidates that are not vertex pairs: single segments and pairs at gap exactly delta.
inline double non_vertex_candidates(const PathSample& p, double eta, double delta) {
  const double n = static_cast<double>(p.n);
  double best = 0;
  const double g = std::min(delta, 1.0 / n);
  for (std::size_t k = 0; k < p.n; ++k) {
    const double slope = (p.values[k + 1] - p.values[k]) * n;
    best = std::max(best, std::abs(slope) * std::pow(g, 1.0 - eta));
  }
  if (delta < 1.0) {
    const double d = std::pow(delta, eta);
    for (std::size_t k = 0; k <= p.n; ++k) {
      const double t = static_cast<double>(k) / n;
      if (t + delta <= 1.0) best = std::max(best, std::abs(p.at(t + delta) - p.values[k]) / d);
      if (t - delta >= 0.0) best = std::max(best, std::abs(p.values[k] - p.at(t - delta)) / d);
    }
  }
  return best;
}

}  // namespace detail

/// Exhaustive O(n^2) vertex-pair scan plus the non-vertex candidates.
inline double holder_modulus_exhaustive(const PathSample& p, double eta, double delta) {
  require(eta > 0 && eta < 1, "holder: eta must lie in (0, 1)");
  require(delta > 0, "holder: delta must be positive");
  const double n = static_cast<double>(p.n);
  const auto G = static_cast<std::size_t>(std::min(std::floor(delta * n * (1.0 + 1e-12)), n));
  double best = detail::non_vertex_candidates(p, eta, delta);
  for (std::size_t i = 0; i <= p.n; ++i)
    for (std::size_t j = i + 1; j <= std::min(p.n, i + G); ++j)
      best = std::max(best, std::abs(p.values[j] - p.values[i]) / std::pow(static_cast<double>(j - i) / n, eta));
  return best;
}

/// Exact w_eta(x, delta) by branch and bound over gap ranges.
///
/// For a gap range [g0, g1] and left vertex i, |x_j - x_i| / (g / n)^eta is at
/// most max(|max - x_i|, |x_i - min|) / (g0 / n)^eta over the window, so whole
/// ranges are discarded once this bound drops below the incumbent.
inline double holder_modulus(const PathSample& p, double eta, double delta) {
  require(eta > 0 && eta < 1, "holder: eta must lie in (0, 1)");
  require(delta > 0, "holder: delta must be positive");
  const std::size_t N = p.n;
  const double n = static_cast<double>(N);
  const auto G = static_cast<std::size_t>(std::min(std::floor(delta * n * (1.0 + 1e-12)), n));
  double best = detail::non_vertex_candidates(p, eta, delta);
  if (G == 0) return best;
  const detail::SparseTable table(p.values);
  std::vector<double> inv(G + 1, 0.0);  // (g / n)^-eta
  for (std::size_t g = 1; g <= G; ++g) inv[g] = std::pow(static_cast<double>(g) / n, -eta);
  // seed with the global extremes
  const auto [imin, imax] = std::minmax_element(p.values.begin(), p.values.end());
  const auto gap = static_cast<std::size_t>(std::abs(imax - imin));
  if (gap >= 1 && gap <= G) best = std::max(best, (*imax - *imin) / std::pow(static_cast<double>(gap) / n, eta));

  std::vector<std::pair<std::size_t, std::size_t>> stack;
  for (std::size_t i = 0; i < N; ++i) {
    const double xi = p.values[i];
    const std::size_t gmax = std::min(G, N - i);
    for (std::size_t g0 = 1; g0 <= gmax; g0 *= 2) stack.emplace_back(g0, std::min(gmax, 2 * g0 - 1));
    while (!stack.empty()) {
      const auto [a, b] = stack.back();
      stack.pop_back();
      if (a == b) {
        best = std::max(best, std::abs(p.values[i + a] - xi) * inv[a]);
        continue;
      }
      const auto [lo, hi] = table.minmax(i + a, i + b);
      const double bound = std::max(hi - xi, xi - lo) * inv[a];
      if (bound <= best) continue;
      const std::size_t mid = a + (b - a) / 2;
      stack.emplace_back(a, mid);
      stack.emplace_back(mid + 1, b);
    }
  }
  return best;
}

inline HolderResult holder_functionals(const PathSample& p, double eta, const std::vector<double>& deltas,
                                       bool exhaustive = false) {
  require(p.n >= 1 && p.values.size() == p.n + 1, "holder_functionals: malformed path");
  HolderResult r;
  auto mod = [&](double d) { return exhaustive ? holder_modulus_exhaustive(p, eta, d) : holder_modulus(p, eta, d); };
  for (double d : deltas) r.modulus.push_back(mod(d));
  r.norm = mod(1.0) + std::abs(p.values[0]);
  r.sup = *std::max_element(p.values.begin(), p.values.end());
  for (double v : p.values) r.sup_abs = std::max(r.sup_abs, std::abs(v));
  r.endpoint = p.values.back();
  double s = 0;
  for (std::size_t k = 0; k < p.n; ++k) s += 0.5 * (p.values[k] + p.values[k + 1]);
  r.integral = s / static_cast<double>(p.n);
  return r;
}

}  // namespace intermittent
