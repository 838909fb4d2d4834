#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "intermittent/error.hpp"

namespace intermittent::stats {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  std::size_t points = 0;
};

/// Ordinary least squares y = intercept + slope * x.
inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), "fit_line: size mismatch");
  require(x.size() >= 2, "fit_line: need at least two points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  require(sxx > 0, "fit_line: degenerate abscissae");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.points = x.size();
  if (x.size() > 2) {
    double sse = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = y[i] - fit.intercept - fit.slope * x[i];
      sse += r * r;
    }
    fit.slope_stderr = std::sqrt(sse / (n - 2) / sxx);
  }
  return fit;
}

/// Fit of log(value) against log(n); nonpositive values are skipped.
inline LineFit loglog_fit(std::span<const double> n, std::span<const double> value) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < n.size(); ++i) {
    if (n[i] > 0 && value[i] > 0 && std::isfinite(value[i])) {
      lx.push_back(std::log(n[i]));
      ly.push_back(std::log(value[i]));
    }
  }
  return fit_line(lx, ly);
}

/// Distinct integers roughly geometrically spaced in [lo, hi].
inline std::vector<long> geometric_grid(long lo, long hi, int points) {
  require(lo >= 1 && hi >= lo && points >= 2, "geometric_grid: bad range");
  std::vector<long> out;
  const double a = std::log(static_cast<double>(lo));
  const double b = std::log(static_cast<double>(hi));
  for (int i = 0; i < points; ++i) {
    const long v = std::lround(std::exp(a + (b - a) * i / (points - 1)));
    if (out.empty() || v > out.back()) out.push_back(v);
  }
  return out;
}

inline double mean(std::span<const double> x) {
  return x.empty() ? 0.0 : std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

inline double variance(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double s = 0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Kolmogorov limiting survival function Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2).
inline double kolmogorov_q(double lambda) {
  if (lambda < 1e-3) return 1.0;
  if (lambda < 1.18) {
    // small-lambda form via the Jacobi theta identity
    const double y = std::exp(-M_PI * M_PI / (8.0 * lambda * lambda));
    double s = 0;
    for (int k = 1; k <= 9; k += 2) s += std::pow(y, k * k);
    return std::clamp(1.0 - std::sqrt(2.0 * M_PI) / lambda * s, 0.0, 1.0);
  }
  double q = 0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    q += (k % 2 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(q, 0.0, 1.0);
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

inline double ks_p_value(double d, double effective_n) {
  const double en = std::sqrt(effective_n);
  return kolmogorov_q((en + 0.12 + 0.11 / en) * d);
}

inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  require(!a.empty() && !b.empty(), "ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return {d, ks_p_value(d, na * nb / (na + nb))};
}

inline KsResult ks_one_sample(std::vector<double> a, const std::function<double(double)>& cdf) {
  require(!a.empty(), "ks_one_sample: empty sample");
  std::sort(a.begin(), a.end());
  const double n = static_cast<double>(a.size());
  double d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double f = cdf(a[i]);
    d = std::max({d, (static_cast<double>(i) + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return {d, ks_p_value(d, n)};
}

}  // namespace intermittent::stats
