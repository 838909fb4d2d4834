#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "intermittent/error.hpp"
#include "intermittent/slowvary.hpp"

namespace intermittent {

/// Holland map f(x) = x(1 + x^gamma rho(x)) on [0, 1/2], 2x - 1 on (1/2, 1].
struct MapSpec {
  double gamma = 0.5;
  SlowVaryFn rho = SlowVaryFn::constant(1.0);
  bool normalized = true;

  double p() const { return 1.0 / gamma; }

  /// Rescales rho so that (1/2)^gamma rho(1/2) = 1, hence f(1/2) = 1.
  static MapSpec make(double gamma, SlowVaryFn rho) {
    require(gamma > 0 && gamma < 1, "map: gamma must lie in (0, 1)");
    require(rho.orientation == SvOrientation::AtZero, "map: rho must be slowly varying at zero");
    rho.validate();
    rho.a /= std::pow(0.5, gamma) * value(rho, 0.5);
    return {gamma, rho, true};
  }

  /// Leaves rho untouched and allows gamma = 1; f(1/2) is then generally not 1.
  /// Only used to reproduce hand-computable cases such as x(1 + x).
  static MapSpec unnormalized(double gamma, SlowVaryFn rho) {
    require(gamma > 0 && gamma <= 1, "map: gamma must lie in (0, 1]");
    require(rho.orientation == SvOrientation::AtZero, "map: rho must be slowly varying at zero");
    rho.validate();
    return {gamma, rho, false};
  }

  /// x^gamma rho(x), the relative increment of the left branch.
  double increment(double x) const { return x > 0 ? std::pow(x, gamma) * value(rho, x) : 0.0; }
};

struct MapValue {
  double f;
  double df;
};

inline MapValue evaluate(const MapSpec& map, double x) {
  if (!(x >= 0 && x <= 1)) throw InvalidInput("evaluate: x outside [0, 1]");
  if (x > 0.5) return {2.0 * x - 1.0, 2.0};
  if (x == 0) return {0.0, 1.0};
  const SvValue r = eval(map.rho, x);
  const double xg = std::pow(x, map.gamma);
  return {x * (1.0 + xg * r.value), 1.0 + (map.gamma + 1.0) * xg * r.value + xg * x * r.d1};
}

enum class Branch { Left, Right };

inline constexpr double kDefaultInverseTol = 1e-14;

/// Preimage of x under the chosen branch.
inline double inverse_branch(const MapSpec& map, Branch branch, double x, double tol = kDefaultInverseTol) {
  require(tol > 0, "inverse_branch: tol must be positive");
  if (!(x > 0 && x < 1) && !(x == 1 && branch == Branch::Left))
    throw InvalidInput("inverse_branch: x outside (0, 1)");
  if (branch == Branch::Right) return 0.5 * (x + 1.0);
  // Residual written as (y - x) + y^(1+gamma) rho(y) to keep precision near 0.
  auto residual = [&](double y) { return (y - x) + y * map.increment(y); };
  // Since y * increment(y) is increasing, y0 = x / (1 + increment(x)) lies below the
  // root and x - y0 * increment(y0) above it.
  double lo = x / (1.0 + map.increment(std::min(x, 0.5)));
  double hi = std::min(x - lo * map.increment(lo), 0.5);
  // rounding can leave hi a hair below the root
  for (int k = 0; residual(hi) < 0; ++k) {
    if (hi >= 0.5) throw InvalidInput("inverse_branch: x above the image of the left branch");
    if (k > 60) throw NumericFailure("inverse_branch: could not bracket", lo, hi);
    hi = std::min(0.5, hi * (1.0 + 1e-12 * std::ldexp(1.0, k)));
  }
  int guard = 0;
  while (residual(lo) > 0) {
    lo *= 0.5;
    if (++guard > 2000) throw NumericFailure("inverse_branch: could not bracket", lo, hi);
  }
  int iter = 0;
  while (hi - lo > 1e-3 * hi) {
    const double mid = 0.5 * (lo + hi);
    (residual(mid) > 0 ? hi : lo) = mid;
    if (++iter > 200) throw NumericFailure("inverse_branch: bisection stalled", lo, hi);
  }
  double y = 0.5 * (lo + hi);
  for (int k = 0; k < 100; ++k) {
    const double g = residual(y);
    if (g == 0) return y;
    (g > 0 ? hi : lo) = y;
    const double step = g / evaluate(map, y).df;
    double next = y - step;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - y) <= tol * y) return next;
    y = next;
    if (hi - lo <= tol * lo) return y;
  }
  throw NumericFailure("inverse_branch: Newton polish did not converge", lo, hi);
}

inline double v0(const MapSpec& map, double x) { return inverse_branch(map, Branch::Left, x); }
inline double v1(double x) { return 0.5 * (x + 1.0); }

/// Ladder of preimages of the neutral fixed point.
///
/// z holds z_0 .. z_{N+1}; lengths[n] = lambda(J_n) for n = 0 .. N, with
/// J_n = (z_{n+1}, z_n]. Since f(z_{n+1}) = z_n the length equals
/// z_{n+1}^(1+gamma) rho(z_{n+1}), which avoids cancellation for large n.
struct ZLadder {
  std::vector<double> z;
  std::vector<double> lengths;

  std::size_t N() const { return z.size() - 2; }
  double tail(std::size_t n) const { return z.at(n); }
  double u(std::size_t n) const { return -std::log(z.at(n)) / static_cast<double>(n); }
  double length(std::size_t n) const { return lengths.at(n); }

  /// k with y in J_k, for y in (z_{N+1}, 1]; J_0 = Y.
  std::size_t level(double y) const {
    if (!(y > z.back())) throw LadderExhausted("point below the deepest ladder rung");
    if (y > z[1]) return 0;
    // first index with z[i] < y, searching the decreasing array
    const auto it = std::upper_bound(z.begin(), z.end(), y, [](double v, double e) { return v > e; });
    return static_cast<std::size_t>(it - z.begin()) - 1;
  }
};

inline double asymptotic_ratio(const MapSpec& map, const ZLadder& ladder, std::size_t n) {
  return map.increment(ladder.z.at(n)) * map.gamma * static_cast<double>(n);
}

inline ZLadder z_ladder(const MapSpec& map, std::size_t N) {
  require(N >= 2, "z_ladder: N must be at least 2");
  require(N <= 1'000'000, "z_ladder: N is capped at 10^6");
  ZLadder lad;
  lad.z.resize(N + 2);
  lad.z[0] = 1.0;
  lad.z[1] = 0.5;
  for (std::size_t n = 1; n <= N; ++n) lad.z[n + 1] = v0(map, lad.z[n]);
  lad.lengths.resize(N + 1);
  lad.lengths[0] = 0.5;
  for (std::size_t n = 1; n <= N; ++n) lad.lengths[n] = lad.z[n + 1] * map.increment(lad.z[n + 1]);
  return lad;
}

/// First return time to Y = (1/2, 1] via ladder lookup.
inline long return_time(const ZLadder& ladder, double x) {
  if (!(x > 0.5 && x <= 1)) throw InvalidInput("return_time: x outside Y");
  const double y = 2.0 * x - 1.0;
  if (y > 0.5) return 1;
  return static_cast<long>(ladder.level(y)) + 1;
}

inline long return_time(const MapSpec&, double x, const ZLadder& ladder) { return return_time(ladder, x); }

/// Return time by direct iteration, capped.
inline long return_time_direct(const MapSpec& map, double x, long cap) {
  if (!(x > 0.5 && x <= 1)) throw InvalidInput("return_time_direct: x outside Y");
  double y = evaluate(map, x).f;
  long r = 1;
  while (y <= 0.5) {
    if (++r > cap) throw LadderExhausted("return_time_direct: cap reached");
    y = evaluate(map, y).f;
  }
  return r;
}

struct BranchIterate {
  double point;       // v0^n(x)
  double derivative;  // (v0^n)'(x)
};

inline BranchIterate branch_iterate(const MapSpec& map, std::size_t n, double x) {
  require(x > 0 && x < 1 + 1e-15, "branch_derivative_product: x outside (0, 1)");
  double y = x, prod = 1.0;
  for (std::size_t j = 0; j < n; ++j) {
    y = v0(map, y);
    prod /= evaluate(map, y).df;
  }
  return {y, prod};
}

inline double branch_derivative_product(const MapSpec& map, std::size_t n, double x) {
  return branch_iterate(map, n, x).derivative;
}

}  // namespace intermittent
