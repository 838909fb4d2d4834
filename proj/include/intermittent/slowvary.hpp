#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "intermittent/error.hpp"

namespace intermittent {

enum class SvFamily { Constant, InverseLog, LogPower };
enum class SvOrientation { AtZero, AtInfinity };

/// Closed-form slowly varying function.
///
/// With L = ln(1/x) at zero and L = ln(x) at infinity the value is a * L^(-b);
/// the inverse-log family is the b = 1 case and the constant family ignores L.
/// At infinity any real b is accepted, so ln(x) itself is LogPower with b = -1.
struct SlowVaryFn {
  SvFamily family = SvFamily::Constant;
  SvOrientation orientation = SvOrientation::AtZero;
  double a = 1.0;
  double b = 0.0;

  static SlowVaryFn constant(double c) { return {SvFamily::Constant, SvOrientation::AtZero, c, 0.0}; }
  static SlowVaryFn inverse_log(double a, SvOrientation o = SvOrientation::AtZero) {
    return {SvFamily::InverseLog, o, a, 1.0};
  }
  static SlowVaryFn log_power(double a, double b, SvOrientation o = SvOrientation::AtZero) {
    return {SvFamily::LogPower, o, a, b};
  }

  double exponent() const {
    switch (family) {
      case SvFamily::Constant: return 0.0;
      case SvFamily::InverseLog: return 1.0;
      case SvFamily::LogPower: return b;
    }
    return 0.0;
  }

  bool in_domain(double x) const {
    if (!(x > 0) || !std::isfinite(x)) return false;
    return orientation == SvOrientation::AtZero ? x < 1.0 : x > 1.0;
  }

  void validate() const {
    require(a > 0 && std::isfinite(a), "slowly varying function: scale must be positive");
    if (family == SvFamily::LogPower && orientation == SvOrientation::AtZero)
      require(b >= 0 && std::isfinite(b), "slowly varying function: log-power exponent at zero must be >= 0");
  }
};

/// Accepts "const", "invlog", "logpow".
inline SlowVaryFn slowvary_from_tag(const std::string& tag, double a, double b,
                                    SvOrientation o = SvOrientation::AtZero) {
  SlowVaryFn fn;
  if (tag == "const") {
    fn = SlowVaryFn::constant(a);
  } else if (tag == "invlog") {
    fn = SlowVaryFn::inverse_log(a, o);
  } else if (tag == "logpow") {
    fn = SlowVaryFn::log_power(a, b, o);
  } else {
    throw InvalidInput("unknown slowly varying family '" + tag + "'");
  }
  fn.orientation = o;
  fn.validate();
  return fn;
}

inline std::string to_tag(SvFamily f) {
  switch (f) {
    case SvFamily::Constant: return "const";
    case SvFamily::InverseLog: return "invlog";
    case SvFamily::LogPower: return "logpow";
  }
  return "?";
}

struct SvValue {
  double value;
  double d1;
  double d2;
};

inline SvValue eval(const SlowVaryFn& fn, double x) {
  if (!fn.in_domain(x)) throw InvalidInput("slowly varying function evaluated outside its domain");
  if (fn.family == SvFamily::Constant) return {fn.a, 0.0, 0.0};
  const double b = fn.exponent();
  const bool at_zero = fn.orientation == SvOrientation::AtZero;
  const double L = at_zero ? -std::log(x) : std::log(x);
  const double v = fn.a * std::pow(L, -b);
  const double p1 = fn.a * b * std::pow(L, -b - 1.0);  // a b L^(-b-1)
  const double p2 = fn.a * b * (b + 1.0) * std::pow(L, -b - 2.0);
  // dL/dx = -1/x at zero, +1/x at infinity.
  if (at_zero) return {v, p1 / x, (p2 - p1) / (x * x)};
  return {v, -p1 / x, (p2 + p1) / (x * x)};
}

inline double value(const SlowVaryFn& fn, double x) { return eval(fn, x).value; }

struct PotterReport {
  std::vector<double> grid;
  double worst_violation = 0.0;       // max excess factor over the whole grid, 1 means on the bound
  double worst_violation_tail = 0.0;  // same, restricted to pairs past x0
  double x0 = std::numeric_limits<double>::quiet_NaN();
  std::size_t violating_pairs = 0;
  bool admissible = false;  // some x0 in the grid works
};

/// Pair scan of the Potter bounds (1/A)(y/x)^(-delta) <= l(y)/l(x) <= A (y/x)^delta.
///
/// "Past x0" means x, y >= x0 at infinity and x, y <= x0 at zero. The reported
/// x0 is the least restrictive grid point beyond which no pair violates.
inline PotterReport potter_report(const SlowVaryFn& fn, double A, double delta, double x_lo, double x_hi,
                                  int n_samples) {
  require(A > 1, "potter_report: A must exceed 1");
  require(delta > 0, "potter_report: delta must be positive");
  require(n_samples >= 2, "potter_report: need at least two samples");
  require(x_lo < x_hi && fn.in_domain(x_lo) && fn.in_domain(x_hi), "potter_report: bad sample range");
  PotterReport rep;
  const auto n = static_cast<std::size_t>(n_samples);
  rep.grid.resize(n);
  std::vector<double> lv(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n - 1);
    rep.grid[i] = std::exp(std::log(x_lo) + t * (std::log(x_hi) - std::log(x_lo)));
    lv[i] = std::log(value(fn, rep.grid[i]));
  }
  const bool at_zero = fn.orientation == SvOrientation::AtZero;
  // excess[i][j] in log space; tail membership of a pair is decided by its
  // outermost point, so track the worst excess per outermost index.
  std::vector<double> worst_from(n, -std::numeric_limits<double>::infinity());
  const double logA = std::log(A);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double lr = lv[j] - lv[i];
      const double bound = logA + delta * (std::log(rep.grid[j]) - std::log(rep.grid[i]));
      const double excess = std::abs(lr) - bound;
      const std::size_t inner = at_zero ? j : i;  // the point nearer the threshold
      worst_from[inner] = std::max(worst_from[inner], excess);
      rep.worst_violation = std::max(rep.worst_violation, std::exp(excess));
      if (excess > 0) ++rep.violating_pairs;
    }
  }
  // At infinity the tail past grid[k] holds pairs with inner index >= k.
  double running = -std::numeric_limits<double>::infinity();
  std::ptrdiff_t best = -1;
  if (!at_zero) {
    for (std::ptrdiff_t k = static_cast<std::ptrdiff_t>(n) - 1; k >= 0; --k) {
      running = std::max(running, worst_from[static_cast<std::size_t>(k)]);
      if (running > 0) break;
      best = k;
      rep.worst_violation_tail = std::exp(running);
    }
  } else {
    for (std::size_t k = 0; k < n; ++k) {
      running = std::max(running, worst_from[k]);
      if (running > 0) break;
      best = static_cast<std::ptrdiff_t>(k);
      rep.worst_violation_tail = std::exp(running);
    }
  }
  if (best >= 0) {
    rep.admissible = true;
    rep.x0 = rep.grid[static_cast<std::size_t>(best)];
  }
  return rep;
}

/// Sequence u_n = fn(n + e) for n = 0..n_max, so logarithmic families stay >= 1 in L.
inline std::vector<double> slowvary_sequence(const SlowVaryFn& fn, std::size_t n_max) {
  require(fn.orientation == SvOrientation::AtInfinity || fn.family == SvFamily::Constant,
          "slowvary_sequence: needs an at-infinity family");
  std::vector<double> out(n_max + 1);
  for (std::size_t n = 0; n <= n_max; ++n) {
    out[n] = fn.family == SvFamily::Constant ? fn.a : value(fn, static_cast<double>(n) + M_E);
  }
  return out;
}

struct ConvolutionReport {
  double c_hat = 0.0;
  std::vector<double> ratios;
};

/// Ratio of sum_{i+j=n} u_i v_j / ((i+1)^r (j+1)^s) to u_n/(n+1)^r + v_n/(n+1)^s.
inline ConvolutionReport convolution_bound_check(const std::vector<double>& u, const std::vector<double>& v,
                                                 double r, double s, std::size_t n_max) {
  require(r > 1 && s > 1, "convolution_bound_check: exponents must exceed 1");
  require(u.size() > n_max && v.size() > n_max, "convolution_bound_check: sequences too short");
  std::vector<double> ur(n_max + 1), vs(n_max + 1);
  for (std::size_t i = 0; i <= n_max; ++i) {
    require(u[i] > 0 && v[i] > 0, "convolution_bound_check: sequences must be positive");
    ur[i] = u[i] * std::pow(static_cast<double>(i + 1), -r);
    vs[i] = v[i] * std::pow(static_cast<double>(i + 1), -s);
  }
  ConvolutionReport rep;
  rep.ratios.resize(n_max + 1);
  for (std::size_t n = 0; n <= n_max; ++n) {
    double acc = 0;
    for (std::size_t i = 0; i <= n; ++i) acc += ur[i] * vs[n - i];
    rep.ratios[n] = acc / (ur[n] + vs[n]);
    rep.c_hat = std::max(rep.c_hat, rep.ratios[n]);
  }
  return rep;
}

}  // namespace intermittent
