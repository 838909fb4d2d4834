#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "intermittent/error.hpp"
#include "intermittent/slowvary.hpp"

using namespace intermittent;

TEST(SlowVary, ConstantFamilyHasZeroDerivatives) {
  const SvValue v = eval(SlowVaryFn::constant(1.0), 0.3);
  EXPECT_EQ(v.value, 1.0);
  EXPECT_EQ(v.d1, 0.0);
  EXPECT_EQ(v.d2, 0.0);
}

TEST(SlowVary, InverseLogMatchesHandDerivative) {
  // L = ln(1/x) = 3 keeps the second derivative a (2 - L) / (x^2 L^3) away from zero
  const double x = std::exp(-3.0);
  const auto fn = SlowVaryFn::inverse_log(1.0);
  const SvValue v = eval(fn, x);
  EXPECT_NEAR(v.value, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(v.d1, 1.0 / (x * 9.0), 1e-12 / x);
  EXPECT_NEAR(v.d2, -1.0 / (x * x * 27.0), 1e-12 / (x * x));
  const double h = 1e-6 * x;
  const double fd = (value(fn, x + h) - value(fn, x - h)) / (2 * h);
  EXPECT_NEAR(fd, v.d1, 1e-6 * std::abs(v.d1));
  const double fd2 = (eval(fn, x + h).d1 - eval(fn, x - h).d1) / (2 * h);
  EXPECT_NEAR(fd2, v.d2, 1e-5 * std::abs(v.d2));
}

TEST(SlowVary, LogPowerAtOneOverE) {
  EXPECT_NEAR(value(SlowVaryFn::log_power(1.0, 1.0), std::exp(-1.0)), 1.0, 1e-15);
}

TEST(SlowVary, AtInfinityDerivativesMatchFiniteDifferences) {
  const auto fn = SlowVaryFn::log_power(2.0, 1.5, SvOrientation::AtInfinity);
  for (double x : {3.0, 50.0, 1e4}) {
    const SvValue v = eval(fn, x);
    const double h = 1e-5 * x;
    EXPECT_NEAR((value(fn, x + h) - value(fn, x - h)) / (2 * h), v.d1, 1e-6 * std::abs(v.d1));
  }
}

TEST(SlowVary, DomainAndTagErrors) {
  EXPECT_THROW(eval(SlowVaryFn::inverse_log(1.0), 1.5), InvalidInput);
  EXPECT_THROW(eval(SlowVaryFn::inverse_log(1.0, SvOrientation::AtInfinity), 0.5), InvalidInput);
  EXPECT_THROW(slowvary_from_tag("cosine", 1, 1), InvalidInput);
  EXPECT_THROW(slowvary_from_tag("const", -1, 0), InvalidInput);
  EXPECT_EQ(slowvary_from_tag("logpow", 1, 2).family, SvFamily::LogPower);
}

namespace {

// Direct pair scan of the Potter bounds past x0 on the report's own grid.
std::size_t violations_past(const SlowVaryFn& fn, const PotterReport& rep, double A, double delta) {
  std::size_t bad = 0;
  const bool at_inf = fn.orientation == SvOrientation::AtInfinity;
  for (double x : rep.grid)
    for (double y : rep.grid) {
      if (!(x <= y)) continue;
      if (at_inf ? x < rep.x0 : y > rep.x0) continue;
      const double r = value(fn, y) / value(fn, x);
      const double q = y / x;
      if (r > A * std::pow(q, delta) * (1 + 1e-12) || r < std::pow(q, -delta) / A * (1 - 1e-12)) ++bad;
    }
  return bad;
}

}  // namespace

TEST(Potter, ConstantHasNoViolations) {
  const auto rep = potter_report(SlowVaryFn::constant(3.0), 1.1, 0.01, 1e-8, 0.5, 200);
  EXPECT_EQ(rep.violating_pairs, 0u);
  EXPECT_LE(rep.worst_violation, 1.0);
  EXPECT_TRUE(rep.admissible);
}

TEST(Potter, LogAtInfinityAgreesWithPairScan) {
  // l(x) = ln x is the log-power family with exponent -1 at infinity
  const auto fn = SlowVaryFn::log_power(1.0, -1.0, SvOrientation::AtInfinity);
  const auto rep = potter_report(fn, 2.0, 0.1, 10.0, 1e6, 300);
  ASSERT_TRUE(rep.admissible);
  EXPECT_EQ(violations_past(fn, rep, 2.0, 0.1), 0u);
}

TEST(Potter, InverseLogMappedToInfinityAgreesWithPairScan) {
  const auto fn = SlowVaryFn::inverse_log(1.0, SvOrientation::AtInfinity);
  const auto rep = potter_report(fn, 1.5, 0.25, 10.0, 1e6, 300);
  ASSERT_TRUE(rep.admissible);
  EXPECT_EQ(violations_past(fn, rep, 1.5, 0.25), 0u);
}

TEST(Convolution, SingleTermAtZero) {
  const std::vector<double> u{3.0, 1.0}, v{5.0, 1.0};
  const auto rep = convolution_bound_check(u, v, 2.0, 3.0, 0);
  EXPECT_NEAR(rep.ratios[0], 15.0 / 8.0, 1e-15);
}

TEST(Convolution, FlatSequencesMatchDoubleSumAndStayBounded) {
  const std::size_t n_max = 10000;
  const std::vector<double> ones(n_max + 1, 1.0);
  const auto rep = convolution_bound_check(ones, ones, 2.0, 2.0, n_max);
  for (std::size_t n : {1u, 17u, 500u}) {
    double s = 0;
    for (std::size_t i = 0; i <= n; ++i) s += 1.0 / std::pow(i + 1.0, 2) / std::pow(n - i + 1.0, 2);
    EXPECT_NEAR(rep.ratios[n], s / (2.0 / std::pow(n + 1.0, 2)), 1e-12);
  }
  // splitting the sum at n/2 bounds the ratio by 4 zeta(2)
  EXPECT_TRUE(std::isfinite(rep.c_hat));
  EXPECT_LE(rep.c_hat, 4.0 * std::numbers::pi * std::numbers::pi / 6.0);
}

TEST(Convolution, InverseLogWeightsStayBounded) {
  const std::size_t n_max = 10000;
  const auto u = slowvary_sequence(SlowVaryFn::inverse_log(1.0, SvOrientation::AtInfinity), n_max);
  const auto rep = convolution_bound_check(u, u, 3.0, 2.0, n_max);
  ASSERT_TRUE(std::isfinite(rep.c_hat));
  const double early = *std::max_element(rep.ratios.begin(), rep.ratios.begin() + n_max / 2);
  const double late = *std::max_element(rep.ratios.begin() + n_max / 2, rep.ratios.end());
  EXPECT_LE(late, 1.05 * early);
}
