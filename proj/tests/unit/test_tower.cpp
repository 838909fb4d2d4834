#include <gtest/gtest.h>

#include <cmath>

#include "intermittent/tower.hpp"

using namespace intermittent;

namespace {

const ZLadder& ladder() {
  static const ZLadder lad = z_ladder(MapSpec::make(0.25, SlowVaryFn::constant(1.0)), 100000);
  return lad;
}

double mean_of(const std::vector<long>& v) {
  double s = 0;
  for (long x : v) s += static_cast<double>(x);
  return s / static_cast<double>(v.size());
}

}  // namespace

TEST(LetterLaw, MassSumsToOneUpToTruncation) {
  const auto law = LetterLaw::from_ladder(ladder(), 4.0);
  double mass = 0;
  for (std::size_t n = 1; n <= law.depth(); ++n) mass += law.surv[n - 1] - law.surv[n];
  EXPECT_NEAR(mass + law.surv.back(), 1.0, 1e-12);  // 1e5 telescoping terms
  EXPECT_LT(law.surv.back(), 1e-15);
}

TEST(LetterLaw, SamplerMatchesSurvival) {
  const auto law = LetterLaw::pareto(3.0, 1000);
  Rng rng = make_stream(2, 0);
  const std::size_t N = 400000;
  std::size_t over4 = 0, over2000 = 0;
  for (std::size_t i = 0; i < N; ++i) {
    const long r = law.sample(rng);
    over4 += r > 4;
    over2000 += r > 2000;
  }
  EXPECT_NEAR(static_cast<double>(over4) / N, std::pow(4.0, -3.0), 4 * std::sqrt(std::pow(4.0, -3.0) / N));
  // continuous Pareto extension above D
  EXPECT_NEAR(static_cast<double>(over2000) / N, std::pow(2000.0, -3.0), 5e-6);
}

TEST(BlockHeight, UnitLettersGiveGeometricMeanTwo) {
  const BlockHeightLaw law(0.5, LetterLaw::constant_one());
  const auto run = simulate_tower(law, 1'000'000, 1, 0);
  EXPECT_NEAR(mean_of(run.heights), 2.0, 0.04);
}

TEST(BlockHeight, WaldIdentity) {
  const BlockHeightLaw law(0.5, LetterLaw::from_ladder(ladder(), 4.0));
  const auto run = simulate_tower(law, 1'000'000, 2, 0);
  EXPECT_NEAR(mean_of(run.heights), law.letters.mean / law.xi, 0.02 * law.mean());
}

TEST(BlockHeight, HeightReadingIsGeometric) {
  const BlockHeightLaw law(0.25, LetterLaw::from_ladder(ladder(), 4.0), WordReading::GeometricHeight);
  const auto run = simulate_tower(law, 200000, 3, 0);
  EXPECT_NEAR(mean_of(run.heights), 4.0, 0.05);
}

TEST(BlockHeight, ExactPmfMatchesSimulation) {
  const BlockHeightLaw law(0.5, LetterLaw::from_ladder(ladder(), 4.0));
  const auto S = survival_from_pmf(block_height_pmf(law, 4096));
  const auto run = simulate_tower(law, 1'000'000, 4, 0);
  for (long n : {2L, 8L, 32L}) {
    double over = 0;
    for (long h : run.heights) over += h > n;
    over /= static_cast<double>(run.heights.size());
    const double se = std::sqrt(S[static_cast<std::size_t>(n)] / 1e6);
    EXPECT_NEAR(over, S[static_cast<std::size_t>(n)], 4 * se + 1e-6) << "n=" << n;
  }
}

TEST(MeetingTime, UnitHeightsMeetImmediately) {
  // xi next to 1 makes every word a single unit letter
  const BlockHeightLaw law(std::nextafter(1.0, 0.0), LetterLaw::constant_one(), WordReading::GeometricHeight);
  Rng rng = make_stream(5, 0);
  for (int i = 0; i < 10000; ++i) EXPECT_LE(meeting_time(law, rng).T, 1);
}

TEST(MeetingTime, GeometricHeightsGiveGeometricMeeting) {
  // memoryless heights: every epoch n >= 0 renews independently with probability xi
  const double xi = 0.3;
  const BlockHeightLaw law(xi, LetterLaw::constant_one(), WordReading::GeometricHeight);
  Rng rng = make_stream(10, 0);
  const std::size_t N = 200000;
  std::vector<long> T(N);
  for (auto& t : T) t = meeting_time(law, rng).T;
  for (long n : {0L, 5L, 20L, 50L}) {
    const double exact = std::pow(1.0 - xi * xi, static_cast<double>(n + 1));
    double over = 0;
    for (long t : T) over += t > n;
    over /= static_cast<double>(N);
    EXPECT_NEAR(over, exact, 4 * std::sqrt(exact * (1 - exact) / N)) << "n=" << n;
  }
}

TEST(MeetingTime, StableMomentForMapHeights) {
  const BlockHeightLaw law(0.5, LetterLaw::from_ladder(ladder(), 4.0));
  const auto run = simulate_tower(law, 1'000'000, 6, 0);
  EXPECT_EQ(run.censored, 0u);
  // E[T^{(p-1)/2}] is finite: the estimate is stable under doubling the sample
  auto moment = [&](std::size_t count) {
    double s = 0;
    for (std::size_t i = 0; i < count; ++i) s += std::pow(static_cast<double>(run.meetings[i]), 1.5);
    return s / static_cast<double>(count);
  };
  const double m1 = moment(250000), m2 = moment(500000), m4 = moment(1000000);
  EXPECT_NEAR(m2 / m1, 1.0, 0.15);
  EXPECT_NEAR(m4 / m2, 1.0, 0.15);
}

TEST(TailReport, SyntheticParetoSlope) {
  const BlockHeightLaw law(0.5, LetterLaw::pareto(3.0, 100000), WordReading::GeometricHeight);
  Rng rng = make_stream(7, 0);
  std::vector<long> samples(1'000'000);
  for (auto& s : samples) s = law.letters.sample(rng);
  // P(R > 20) * 1e6 = 125 keeps every grid point well resolved
  const auto rep = tail_report(samples, 3.0, 2, 20, 10);
  EXPECT_NEAR(rep.slope, -3.0, 0.1);
  EXPECT_LE(rep.band_lo, rep.slope);
  EXPECT_GE(rep.band_hi, rep.slope);
}

TEST(TailReport, BoundConstantsForMapHeights) {
  const BlockHeightLaw law(0.5, LetterLaw::from_ladder(ladder(), 4.0));
  const auto run = simulate_tower(law, 1'000'000, 8, 0);
  const auto rep = tail_report(run.heights, 4.0, 16, 1024, 12, &ladder());
  EXPECT_TRUE(std::isfinite(rep.c2));
  EXPECT_GT(rep.c1, 0.0);
}

TEST(TailReport, TooFewPointsWidensBand) {
  std::vector<long> samples(100000, 1);
  samples[0] = 100;
  const auto rep = tail_report(samples, 2.0, 2, 1000, 10);
  EXPECT_TRUE(rep.widened);
}

TEST(TailReport, RequiresEnoughSamples) { EXPECT_THROW(tail_report(std::vector<long>(10, 1), 2.0, 1, 10, 5), InvalidInput); }

TEST(Renewal, AutocovarianceOfUnitRenewalsVanishes) {
  // h == 1: renewal every step, u_n = 1, covariance 0
  std::vector<double> pmf(20, 0.0);
  pmf[1] = 1.0;
  for (double c : renewal_autocovariance(pmf, 1.0, 10)) EXPECT_NEAR(c, 0.0, 1e-15);
}

TEST(Tower, ThreadCountDoesNotChangeSamples) {
  const BlockHeightLaw law(0.5, LetterLaw::from_ladder(ladder(), 4.0));
  const auto a = simulate_tower(law, 20000, 9, 1);
  const auto b = simulate_tower(law, 20000, 9, 3);
  EXPECT_EQ(a.heights, b.heights);
  EXPECT_EQ(a.meetings, b.meetings);
}
