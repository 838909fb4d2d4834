#include <gtest/gtest.h>

#include <cmath>

#include "intermittent/parallel.hpp"
#include "intermittent/rng.hpp"
#include "intermittent/stats.hpp"

using namespace intermittent;

TEST(Stats, LineFitRecoversExactLine) {
  const std::vector<double> x{1, 2, 3, 4}, y{5, 7, 9, 11};
  const auto f = stats::fit_line(x, y);
  EXPECT_NEAR(f.slope, 2.0, 1e-14);
  EXPECT_NEAR(f.intercept, 3.0, 1e-14);
  EXPECT_NEAR(f.slope_stderr, 0.0, 1e-12);
}

TEST(Stats, LogLogFitOfPowerLaw) {
  std::vector<double> n, v;
  for (double k = 10; k < 1e4; k *= 1.7) {
    n.push_back(k);
    v.push_back(3.0 * std::pow(k, -2.5));
  }
  EXPECT_NEAR(stats::loglog_fit(n, v).slope, -2.5, 1e-12);
}

TEST(Stats, GeometricGridIsDistinctAndSpansRange) {
  const auto g = stats::geometric_grid(8, 512, 12);
  EXPECT_EQ(g.front(), 8);
  EXPECT_EQ(g.back(), 512);
  for (std::size_t i = 1; i < g.size(); ++i) EXPECT_GT(g[i], g[i - 1]);
  EXPECT_EQ(stats::geometric_grid(1, 4, 20).size(), 4u);
}

TEST(Stats, NormalCdf) {
  EXPECT_DOUBLE_EQ(stats::normal_cdf(0.0), 0.5);
  EXPECT_NEAR(stats::normal_cdf(1.959963984540054), 0.975, 1e-12);
}

TEST(Stats, KsTwoSampleHandExample) {
  // a = {1, 2, 3}, b = {2.5, 4}: largest ECDF gap is 2/3 at x = 2
  const auto r = stats::ks_two_sample({1, 2, 3}, {2.5, 4});
  EXPECT_NEAR(r.statistic, 2.0 / 3.0, 1e-15);
  EXPECT_EQ(stats::ks_two_sample({1, 2, 3}, {1, 2, 3}).statistic, 0.0);
}

TEST(Stats, KsOneSampleUniform) {
  Rng rng = make_stream(5, 0);
  std::vector<double> u(20000);
  for (auto& v : u) v = uniform01(rng);
  const auto r = stats::ks_one_sample(u, [](double x) { return x; });
  EXPECT_LT(r.statistic, 0.015);
  EXPECT_GT(r.p_value, 0.01);
  // shifted sample is rejected
  for (auto& v : u) v = std::min(1.0, v + 0.05);
  EXPECT_LT(stats::ks_one_sample(u, [](double x) { return x; }).p_value, 1e-6);
}

TEST(Parallel, ResultsIndependentOfThreadCount) {
  auto run = [](int threads) {
    std::vector<double> out(1000);
    parallel_for(out.size(), threads, [&](std::size_t i) {
      Rng rng = make_stream(11, i);
      out[i] = uniform01(rng);
    });
    return out;
  };
  EXPECT_EQ(run(1), run(3));
}

TEST(Parallel, EnvironmentOverridesDefaultThreads) {
  setenv("INTERMITTENT_THREADS", "3", 1);
  EXPECT_EQ(resolve_threads(0), 3);
  EXPECT_EQ(resolve_threads(2), 2);
  unsetenv("INTERMITTENT_THREADS");
}

TEST(Parallel, ExceptionsPropagate) {
  EXPECT_THROW(parallel_for(10, 2,
                            [](std::size_t i) {
                              if (i == 7) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
}
