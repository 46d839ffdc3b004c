#include <gtest/gtest.h>

#include <cmath>

#include "itersurv/generators.hpp"

using namespace itersurv;

namespace {

struct Acc {
  double n = 0, sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  void add(double x, double y = 0) {
    n += 1;
    sx += x;
    sy += y;
    sxx += x * x;
    syy += y * y;
    sxy += x * y;
  }
  double mean() const { return sx / n; }
  double var() const { return sxx / n - mean() * mean(); }
  double vary() const { return syy / n - (sy / n) * (sy / n); }
  double cov() const { return sxy / n - mean() * sy / n; }
};

// 0.5 (|s|^2H + |t|^2H - |t - s|^2H)
double fbm_cov(double H, double s, double t) {
  return 0.5 * (std::pow(std::abs(s), 2 * H) + std::pow(std::abs(t), 2 * H) - std::pow(std::abs(t - s), 2 * H));
}

}  // namespace

TEST(RandomWalk, ConstantIncrements) {
  Stream s = derive_stream(Seed{1}, StreamKey{});
  EXPECT_EQ(gen_random_walk(3, Constant{1}, s).values, (std::vector<double>{0, 1, 2, 3}));
  EXPECT_EQ(gen_random_walk(5, Constant{0}, s).values, std::vector<double>(6, 0.0));
}

TEST(RandomWalk, GaussianDriftAverage) {
  double total = 0;
  const std::size_t n = 10000;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    Stream s = derive_stream(Seed{2}, StreamKey{0, 0, i, kInner});
    total += gen_random_walk(n, Gaussian{0.5, 1}, s).values.back() / n;
  }
  EXPECT_NEAR(total / 1000, 0.5, 5.0 / std::sqrt(1e7));
}

TEST(RandomWalk, RademacherSteps) {
  Stream s = derive_stream(Seed{3}, StreamKey{});
  const auto p = gen_random_walk(1000, Rademacher{}, s);
  ASSERT_EQ(p.values.size(), 1001u);
  EXPECT_EQ(p.values[0], 0.0);
  for (std::size_t k = 1; k < p.values.size(); ++k) EXPECT_EQ(std::abs(p.values[k] - p.values[k - 1]), 1.0);
}

TEST(Levy, PureDrift) {
  Stream s = derive_stream(Seed{1}, StreamKey{});
  const auto p = gen_levy_path(TimeGrid{0.5, 3}, LevySpec{2, 0, 0, Constant{0}, false}, s);
  EXPECT_EQ(p.values, (std::vector<double>{0, 1, 2, 3}));
}

TEST(Levy, BrownianVarianceAtOne) {
  Acc a;
  const int n = 100000;
  for (std::uint64_t i = 0; i < n; ++i) {
    Stream s = derive_stream(Seed{4}, StreamKey{0, 0, i, kInner});
    a.add(gen_levy_path(TimeGrid{0.25, 4}, LevySpec{0, 1, 0, Constant{0}, false}, s).values.back());
  }
  EXPECT_NEAR(a.var(), 1.0, 5.0 * std::sqrt(2.0 / n));
}

TEST(Levy, CompensatedJumpsHaveZeroMean) {
  // Laplace(1, 1): E[J] = 1, E[J^2] = 3, E[J^4] = 37
  const LevySpec spec{0, 0, 1, Laplace{1, 1}, true};
  EXPECT_DOUBLE_EQ(spec.effective_drift(), -1.0);
  Acc a;
  const int n = 100000;
  for (std::uint64_t i = 0; i < n; ++i) {
    Stream s = derive_stream(Seed{5}, StreamKey{0, 0, i, kInner});
    a.add(gen_levy_path(TimeGrid{0.5, 2}, spec, s).values.back());
  }
  EXPECT_NEAR(a.mean(), 0.0, 5.0 * std::sqrt(3.0 / n));
  // fourth central moment of X_1 is E[J^4] + 3 Var^2 = 64
  EXPECT_NEAR(a.var(), 3.0, 5.0 * std::sqrt((64.0 - 9.0) / n));
}

TEST(Ibm, StepCovarianceEntries) {
  EXPECT_DOUBLE_EQ(ibm_step_covariance(1, 2.0)(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(ibm_step_covariance(1, 1.0)(0, 1), 0.5);
  EXPECT_DOUBLE_EQ(ibm_step_covariance(1, 1.0)(1, 0), 0.5);
  EXPECT_NEAR(ibm_step_covariance(1, 1.0)(1, 1), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(ibm_step_covariance(2, 1.0)(2, 2), 1.0 / 20.0, 1e-15);
}

TEST(Ibm, MarginalVarianceMatchesOrder) {
  // Var of n-fold integral of B at t: t^(2n+1) / ((n!)^2 (2n+1))
  for (int order : {1, 2}) {
    Acc a;
    const int n = 40000;
    for (std::uint64_t i = 0; i < n; ++i) {
      Stream s = derive_stream(Seed{6}, StreamKey{0, 0, i, kInner});
      a.add(gen_ibm_path(TimeGrid{0.5, 4}, IbmSpec{order}, s).values.back());
    }
    const double f = std::tgamma(order + 1.0);
    const double target = std::pow(2.0, 2 * order + 1) / (f * f * (2 * order + 1));
    EXPECT_NEAR(a.var(), target, 5.0 * target * std::sqrt(2.0 / n)) << "order " << order;
  }
}

TEST(Ibm, OrderZeroIsBrownian) {
  Stream a = derive_stream(Seed{7}, StreamKey{});
  const auto p = gen_ibm_path(TimeGrid{1, 10}, IbmSpec{0}, a);
  EXPECT_EQ(p.values[0], 0.0);
  EXPECT_EQ(p.values.size(), 11u);
}

TEST(Fbm, TwoSidedCovarianceAcrossZero) {
  for (double H : {0.5, 0.75, 0.25}) {
    Acc a;
    const int n = 100000;
    const FgnPlan plan(H, 2 * 16, 1.0 / 16.0);
    std::vector<double> g;
    for (std::uint64_t i = 0; i < n; ++i) {
      Stream s = derive_stream(Seed{8}, StreamKey{0, 0, i, kOuterPlus});
      plan.sample(s, g);
      const auto p = fbm_from_increments(TimeGrid{1.0 / 16.0, 16}, true, g, plan.method());
      a.add(p.plus.values.back(), p.minus->values.back());
    }
    const double rho = fbm_cov(H, 1.0, -1.0);
    EXPECT_NEAR(a.cov(), rho, 5.0 * std::sqrt((1.0 + rho * rho) / n)) << "H " << H;
    EXPECT_NEAR(a.var(), 1.0, 5.0 * std::sqrt(2.0 / n)) << "H " << H;
    EXPECT_NEAR(a.vary(), 1.0, 5.0 * std::sqrt(2.0 / n)) << "H " << H;
  }
  EXPECT_NEAR(fbm_cov(0.75, 1, -1), 1.0 - std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(fbm_covariance(0.75, 1, -1), 1.0 - std::sqrt(2.0), 1e-12);
}

TEST(Fbm, DenseAndCirculantAgreeInLaw) {
  for (bool dense : {false, true}) {
    Acc a;
    const int n = 20000;
    for (std::uint64_t i = 0; i < n; ++i) {
      Stream s = derive_stream(Seed{9}, StreamKey{0, 0, i, kOuterPlus});
      const auto p = gen_fbm_path(TimeGrid{0.25, 8}, FbmSpec{0.3, false}, s, dense);
      a.add(p.plus.values[4], p.plus.values[8]);
    }
    const double c = fbm_cov(0.3, 1, 2);
    EXPECT_NEAR(a.cov(), c, 5.0 * std::sqrt((std::pow(2.0, 0.6) + c * c) / n)) << "dense " << dense;
  }
}

TEST(Fbm, RejectsBadHurst) {
  Stream s = derive_stream(Seed{1}, StreamKey{});
  EXPECT_THROW(gen_fbm_path(TimeGrid{1, 4}, FbmSpec{1.0, false}, s), ConfigError);
  EXPECT_THROW(gen_fbm_path(TimeGrid{1, 4}, FbmSpec{0.0, false}, s), ConfigError);
}

TEST(Counterexample, SpikeFrequencies) {
  const int n = 100000;
  int first = 0, ninth = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    Stream s = derive_stream(Seed{10}, StreamKey{0, 0, i, kOuterPlus});
    const auto v = gen_counterexample_values(9, s);
    for (double x : v) ASSERT_TRUE(x == 0.0 || x == 2.0);
    first += v[0] == 2.0;
    ninth += v[8] == 2.0;
  }
  EXPECT_NEAR(first / double(n), 0.5, 5.0 * std::sqrt(0.25 / n));
  EXPECT_NEAR(ninth / double(n), 0.1, 5.0 * std::sqrt(0.09 / n));
}

TEST(Counterexample, SpikeTimesAreHalfIntegers) {
  EXPECT_DOUBLE_EQ(counterexample_spike_time(1), 0.5);
  EXPECT_DOUBLE_EQ(counterexample_spike_time(11), 10.5);
}
