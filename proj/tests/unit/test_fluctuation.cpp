#include <gtest/gtest.h>

#include <cmath>

#include <boost/math/distributions/normal.hpp>

#include "itersurv/fluctuation.hpp"
#include "itersurv/oracles.hpp"

using namespace itersurv;

namespace {

PathSkeleton path_of(std::vector<double> v) {
  PathSkeleton p;
  p.grid = TimeGrid{1.0, v.size() - 1};
  p.values = std::move(v);
  return p;
}

// P(sup_[0,1] |B| <= eps) by the reflection sum over the strip, written out independently
double strip_probability(double eps) {
  const boost::math::normal_distribution<double> nd;
  double s = 0.0;
  for (int k = -60; k <= 60; ++k) {
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    s += sign * (boost::math::cdf(nd, (2 * k + 1) * eps) - boost::math::cdf(nd, (2 * k - 1) * eps));
  }
  return s;
}

}  // namespace

TEST(Extrema, MixedPath) {
  const auto r = running_extrema(path_of({0, 1, -2, 3}));
  EXPECT_EQ(r.max, (std::vector<double>{1, 1, 3}));
  EXPECT_EQ(r.min, (std::vector<double>{1, -2, -2}));
}

TEST(Extrema, MonotonePath) {
  const auto r = running_extrema(path_of({0, 1, 2, 3}));
  EXPECT_EQ(r.max, (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(r.min, (std::vector<double>{1, 1, 1}));
}

TEST(Extrema, ConstantPath) {
  const auto r = running_extrema(path_of({0, 2.5, 2.5}));
  EXPECT_EQ(r.max, (std::vector<double>{2.5, 2.5}));
  EXPECT_EQ(r.min, (std::vector<double>{2.5, 2.5}));
}

TEST(Extrema, AnchorOnlyRejected) { EXPECT_THROW(running_extrema(path_of({0})), ConfigError); }

TEST(Ladder, AscendingRecords) {
  const auto d = ladder_decomposition(path_of({0, 1, -1, 2, 0, 3}), LadderDirection::Ascending);
  EXPECT_EQ(d.epochs, (std::vector<std::size_t>{1, 3, 5}));
  EXPECT_EQ(d.heights, (std::vector<double>{1, 1, 1}));
}

TEST(Ladder, NoRecordsAboveZero) {
  EXPECT_TRUE(ladder_decomposition(path_of({0, -1, -2}), LadderDirection::Ascending).epochs.empty());
}

TEST(Ladder, DescendingRecords) {
  const auto d = ladder_decomposition(path_of({0, -1, -2}), LadderDirection::Descending);
  EXPECT_EQ(d.epochs, (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(d.heights, (std::vector<double>{1, 1}));
}

TEST(Ladder, HeightsRebuildRunningMax) {
  for (std::uint64_t i = 0; i < 200; ++i) {
    Stream s = derive_stream(Seed{1}, StreamKey{0, 0, i, kInner});
    const auto p = gen_random_walk(80, Laplace{0.05, 1}, s);
    const auto ext = running_extrema(p);
    const auto d = ladder_decomposition(p, LadderDirection::Ascending);
    double acc = 0;
    for (std::size_t k = 0; k < d.epochs.size(); ++k) {
      acc += d.heights[k];
      EXPECT_NEAR(acc, p.values[d.epochs[k]], 1e-12);
      EXPECT_NEAR(acc, ext.max[d.epochs[k] - 1], 1e-12);
    }
  }
}

TEST(SmallDeviation, HugeBandIsCertain) {
  const auto c = small_deviation_curve(brownian_motion(), {100.0}, 20000, Seed{1});
  EXPECT_EQ(c[0].n_inside, c[0].n_samples);
  EXPECT_EQ(c[0].ci_high, 1.0);
}

TEST(SmallDeviation, MatchesSeriesAtHalfAndOne) {
  EXPECT_NEAR(strip_probability(0.5), 9.17e-3, 5e-5);
  EXPECT_NEAR(strip_probability(1.0), 0.3708, 5e-5);
  SmallDeviationOptions o;
  const auto c = small_deviation_curve(brownian_motion(), {0.5, 1.0}, 100000, Seed{2}, o);
  for (const auto& pt : c) {
    const double target = strip_probability(pt.eps);
    EXPECT_LE(pt.ci_low, target) << pt.eps;
    EXPECT_GE(pt.ci_high, target) << pt.eps;
  }
}

TEST(SmallDeviation, CurveIsMonotoneInEps) {
  const std::vector<double> eps{0.4, 0.5, 0.6, 0.8, 1.0, 1.3};
  const auto c = small_deviation_curve(brownian_motion(), eps, 20000, Seed{3});
  for (std::size_t j = 1; j < c.size(); ++j) EXPECT_GE(c[j].n_inside, c[j - 1].n_inside);
}

TEST(SmallDeviation, RejectsBadInput) {
  EXPECT_THROW(small_deviation_curve(brownian_motion(), {}, 10, Seed{1}), ConfigError);
  EXPECT_THROW(small_deviation_curve(brownian_motion(), {-1.0}, 10, Seed{1}), ConfigError);
  EXPECT_THROW(small_deviation_curve(brownian_motion(), {1.0}, 0, Seed{1}), ConfigError);
}

TEST(NegativeMoment, DeterministicSupremum) {
  const LevySpec drift{2, 0, 0, Constant{0}, false};
  for (double eta : {0.5, 1.0, 3.0}) {
    const auto r = negative_moment_estimate(drift, eta, 50, Seed{1});
    EXPECT_NEAR(r.mean, std::pow(2.0, -eta), 1e-14);
    EXPECT_LT(r.std_error, 1e-12);
  }
}

TEST(NegativeMoment, ZerothMomentIsOne) {
  const auto r = negative_moment_estimate(brownian_motion(), 0.0, 1000, Seed{1});
  EXPECT_EQ(r.mean, 1.0);
}

TEST(NegativeMoment, BrownianHalfMomentIsStable) {
  const double step = 0x1.0p-6;
  const auto a = negative_moment_estimate(brownian_motion(), 0.5, 1000000, Seed{11}, step, 1);
  const auto b = negative_moment_estimate(brownian_motion(), 0.5, 1000000, Seed{12}, step, 2);
  EXPECT_TRUE(std::isfinite(a.mean));
  EXPECT_FALSE(a.heavy_tail);
  EXPECT_FALSE(b.heavy_tail);
  EXPECT_LE(std::abs(a.mean - b.mean), 3.0 * std::hypot(a.std_error, b.std_error));
}

TEST(NegativeMoment, ZeroSupremumIsAnError) {
  EXPECT_THROW(negative_moment_estimate(LevySpec{0, 0, 0, Constant{0}, false}, 1.0, 10, Seed{1}), ConfigError);
}

TEST(BarrierRatio, Targets) {
  const auto r = normalized_barrier_check(Rademacher{}, 1000, 0.3, 100, Seed{1});
  EXPECT_NEAR(r.target, std::sqrt(2.0 / M_PI), 1e-12);
  EXPECT_NEAR(r.target, 0.7979, 1e-4);
  const auto g = normalized_barrier_check(Gaussian{0, 2}, 1000, 0.3, 100, Seed{1});
  EXPECT_NEAR(g.target, std::sqrt(2.0 / (4.0 * M_PI)), 1e-12);
  EXPECT_NEAR(g.target, 0.3989, 1e-4);
}

TEST(BarrierRatio, RejectsDriftedLaw) {
  EXPECT_THROW(normalized_barrier_check(Gaussian{0.1, 1}, 100, 0.3, 10, Seed{1}), ConfigError);
  EXPECT_THROW(normalized_barrier_check(Rademacher{}, 100, 0.6, 10, Seed{1}), ConfigError);
}

TEST(BarrierRatio, LatticeTableAgreesWithStepping) {
  // exact P(M_N <= floor(N^a)) from the lattice DP at small N
  const std::uint64_t N = 400;
  const double a = 0.4;
  const auto r = normalized_barrier_check(Rademacher{}, N, a, 200000, Seed{5});
  const double exact = srw_max_dp(static_cast<std::int64_t>(N), static_cast<std::int64_t>(std::floor(std::pow(N, a)))).value;
  const double scale = std::sqrt(static_cast<double>(N)) / std::pow(static_cast<double>(N), a);
  EXPECT_LE(r.ci_low, exact * scale);
  EXPECT_GE(r.ci_high, exact * scale);
}

TEST(LadderTail, ConstantAndLatticeLaws) {
  const std::vector<double> x{1.0, 1.5, 3.0};
  for (const IncrementLaw law : {IncrementLaw{Constant{1}}, IncrementLaw{Rademacher{}}}) {
    const auto t = ladder_height_tail_probe(law, 5000, Seed{1}, x, 100000);
    for (const auto& pt : t.points) EXPECT_EQ(pt.tail, 0.0);
  }
}

TEST(LadderTail, LaplaceTailDecreasesLogConcavely) {
  const std::vector<double> x{1, 2, 3, 4, 5};
  const auto t = ladder_height_tail_probe(Laplace{0, 1}, 1000000, Seed{2}, x, 10000);
  ASSERT_EQ(t.points.size(), 5u);
  EXPECT_LT(t.points[4].tail, t.points[1].tail);
  for (std::size_t j = 1; j < 5; ++j) EXPECT_LT(t.points[j].tail, t.points[j - 1].tail);
  // concavity of log tail on the equally spaced thresholds, up to sampling noise
  for (std::size_t j = 1; j + 1 < 5; ++j) {
    const double l0 = std::log(t.points[j - 1].tail), l1 = std::log(t.points[j].tail),
                 l2 = std::log(t.points[j + 1].tail);
    const double se = 3.0 * std::sqrt(1.0 / t.points[j + 1].exceed + 4.0 / t.points[j].exceed +
                                      1.0 / t.points[j - 1].exceed);
    EXPECT_LE(l2 - 2 * l1 + l0, se) << "threshold " << x[j];
  }
}

TEST(LadderTail, RejectsNegativeDrift) {
  EXPECT_THROW(ladder_height_tail_probe(Gaussian{-0.1, 1}, 10, Seed{1}, {1.0}), ConfigError);
}
