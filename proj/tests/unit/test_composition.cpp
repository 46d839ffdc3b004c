#include <gtest/gtest.h>

#include <cmath>

#include "itersurv/composition.hpp"
#include "itersurv/generators.hpp"
#include "itersurv/stats.hpp"

using namespace itersurv;

namespace {

PathSkeleton path_of(std::vector<double> v) {
  PathSkeleton p;
  p.grid = TimeGrid{1.0, v.size() - 1};
  p.values = std::move(v);
  return p;
}

CompositionStreams streams_for(std::uint64_t i, std::uint64_t scenario = 0) {
  return composition_streams(Seed{11}, StreamKey{scenario, 0, i, kInner});
}

}  // namespace

TEST(Queries, OneSidedFoldsSigns) {
  const auto [plus, minus] = build_queries(path_of({0, 0.5, -1.0}), CompositionMode::OneSidedAbs);
  EXPECT_EQ(plus.points, (std::vector<double>{0.5, 1.0}));
  EXPECT_TRUE(minus.points.empty());
  EXPECT_EQ(plus.back_map[2], 1u);
}

TEST(Queries, TwoSidedSplitsSigns) {
  const auto [plus, minus] = build_queries(path_of({0, 0.5, -1.0}), CompositionMode::TwoSided);
  EXPECT_EQ(plus.points, (std::vector<double>{0.5}));
  EXPECT_EQ(minus.points, (std::vector<double>{1.0}));
  EXPECT_EQ(minus.back_map[2], 0u);
  EXPECT_EQ(minus.back_map[1], kNoQuery);
}

TEST(Queries, AllZeroInner) {
  const auto [plus, minus] = build_queries(path_of({0, 0, 0}), CompositionMode::TwoSided);
  EXPECT_EQ(plus.points, (std::vector<double>{0}));
  EXPECT_TRUE(minus.points.empty());
}

TEST(LevyAt, ZeroQueryIsZero) {
  QuerySet q;
  q.points = {0.0};
  const auto v = evaluate_levy_at(q, LevySpec{0.3, 1, 2, Laplace{0, 1}, false}, derive_stream(Seed{1}, StreamKey{}));
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0], 0.0);
}

TEST(LevyAt, PureDrift) {
  QuerySet q;
  q.points = {0.5, 1.5};
  const auto v = evaluate_levy_at(q, LevySpec{2, 0, 0, Constant{0}, false}, derive_stream(Seed{1}, StreamKey{}));
  EXPECT_DOUBLE_EQ(v[0], 1.0);
  EXPECT_DOUBLE_EQ(v[1], 3.0);
}

TEST(LevyAt, BrownianVarianceAtTwo) {
  QuerySet q;
  q.points = {0.7, 2.0};
  const int n = 100000;
  double s = 0, ss = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto v = evaluate_levy_at(q, brownian_motion(), derive_stream(Seed{2}, StreamKey{0, 0, i, kOuterPlus}));
    s += v[1];
    ss += v[1] * v[1];
  }
  const double var = ss / n - (s / n) * (s / n);
  EXPECT_NEAR(var, 2.0, 5.0 * 2.0 * std::sqrt(2.0 / n));
}

TEST(GaussianAt, SingleQueryVariance) {
  const std::vector<double> t{1.7};
  auto cov = [](double a, double b) { return std::min(a, b); };
  const int n = 100000;
  double ss = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    Stream s = derive_stream(Seed{3}, StreamKey{0, 0, i, kOuterPlus});
    const double x = evaluate_gaussian_at(t, cov, s)[0];
    ss += x * x;
  }
  EXPECT_NEAR(ss / n, 1.7, 5.0 * 1.7 * std::sqrt(2.0 / n));
}

TEST(GaussianAt, HalfHurstAcrossZeroIsUncorrelated) {
  const std::vector<double> t{1.0, -1.0};
  auto cov = [](double a, double b) { return fbm_covariance(0.5, a, b); };
  const int n = 100000;
  double sxy = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    Stream s = derive_stream(Seed{4}, StreamKey{0, 0, i, kOuterPlus});
    const auto v = evaluate_gaussian_at(t, cov, s);
    sxy += v[0] * v[1];
  }
  EXPECT_NEAR(sxy / n, 0.0, 5.0 / std::sqrt(n));
}

TEST(GaussianAt, EmptyQueries) {
  Stream s = derive_stream(Seed{4}, StreamKey{});
  EXPECT_TRUE(evaluate_gaussian_at({}, [](double, double) { return 1.0; }, s).empty());
}

TEST(GaussianAt, RejectsIndefiniteCovariance) {
  Stream s = derive_stream(Seed{4}, StreamKey{});
  const std::vector<double> t{1.0, 2.0};
  EXPECT_THROW(evaluate_gaussian_at(t, [](double a, double b) { return a == b ? 1.0 : 2.0; }, s), ConfigError);
}

TEST(Compose, ZeroInnerAlwaysSurvives) {
  const auto inner = path_of({0, 0, 0, 0});
  for (std::uint64_t i = 0; i < 200; ++i) {
    const auto r = compose_survival_indicator(LevySpec{5, 3, 4, Laplace{2, 1}, false}, inner, InnerType::Discrete, 1.0,
                                              CompositionMode::OneSidedAbs, ExactAtQueries{}, streams_for(i));
    EXPECT_TRUE(r.survived);
    EXPECT_EQ(r.max_value, 0.0);
  }
}

TEST(Compose, CounterexampleOuterAtIntegerTimes) {
  for (std::uint64_t i = 0; i < 500; ++i) {
    Stream s = derive_stream(Seed{5}, StreamKey{0, 0, i, kInner});
    const auto inner = gen_random_walk(200, Rademacher{}, s);
    for (auto mode : {CompositionMode::OneSidedAbs, CompositionMode::TwoSided}) {
      const ProcessSpec outer = mode == CompositionMode::OneSidedAbs
                                    ? ProcessSpec{CounterexampleSpec{}}
                                    : ProcessSpec{TwoSidedSpec{CounterexampleSpec{}, CounterexampleSpec{}}};
      const auto r = compose_survival_indicator(outer, inner, InnerType::Discrete, 1.0, mode, ExactAtQueries{},
                                                streams_for(i));
      ASSERT_TRUE(r.survived);
      ASSERT_EQ(r.max_value, 0.0);
    }
  }
}

TEST(Compose, LatticeWalkOverLatticeWalkTwoSteps) {
  // enumeration: inner query sets {1,2} or {0,1}; both leave P(outer <= 0 there) = 1/2
  const int n = 200000;
  std::uint64_t k = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    Stream s = derive_stream(Seed{6}, StreamKey{0, 0, i, kInner});
    const auto inner = gen_random_walk(2, Rademacher{}, s);
    k += compose_survival_indicator(RandomWalkSpec{Rademacher{}}, inner, InnerType::Discrete, 0.0,
                                    CompositionMode::OneSidedAbs, ExactAtQueries{}, streams_for(i))
             .survived;
  }
  const auto ci = wilson_interval(k, n, 0.99);
  EXPECT_LE(ci.low, 0.5);
  EXPECT_GE(ci.high, 0.5);
}

TEST(Compose, BarrierMonotoneOnSharedStreams) {
  for (std::uint64_t i = 0; i < 300; ++i) {
    Stream s = derive_stream(Seed{7}, StreamKey{0, 0, i, kInner});
    const auto inner = gen_levy_path(TimeGrid{0.5, 100}, brownian_motion(), s);
    bool prev = false;
    for (double b : {0.1, 0.5, 1.0, 3.0}) {
      const auto r = compose_survival_indicator(brownian_motion(), inner, InnerType::Continuous, b,
                                                CompositionMode::OneSidedAbs, DenseRange{0.25}, streams_for(i, 1));
      EXPECT_TRUE(!prev || r.survived);
      prev = r.survived;
    }
  }
}

TEST(Compose, DenseRangeNeedsContinuousInner) {
  EXPECT_THROW(compose_survival_indicator(brownian_motion(), path_of({0, 1, 2}), InnerType::Discrete, 1.0,
                                          CompositionMode::OneSidedAbs, DenseRange{0.5}, streams_for(0)),
               ConfigError);
}

TEST(Compose, TwoSidedOuterRequiresTwoSidedMode) {
  EXPECT_THROW(compose_survival_indicator(TwoSidedSpec{}, path_of({0, 1}), InnerType::Discrete, 1.0,
                                          CompositionMode::OneSidedAbs, ExactAtQueries{}, streams_for(0)),
               ConfigError);
}

TEST(Compose, NonnegativeInnerGivesSameResultInBothModes) {
  const LevySpec x{0, 1, 1, Laplace{1, 1}, true};
  for (std::uint64_t i = 0; i < 300; ++i) {
    Stream s = derive_stream(Seed{8}, StreamKey{0, 0, i, kInner});
    PathSkeleton inner = gen_levy_path(TimeGrid{1, 50}, LevySpec{0, 0, 1, Constant{1}, false}, s);
    const auto a = compose_survival_indicator(x, inner, InnerType::Continuous, 1.0, CompositionMode::OneSidedAbs,
                                              ExactAtQueries{}, streams_for(i));
    const auto b = compose_survival_indicator(TwoSidedSpec{x, x}, inner, InnerType::Continuous, 1.0,
                                              CompositionMode::TwoSided, ExactAtQueries{}, streams_for(i));
    EXPECT_EQ(a.survived, b.survived);
    EXPECT_EQ(a.max_value, b.max_value);
  }
}

TEST(Compose, StopAtBarrierKeepsVerdict) {
  for (std::uint64_t i = 0; i < 300; ++i) {
    Stream s = derive_stream(Seed{9}, StreamKey{0, 0, i, kInner});
    const auto inner = gen_random_walk(100, Gaussian{0, 1}, s);
    ComposeOptions stop;
    stop.stop_at_barrier = true;
    const auto a = compose_survival_indicator(brownian_motion(), inner, InnerType::Discrete, 1.0,
                                              CompositionMode::OneSidedAbs, ExactAtQueries{}, streams_for(i));
    const auto b = compose_survival_indicator(brownian_motion(), inner, InnerType::Discrete, 1.0,
                                              CompositionMode::OneSidedAbs, ExactAtQueries{}, streams_for(i), stop);
    EXPECT_EQ(a.survived, b.survived);
    if (a.survived) {
      EXPECT_EQ(a.max_value, b.max_value);
    }
  }
}

TEST(Compose, BrownianOverBrownianMatchesFlatOuterLaw) {
  // a Brownian outer evaluated at |B| on the unit grid: Z_1 = W(|B_1|) has variance E|B_1| = sqrt(2/pi)
  const int n = 100000;
  double ss = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    Stream s = derive_stream(Seed{10}, StreamKey{0, 0, i, kInner});
    const auto inner = gen_levy_path(TimeGrid{1, 1}, brownian_motion(), s);
    const auto [plus, minus] = build_queries(inner, CompositionMode::OneSidedAbs);
    const auto v = evaluate_levy_at(plus, brownian_motion(), streams_for(i).plus);
    ss += v[0] * v[0];
  }
  EXPECT_NEAR(ss / n, std::sqrt(2.0 / M_PI), 5.0 * std::sqrt((3.0 - 2.0 / M_PI) / n));
}
