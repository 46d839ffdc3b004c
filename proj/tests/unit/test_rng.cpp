#include <gtest/gtest.h>

#include <cmath>

#include "itersurv/rng.hpp"

using namespace itersurv;

TEST(Rng, SameSeedAndKeyGiveSameDraws) {
  Stream a = derive_stream(Seed{1}, StreamKey{0, 0, 0, 0});
  Stream b = derive_stream(Seed{1}, StreamKey{0, 0, 0, 0});
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a(), b());
}

TEST(Rng, DifferentKeysDiffer) {
  const StreamKey base{0, 0, 0, 0};
  Stream a = derive_stream(Seed{1}, base);
  for (const StreamKey k : {StreamKey{1, 0, 0, 0}, StreamKey{0, 1, 0, 0}, StreamKey{0, 0, 1, 0}, StreamKey{0, 0, 0, 1}}) {
    Stream b = derive_stream(Seed{1}, k);
    Stream a2 = a;
    EXPECT_NE(a2(), b());
  }
  EXPECT_NE(stream_key_hash(Seed{1}, StreamKey{1, 2, 3, 0}), stream_key_hash(Seed{1}, StreamKey{3, 2, 1, 0}));
}

TEST(Rng, SeedChangesSequence) {
  Stream a = derive_stream(Seed{1}, StreamKey{});
  Stream b = derive_stream(Seed{2}, StreamKey{});
  int same = 0;
  for (int i = 0; i < 100; ++i) same += a() == b();
  EXPECT_EQ(same, 0);
}

TEST(Rng, NormalMomentsOverMillionDraws) {
  Stream s = derive_stream(Seed{1}, StreamKey{7, 0, 0, 0});
  const int n = 1000000;
  double sum = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    const double x = next_standard_normal(s);
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  EXPECT_GE(mean, -0.005);
  EXPECT_LE(mean, 0.005);
  EXPECT_GE(var, 0.99);
  EXPECT_LE(var, 1.01);
}

TEST(Rng, CopiedStateRepeatsNextValue) {
  Stream s = derive_stream(Seed{3}, StreamKey{});
  next_standard_normal(s);
  Stream t = s;
  EXPECT_EQ(next_standard_normal(s), next_standard_normal(t));
  EXPECT_EQ(next_uniform(s), next_uniform(t));
}

TEST(Rng, UniformRangeAndMean) {
  Stream s = derive_stream(Seed{1}, StreamKey{8, 0, 0, 0});
  const int n = 1000000;
  double sum = 0;
  for (int i = 0; i < n; ++i) {
    const double u = next_uniform(s);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_GE(sum / n, 0.498);
  EXPECT_LE(sum / n, 0.502);
}

TEST(Rng, UniformSequenceReproducible) {
  Stream a = derive_stream(Seed{9}, StreamKey{1, 2, 3, kOuterMinus});
  Stream b = derive_stream(Seed{9}, StreamKey{1, 2, 3, kOuterMinus});
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(next_uniform(a), next_uniform(b));
}

TEST(Rng, UniformPosIsStrictlyPositive) {
  Stream s = derive_stream(Seed{4}, StreamKey{});
  for (int i = 0; i < 100000; ++i) {
    const double u = s.uniform_pos();
    ASSERT_GT(u, 0.0);
    ASSERT_LE(u, 1.0);
  }
}
