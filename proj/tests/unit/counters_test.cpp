// Copyright 2026 The probcount Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "probcount/counters.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "probcount/random_source.hpp"

namespace probcount {
namespace {

TEST(RandomSource, BulkDrawsMatchSingleBits) {
  RandomSource bulk(7), single(7);
  for (unsigned i = 0; i < 2000; ++i) {
    const unsigned k = 1 + i % 64;
    const std::uint64_t w = bulk.bits(k);
    for (unsigned j = 0; j < k; ++j) {
      ASSERT_EQ(((w >> j) & 1U) != 0, single.bit()) << "draw " << i << " bit " << j;
    }
  }
  for (int i = 0; i < 2000; ++i) {
    std::uint32_t expected = 1;
    while (!single.bit()) ++expected;
    ASSERT_EQ(bulk.count_to_first_one(), expected) << i;
  }
}

TEST(RandomSource, SameSeedSameStream) {
  RandomSource a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 256; ++i) {
    const bool x = a.bit();
    EXPECT_EQ(x, b.bit());
    differs |= x != c.bit();
  }
  EXPECT_TRUE(differs);
}

TEST(RandomSource, UniformIsOpenInterval) {
  RandomSource s(1);
  for (int i = 0; i < 10000; ++i) {
    const double u = s.uniform01();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(ScriptedBits, RejectsBadScriptsAndExhaustion) {
  EXPECT_THROW(ScriptedBits("012"), std::invalid_argument);
  ScriptedBits s("1");
  EXPECT_TRUE(s.bit());
  EXPECT_THROW(s.bit(), std::out_of_range);
}

TEST(MixSeed, DistinctIndicesGiveDistinctSeeds) {
  EXPECT_NE(mix_seed(1, 0), mix_seed(1, 1));
  EXPECT_NE(mix_seed(1, 0), mix_seed(2, 0));
  EXPECT_EQ(mix_seed(5, 9), mix_seed(5, 9));
}

TEST(BernoulliPow2, SucceedsOnlyOnAllZeroBits) {
  ScriptedBits zeros("000");
  EXPECT_TRUE(bernoulli_pow2(zeros, 3));
  EXPECT_EQ(zeros.consumed(), 3U);
  ScriptedBits one("010");
  EXPECT_FALSE(bernoulli_pow2(one, 3));
  EXPECT_EQ(one.consumed(), 3U);
  ScriptedBits none("");
  EXPECT_THROW(bernoulli_pow2(none, 0), DomainError);
}

TEST(BernoulliPow2, LongRunsSpanWords) {
  ScriptedBits s(std::string(70, '0'));
  EXPECT_TRUE(bernoulli_pow2(s, 70));
  ScriptedBits t(std::string(69, '0') + "1");
  EXPECT_FALSE(bernoulli_pow2(t, 70));
}

TEST(GeometricHalf, CountsThroughFirstOne) {
  ScriptedBits s("1" "001" "0001");
  EXPECT_EQ(geometric_half(s), 1U);
  EXPECT_EQ(geometric_half(s), 3U);
  EXPECT_EQ(geometric_half(s), 4U);
}

TEST(MorrisCounter, ScriptedTransitions) {
  // Level 1 reads one bit, level 2 reads two.
  ScriptedBits s("0" "10" "10" "00");
  MorrisCounter c;
  c.observe(true, s);
  EXPECT_EQ(c.level(), 2U);
  c.observe(false, s);  // false inputs read nothing
  c.observe(true, s);
  EXPECT_EQ(c.level(), 2U);
  c.observe(true, s);
  EXPECT_EQ(c.level(), 2U);
  c.observe(true, s);
  EXPECT_EQ(c.level(), 3U);
  EXPECT_EQ(c.requests_seen(), 4U);
  EXPECT_EQ(s.consumed(), 7U);
  EXPECT_EQ(morris_estimate(c), 6U);
}

TEST(MorrisCounter, FreshEstimateIsZero) {
  EXPECT_EQ(morris_estimate(MorrisCounter{}), 0U);
  EXPECT_THROW(MorrisCounter::at_level(0), DomainError);
  EXPECT_THROW(morris_estimate(MorrisCounter::at_level(64)), ResourceError);
}

TEST(MorrisCounter, VarianceFormula) {
  EXPECT_EQ(morris_variance_at(100), 5050.0L);
}

// Mean level after 20 requests, bit by bit against batch skipping; the
// level's standard deviation is below 1.
TEST(MorrisCounter, SkipBatchMatchesStepping) {
  constexpr int kTrials = 20000;
  double step_sum = 0, skip_sum = 0;
  for (int t = 0; t < kTrials; ++t) {
    RandomSource a(mix_seed(3, t)), b(mix_seed(4, t));
    MorrisCounter x, y;
    for (int i = 0; i < 20; ++i) x.observe(true, a);
    y.skip_batch(20, b);
    step_sum += x.level();
    skip_sum += y.level();
    ASSERT_EQ(y.requests_seen(), 20U);
  }
  EXPECT_NEAR(step_sum / kTrials, skip_sum / kTrials, 5 * std::sqrt(2.0 / kTrials));
}

TEST(MaxGeoCounter, TakesMaximumAndMerges) {
  ScriptedBits s("001" "1" "00001");
  MaxGeoCounter c;
  c.observe(true, s);
  c.observe(true, s);
  EXPECT_EQ(c.level(), 3U);
  MaxGeoCounter d;
  d.observe(true, s);
  const MaxGeoCounter m = maxgeo_merge(c, d);
  EXPECT_EQ(m.level(), 5U);
  EXPECT_EQ(m.requests_seen(), 3U);
}

TEST(MaxGeoCounter, Estimate) {
  const FMConstant& phi = flajolet_martin_constant();
  // floor(2 / 0.7735...) = 2, floor(1024 / 0.7735...) = 1323.
  EXPECT_EQ(maxgeo_estimate(MaxGeoCounter{}, phi), 2U);
  EXPECT_EQ(maxgeo_estimate(MaxGeoCounter::at_level(10), phi), 1323U);
}

TEST(PcsaCounter, LotFromLowBitsFirst) {
  PcsaCounter c(4);
  // Lot bits "10" select lot 1, then geometric "01" gives level 2.
  ScriptedBits s("10" "01" "01" "1");
  c.observe(true, s);
  c.observe(true, s);
  EXPECT_EQ(c.levels(), (std::vector<std::uint32_t>{1, 2, 1, 1}));
  EXPECT_EQ(c.sigma(), 5U);
}

TEST(PcsaCounter, RejectsBadLotCounts) {
  EXPECT_THROW(PcsaCounter(1), DomainError);
  EXPECT_THROW(PcsaCounter(12), DomainError);
  EXPECT_NO_THROW(PcsaCounter(2));
}

TEST(PcsaCounter, EstimateFromSigma) {
  PcsaCounter c(2);
  c.set_register(0, 3);
  c.set_register(1, 5);
  // floor(2 / phi * 2^4) = floor(41.37...) = 41.
  EXPECT_EQ(pcsa_estimate(c, flajolet_martin_constant()), 41U);
}

TEST(Hll, AlphaConstants) {
  EXPECT_DOUBLE_EQ(hll_alpha(16), 0.673);
  EXPECT_DOUBLE_EQ(hll_alpha(32), 0.697);
  EXPECT_DOUBLE_EQ(hll_alpha(64), 0.709);
  EXPECT_DOUBLE_EQ(hll_alpha(128), 0.7213 / (1 + 1.079 / 128));
  EXPECT_THROW(hll_alpha(8), DomainError);
}

TEST(Hll, EstimateOfUniformRegisters) {
  HllCounter c(16);
  for (std::uint32_t j = 0; j < 16; ++j) c.set_register(j, 4);
  // 0.673 * 256 / (16 / 16) = 172.288.
  EXPECT_NEAR(hll_estimate(c), 172.288, 1e-9);
}

TEST(Memory, BitLengths) {
  EXPECT_EQ(memory_footprint(MorrisCounter::at_level(9)), 4U);
  PcsaCounter c(2);
  c.set_register(1, 8);
  EXPECT_EQ(memory_footprint(c), 1U + 4U);
}

}  // namespace
}  // namespace probcount
