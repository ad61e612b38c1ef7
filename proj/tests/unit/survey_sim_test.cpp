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

#include "probcount/survey_sim.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "probcount/exact_dist.hpp"

namespace probcount {
namespace {

SurveyConfig morris_config(std::uint64_t n, std::uint64_t trials) {
  SurveyConfig c;
  c.population = n;
  c.true_count = n;
  c.trials = trials;
  c.seed = 11;
  return c;
}

TEST(Mechanism, NamesRoundTrip) {
  for (auto k : {MechanismKind::kMorris, MechanismKind::kMaxGeo, MechanismKind::kPcsa,
                 MechanismKind::kHyperLogLog, MechanismKind::kLaplace}) {
    EXPECT_EQ(parse_mechanism(mechanism_name(k)), k);
  }
  EXPECT_EQ(parse_mechanism("hll"), MechanismKind::kHyperLogLog);
  EXPECT_THROW(parse_mechanism("count-min"), DomainError);
}

TEST(Mechanism, Validation) {
  EXPECT_THROW(Mechanism::pcsa(3).validate(), DomainError);
  EXPECT_THROW(Mechanism::hyperloglog(8).validate(), DomainError);
  EXPECT_THROW(Mechanism::laplace(0.0).validate(), DomainError);
  EXPECT_NO_THROW(Mechanism::hyperloglog(64).validate());
}

TEST(SurveyConfig, Validation) {
  SurveyConfig c;
  c.population = 3;
  c.true_count = 4;
  EXPECT_THROW(c.validate(), DomainError);
  c.true_count = 3;
  c.trials = 0;
  EXPECT_THROW(c.validate(), DomainError);
}

TEST(SurveyConfig, ExplicitResponsesOverridePopulation) {
  SurveyConfig c;
  c.population = 100;
  c.true_count = 100;
  c.responses = {true, false, true};
  EXPECT_EQ(c.respondents(), 3U);
  EXPECT_EQ(c.true_responses(), 2U);
  EXPECT_FALSE(c.response(1));
}

TEST(RunSurvey, SameSeedSameTrials) {
  const SurveyConfig c = morris_config(50, 200);
  const SurveyOutcome a = run_survey(c);
  const SurveyOutcome b = run_survey(c);
  ASSERT_EQ(a.trials.size(), 200U);
  for (std::size_t i = 0; i < a.trials.size(); ++i) {
    EXPECT_EQ(a.trials[i].released, b.trials[i].released);
  }
  EXPECT_EQ(a.mean, b.mean);
}

// Released-level frequencies against the exact pmf of M_30.
TEST(RunSurvey, MorrisLevelsFollowExactDistribution) {
  const SurveyOutcome o = run_survey(morris_config(30, 20000));
  const dist::ProbRow row = dist::morris_row(30);
  std::vector<double> counts(32, 0.0);
  for (const TrialResult& t : o.trials) counts[static_cast<std::size_t>(t.released)] += 1;
  for (std::int64_t l = 3; l <= 7; ++l) {
    const double p = row.at(l).to_double();
    const double sd = std::sqrt(20000 * p * (1 - p));
    EXPECT_NEAR(counts[static_cast<std::size_t>(l)], 20000 * p, 5 * sd) << "level " << l;
  }
}

TEST(RunSurvey, PreCountIsSubtracted) {
  SurveyConfig c = morris_config(0, 4000);
  c.pre_count = 40;
  const SurveyOutcome o = run_survey(c);
  EXPECT_EQ(o.truth, 0.0);
  // Var of the estimate is 40 * 41 / 2 = 820.
  EXPECT_NEAR(o.mean, 0.0, 5 * std::sqrt(820.0 / 4000));
  ASSERT_TRUE(o.dp.has_value());
  EXPECT_TRUE(o.dp_satisfied);
}

TEST(RunSurvey, FalseAnswersDoNotCount) {
  SurveyConfig c = morris_config(10, 50);
  c.true_count = 0;
  const SurveyOutcome o = run_survey(c);
  for (const TrialResult& t : o.trials) EXPECT_EQ(t.released, 1.0);
}

TEST(RunSurvey, LaplaceVariance) {
  SurveyConfig c = morris_config(100, 20000);
  c.mechanism = Mechanism::laplace(3.0);
  const SurveyOutcome o = run_survey(c);
  // Sample variance of 2*9 = 18 has relative sd about sqrt(5 / 20000).
  EXPECT_NEAR(o.variance / 18.0, 1.0, 0.05);
  EXPECT_NEAR(o.mean, 100.0, 5 * std::sqrt(18.0 / 20000));
  ASSERT_TRUE(o.dp.has_value());
  EXPECT_DOUBLE_EQ(o.dp->epsilon, 1.0 / 3.0);
  EXPECT_EQ(o.dp->delta, 0.0);
}

TEST(RunSurvey, DpByMechanism) {
  SurveyConfig c = morris_config(10, 10);
  EXPECT_FALSE(run_survey(c).dp.has_value());  // below the audited range
  c.mechanism = Mechanism::maxgeo();
  c.target_epsilon = 0.5;
  const SurveyOutcome small = run_survey(c);
  ASSERT_TRUE(small.dp.has_value());
  EXPECT_FALSE(small.dp_satisfied);  // needs 28 inputs at delta 0.00033
  c.population = c.true_count = 28;
  EXPECT_TRUE(run_survey(c).dp_satisfied);
  c.mechanism = Mechanism::pcsa(16);
  EXPECT_FALSE(run_survey(c).dp.has_value());
}

TEST(LaplaceSample, Symmetric) {
  RandomSource s(5);
  int positive = 0;
  for (int i = 0; i < 10000; ++i) positive += laplace_sample(s, 1.0) > 0;
  EXPECT_NEAR(positive, 5000, 250);
}

TEST(ComparisonTable, Rows) {
  const auto rows = comparison_table(1000);
  ASSERT_EQ(rows.size(), 3U);
  EXPECT_EQ(rows[0].method, "laplace");
  EXPECT_DOUBLE_EQ(rows[0].dp.epsilon, 0.016);
  EXPECT_DOUBLE_EQ(rows[0].variance, 1e6 / 128);
  EXPECT_DOUBLE_EQ(rows[1].dp.epsilon, 16.0 / 992);
  EXPECT_DOUBLE_EQ(rows[1].variance, 500500);
  EXPECT_DOUBLE_EQ(rows[2].dp.epsilon, 1.0 / 63);
  EXPECT_DOUBLE_EQ(rows[2].variance, 610000);
  EXPECT_THROW(comparison_table(16), DomainError);
}

}  // namespace
}  // namespace probcount
