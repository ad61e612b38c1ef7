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

#include "probcount/report.hpp"

#include <gtest/gtest.h>

#include <sstream>

namespace probcount {
namespace {

TEST(Report, MorrisAuditFields) {
  const Json j = to_json(morris_audit(100));
  for (const char* key : {"mechanism", "n", "epsilon_exact", "epsilon_bound", "delta1", "delta2",
                          "delta", "interval", "argmax_k", "direction"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["interval"], Json::array({3, 11}));
  EXPECT_EQ(j["mechanism"], "morris");
}

TEST(Report, MaxGeoMinN) {
  const Json j = maxgeo_min_n_json(0.5, 4.248e-18);
  EXPECT_EQ(j["n_min"], 140);
  EXPECT_EQ(j["l_epsilon"], 2);
}

TEST(Report, EnvelopeWithInfinitePhi) {
  const Json j = to_json(12, 0.00033, maxgeo_eps_given_n(12, 0.00033));
  EXPECT_EQ(j["phi"], "inf");
  EXPECT_EQ(j["eps0"], 1.0);
}

TEST(Report, EpsilonCsvIsBracketed) {
  std::ostringstream out;
  write_morris_epsilon_csv(out, 17, 40);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "n,epsilon_exact,lower_curve,upper_curve");
  int rows = 0;
  while (std::getline(in, line)) {
    double n, exact, lo, hi;
    ASSERT_EQ(std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &n, &exact, &lo, &hi), 4) << line;
    EXPECT_LE(lo, exact) << line;
    EXPECT_LE(exact, hi) << line;
    ++rows;
  }
  EXPECT_EQ(rows, 24);
}

TEST(Report, ComparisonCsvLeavesUndefinedBlank) {
  std::ostringstream out;
  write_privacy_comparison_csv(out, 10, 12, [](std::uint64_t) { return 0.00033; }, 6);
  EXPECT_EQ(out.str(),
            "n,delta,morris_eps,maxgeo_eps0,psi,phi\n"
            "10,0.00033,,,,\n"
            "11,0.00033,,,,\n"
            "12,0.00033,,1,0.950401,inf\n");
}

TEST(Report, SurveyConfigParsing) {
  const SurveyConfig c = survey_config_from_json(Json::parse(R"({
    "mechanism": "pcsa", "params": {"lots": 16}, "responses": "1101",
    "pre_count": 5, "seed": 3, "trials": 7})"));
  EXPECT_EQ(c.mechanism.kind, MechanismKind::kPcsa);
  EXPECT_EQ(c.mechanism.lots, 16U);
  EXPECT_EQ(c.true_responses(), 3U);
  EXPECT_EQ(c.pre_count, 5U);
  EXPECT_EQ(c.trials, 7U);
  EXPECT_THROW(survey_config_from_json(Json::parse(R"({"mechanism": "pcsa",
    "params": {"lots": 5}})")), DomainError);
  EXPECT_THROW(survey_config_from_json(Json::parse(R"({"mechanism": "morris",
    "responses": "10x"})")), DomainError);
  EXPECT_THROW(survey_config_from_json(Json::parse(R"({"params": {}})")), Json::exception);
}

TEST(Report, LaplaceEpsilonParameter) {
  const Mechanism m = mechanism_from_json(Json::parse(R"({"mechanism": "laplace",
    "params": {"epsilon": 0.25}})"));
  EXPECT_DOUBLE_EQ(m.laplace_scale, 4.0);
}

TEST(Report, SurveySummary) {
  SurveyConfig c;
  c.population = c.true_count = 20;
  c.trials = 10;
  const Json j = survey_summary_json(c, run_survey(c));
  for (const char* key : {"config", "mean", "bias", "variance", "rmse", "dp"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["config"]["mechanism"], "morris");
  EXPECT_TRUE(j["dp"].contains("epsilon"));
  std::ostringstream out;
  write_trials_csv(out, run_survey(c));
  EXPECT_EQ(out.str().rfind("trial,released,estimate\n0,", 0), 0U);
}

TEST(Report, ServiceConfigParsing) {
  const ServiceConfig c = service_config_from_json(Json::parse(R"({
    "endpoint": "127.0.0.1:9000", "mechanism": "maxgeo", "pre_count": 28,
    "seed": 1, "release_policy": "after-N", "release_after": 200})"));
  EXPECT_EQ(c.endpoint, "127.0.0.1:9000");
  EXPECT_EQ(c.release_policy, ReleasePolicy::kAfterResponses);
  EXPECT_EQ(c.release_after, 200U);
  EXPECT_THROW(service_config_from_json(Json::parse(R"({"mechanism": "morris",
    "release_policy": "sometimes"})")), DomainError);
  EXPECT_THROW(service_config_from_json(Json::parse(R"({"mechanism": "morris",
    "release_policy": "after-N", "release_after": 0})")), DomainError);
}

}  // namespace
}  // namespace probcount
