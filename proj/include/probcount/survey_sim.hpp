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

// Monte Carlo simulation of a boolean survey aggregated by a counter or by
// the Laplace mechanism.

#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "probcount/counters.hpp"
#include "probcount/dp_audit.hpp"
#include "probcount/errors.hpp"
#include "probcount/fm_constant.hpp"
#include "probcount/random_source.hpp"

namespace probcount {

enum class MechanismKind { kMorris, kMaxGeo, kPcsa, kHyperLogLog, kLaplace };

inline const char* mechanism_name(MechanismKind kind) {
  switch (kind) {
    case MechanismKind::kMorris:
      return "morris";
    case MechanismKind::kMaxGeo:
      return "maxgeo";
    case MechanismKind::kPcsa:
      return "pcsa";
    case MechanismKind::kHyperLogLog:
      return "hyperloglog";
    case MechanismKind::kLaplace:
      return "laplace";
  }
  return "unknown";
}

inline MechanismKind parse_mechanism(std::string_view name) {
  if (name == "morris") return MechanismKind::kMorris;
  if (name == "maxgeo") return MechanismKind::kMaxGeo;
  if (name == "pcsa") return MechanismKind::kPcsa;
  if (name == "hyperloglog" || name == "hll") return MechanismKind::kHyperLogLog;
  if (name == "laplace") return MechanismKind::kLaplace;
  throw DomainError("unknown mechanism '" + std::string(name) + "'");
}

struct Mechanism {
  MechanismKind kind = MechanismKind::kMorris;
  std::uint32_t lots = 64;       // pcsa, hyperloglog
  double laplace_scale = 1.0;    // laplace

  static Mechanism morris() { return {MechanismKind::kMorris}; }
  static Mechanism maxgeo() { return {MechanismKind::kMaxGeo}; }
  static Mechanism pcsa(std::uint32_t m) { return {MechanismKind::kPcsa, m}; }
  static Mechanism hyperloglog(std::uint32_t m) {
    return {MechanismKind::kHyperLogLog, m};
  }
  static Mechanism laplace(double scale) {
    return {MechanismKind::kLaplace, 64, scale};
  }

  void validate() const {
    switch (kind) {
      case MechanismKind::kPcsa:
        PcsaCounter{lots};
        break;
      case MechanismKind::kHyperLogLog:
        hll_alpha(lots);
        break;
      case MechanismKind::kLaplace:
        if (!(laplace_scale > 0.0) || !std::isfinite(laplace_scale)) {
          throw DomainError("Laplace scale must be a finite positive number");
        }
        break;
      default:
        break;
    }
  }
};

// One draw from the Laplace density exp(-|x|/scale) / (2 scale), by inverse
// cdf on a single uniform.
template <UniformSource Source>
double laplace_sample(Source& source, double scale) {
  if (!(scale > 0.0)) throw DomainError("Laplace scale must be positive");
  const double u = source.uniform01() - 0.5;
  const double mag = -scale * std::log1p(-2.0 * std::fabs(u));
  return u < 0.0 ? -mag : mag;
}

struct SurveyConfig {
  std::uint64_t population = 0;
  std::uint64_t true_count = 0;
  // When non-empty, respondent answers in submission order; overrides
  // population/true_count.
  std::vector<bool> responses;
  Mechanism mechanism;
  std::uint64_t pre_count = 0;
  std::uint64_t seed = 0;
  std::uint64_t trials = 10000;
  double delta = kMorrisDelta;
  // MaxGeo guarantee to check; ignored by other mechanisms.
  double target_epsilon = 0.5;

  std::uint64_t respondents() const {
    return responses.empty() ? population : responses.size();
  }
  std::uint64_t true_responses() const {
    if (responses.empty()) return true_count;
    std::uint64_t t = 0;
    for (bool b : responses) t += b ? 1 : 0;
    return t;
  }
  // Respondent i answers true iff i < true_count, unless responses is given.
  bool response(std::uint64_t i) const {
    return responses.empty() ? i < true_count : responses[i];
  }

  void validate() const {
    if (responses.empty() && true_count > population) {
      throw DomainError("true_count exceeds population");
    }
    if (trials == 0) throw DomainError("trials must be positive");
    mechanism.validate();
  }
};

struct TrialResult {
  double released = 0.0;  // counter level (sum of levels for register arrays)
  double estimate = 0.0;  // point estimate minus pre_count
};

struct SurveyOutcome {
  std::vector<TrialResult> trials;
  double truth = 0.0;
  double mean = 0.0;
  double bias = 0.0;
  double variance = 0.0;  // unbiased sample variance of the estimate
  double rmse = 0.0;
  double std_error = 0.0;  // of the mean
  std::optional<DpParams> dp;
  bool dp_satisfied = false;
};

namespace detail {

template <typename Counter>
void feed(Counter& counter, const SurveyConfig& config, RandomSource& source) {
  for (std::uint64_t i = 0; i < config.pre_count; ++i) counter.observe(true, source);
  const std::uint64_t d = config.respondents();
  for (std::uint64_t i = 0; i < d; ++i) counter.observe(config.response(i), source);
}

inline double pow2_minus_two(std::uint32_t level) {
  return std::ldexp(1.0, static_cast<int>(level)) - 2.0;
}

}  // namespace detail

// One trial with its own seed.
inline TrialResult run_trial(const SurveyConfig& config, std::uint64_t trial_seed) {
  RandomSource source(trial_seed);
  const double n0 = static_cast<double>(config.pre_count);
  const FMConstant& phi = flajolet_martin_constant();
  switch (config.mechanism.kind) {
    case MechanismKind::kMorris: {
      MorrisCounter c;
      detail::feed(c, config, source);
      return {static_cast<double>(c.level()), detail::pow2_minus_two(c.level()) - n0};
    }
    case MechanismKind::kMaxGeo: {
      MaxGeoCounter c;
      detail::feed(c, config, source);
      return {static_cast<double>(c.level()),
              static_cast<double>(maxgeo_estimate(c, phi)) - n0};
    }
    case MechanismKind::kPcsa: {
      PcsaCounter c(config.mechanism.lots);
      detail::feed(c, config, source);
      return {static_cast<double>(c.sigma()),
              static_cast<double>(pcsa_estimate(c, phi)) - n0};
    }
    case MechanismKind::kHyperLogLog: {
      HllCounter c(config.mechanism.lots);
      detail::feed(c, config, source);
      return {static_cast<double>(c.sigma()), hll_estimate(c) - n0};
    }
    case MechanismKind::kLaplace: {
      const double count =
          static_cast<double>(config.true_responses() + config.pre_count);
      const double released = count + laplace_sample(source, config.mechanism.laplace_scale);
      return {released, released - n0};
    }
  }
  throw DomainError("unknown mechanism");
}

// The privacy guarantee of one release for this configuration, if the
// mechanism has one.
inline std::optional<DpParams> survey_dp(const SurveyConfig& config, bool* satisfied) {
  const std::uint64_t n = config.true_responses() + config.pre_count;
  *satisfied = false;
  switch (config.mechanism.kind) {
    case MechanismKind::kMorris: {
      if (n < kMorrisAuditMinN) return std::nullopt;
      const DpParams claim = morris_audit(n).claim();
      *satisfied = claim.delta <= config.delta;
      return claim;
    }
    case MechanismKind::kMaxGeo: {
      const std::uint64_t need = maxgeo_min_n(config.target_epsilon, config.delta);
      *satisfied = n >= need;
      return DpParams{config.target_epsilon, config.delta};
    }
    case MechanismKind::kLaplace:
      *satisfied = true;
      return DpParams{laplace_epsilon(config.mechanism.laplace_scale), 0.0};
    default:
      return std::nullopt;
  }
}

inline SurveyOutcome run_survey(const SurveyConfig& config) {
  config.validate();
  SurveyOutcome out;
  out.truth = static_cast<double>(config.true_responses());
  out.trials.reserve(config.trials);
  for (std::uint64_t t = 0; t < config.trials; ++t) {
    out.trials.push_back(run_trial(config, mix_seed(config.seed, t)));
  }
  // Two-pass moments in long double.
  long double sum = 0.0L;
  for (const TrialResult& r : out.trials) sum += r.estimate;
  const long double k = static_cast<long double>(out.trials.size());
  const long double mean = sum / k;
  long double dev2 = 0.0L;
  long double err2 = 0.0L;
  for (const TrialResult& r : out.trials) {
    const long double d = r.estimate - mean;
    const long double e = r.estimate - static_cast<long double>(out.truth);
    dev2 += d * d;
    err2 += e * e;
  }
  out.mean = static_cast<double>(mean);
  out.bias = static_cast<double>(mean - static_cast<long double>(out.truth));
  out.variance = out.trials.size() > 1 ? static_cast<double>(dev2 / (k - 1.0L)) : 0.0;
  out.rmse = static_cast<double>(std::sqrt(err2 / k));
  out.std_error = std::sqrt(out.variance / static_cast<double>(k));
  out.dp = survey_dp(config, &out.dp_satisfied);
  return out;
}

struct ComparisonRow {
  std::string method;
  DpParams dp;
  std::string estimator;
  double variance = 0.0;
  double memory_bits = 0.0;
};

// Laplace (scale n/16), Morris and MaxGeo side by side at n true inputs,
// with the tail mass fixed at 0.00033 for the counters.
inline std::vector<ComparisonRow> comparison_table(std::uint64_t n) {
  if (n <= 16) throw DomainError("comparison_table requires n > 16");
  const double nd = static_cast<double>(n);
  const double log_n = std::log2(nd);
  const double loglog_n = std::log2(log_n);
  const MaxGeoEnvelope geo = maxgeo_eps_given_n(n, kMorrisDelta);
  return {
      {"laplace", DpParams{16.0 / nd, 0.0}, "count + Laplace(n/16)", nd * nd / 128.0, log_n},
      {"morris", DpParams{16.0 / (nd - 8.0), kMorrisDelta}, "2^M - 2",
       (nd * nd + nd) / 2.0, loglog_n},
      {"maxgeo", DpParams{geo.eps0, kMorrisDelta}, "floor(2^M / phi)", 0.61 * nd * nd,
       loglog_n},
  };
}

}  // namespace probcount
