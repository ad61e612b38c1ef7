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

// JSON and CSV serialisation for audits, survey runs and service configs.

#pragma once

#include <cstdint>
#include <cstdio>
#include <functional>
#include <ostream>
#include <string>

#include "json.hpp"
#include "probcount/aggregation_service.hpp"
#include "probcount/dp_audit.hpp"
#include "probcount/exact_dist.hpp"
#include "probcount/survey_sim.hpp"

namespace probcount {

using Json = nlohmann::ordered_json;

inline constexpr int kDefaultDigits = 15;

inline std::string format_double(double v, int digits = kDefaultDigits) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

inline Json to_json(const DpParams& p) {
  return Json{{"epsilon", p.epsilon}, {"delta", p.delta}};
}

inline Json to_json(const MorrisAudit& a) {
  const DpParams claim = a.claim();
  return Json{
      {"mechanism", "morris"},
      {"n", a.n},
      {"epsilon_exact", a.epsilon_exact.to_double(MPFR_RNDU)},
      {"epsilon_bound", a.epsilon_bound},
      {"delta1", a.delta1.to_double(MPFR_RNDU)},
      {"delta2", a.delta2.to_double(MPFR_RNDU)},
      {"delta", a.delta_total.to_double(MPFR_RNDU)},
      {"interval", Json::array({a.interval.lo, a.interval.hi})},
      {"argmax_k", a.argmax_k},
      {"direction", direction_name(a.direction)},
      {"claim", to_json(claim)},
  };
}

inline Json maxgeo_min_n_json(double epsilon, double delta, MaxGeoOptions options = {}) {
  return Json{
      {"mechanism", "maxgeo"},
      {"epsilon", epsilon},
      {"delta", delta},
      {"l_epsilon", maxgeo_l_epsilon(epsilon, options)},
      {"n_min", maxgeo_min_n(epsilon, delta, options)},
  };
}

inline Json to_json(std::uint64_t n, double delta, const MaxGeoEnvelope& e) {
  Json phi = std::isinf(e.phi) ? Json("inf") : Json(e.phi);
  return Json{
      {"mechanism", "maxgeo"}, {"n", n},        {"delta", delta},
      {"exponent", e.exponent}, {"eps0", e.eps0}, {"psi", e.psi},
      {"phi", phi},
  };
}

// n, epsilon_exact, lower_curve, upper_curve for n in [from : to].
inline void write_morris_epsilon_csv(std::ostream& out, std::uint64_t from, std::uint64_t to,
                                     int digits = kDefaultDigits) {
  out << "n,epsilon_exact,lower_curve,upper_curve\n";
  for (std::uint64_t n = from; n <= to; ++n) {
    const MorrisEpsilon e = morris_epsilon_exact(n);
    out << n << ',' << e.epsilon.to_string(digits) << ','
        << morris_log_curve(n, 8).to_string(digits) << ','
        << morris_log_curve(n, 16).to_string(digits) << '\n';
  }
}

// n, delta, morris_eps, maxgeo_eps0, psi, phi; fields outside a formula's domain
// are left empty.
inline void write_privacy_comparison_csv(
    std::ostream& out, std::uint64_t from, std::uint64_t to,
    const std::function<double(std::uint64_t)>& delta_at, int digits = kDefaultDigits) {
  out << "n,delta,morris_eps,maxgeo_eps0,psi,phi\n";
  for (std::uint64_t n = from; n <= to; ++n) {
    const double delta = delta_at(n);
    out << n << ',' << format_double(delta, digits) << ',';
    if (n >= kMorrisAuditMinN) out << morris_epsilon_exact(n).epsilon.to_string(digits);
    out << ',';
    try {
      const MaxGeoEnvelope e = maxgeo_eps_given_n(n, delta);
      out << format_double(e.eps0, digits) << ',' << format_double(e.psi, digits) << ','
          << format_double(e.phi, digits);
    } catch (const DomainError&) {
      out << ",,";
    }
    out << '\n';
  }
}

inline Json to_json(const Mechanism& m) {
  Json params = Json::object();
  if (m.kind == MechanismKind::kPcsa || m.kind == MechanismKind::kHyperLogLog) {
    params["lots"] = m.lots;
  }
  if (m.kind == MechanismKind::kLaplace) params["scale"] = m.laplace_scale;
  return Json{{"mechanism", mechanism_name(m.kind)}, {"params", params}};
}

inline Mechanism mechanism_from_json(const Json& j) {
  Mechanism m;
  m.kind = parse_mechanism(j.at("mechanism").get<std::string>());
  const Json params = j.value("params", Json::object());
  if (params.contains("lots")) m.lots = params.at("lots").get<std::uint32_t>();
  if (params.contains("scale")) m.laplace_scale = params.at("scale").get<double>();
  if (params.contains("epsilon")) m.laplace_scale = laplace_scale(params.at("epsilon").get<double>());
  m.validate();
  return m;
}

// {"mechanism", "params", "population", "true_count" | "responses",
//  "pre_count", "seed", "trials", "delta", "epsilon"}
inline SurveyConfig survey_config_from_json(const Json& j) {
  SurveyConfig c;
  c.mechanism = mechanism_from_json(j);
  c.population = j.value("population", std::uint64_t{0});
  c.true_count = j.value("true_count", std::uint64_t{0});
  if (j.contains("responses")) {
    const Json& r = j.at("responses");
    if (r.is_string()) {
      for (char ch : r.get<std::string>()) {
        if (ch != '0' && ch != '1') throw DomainError("responses string may only hold 0 and 1");
        c.responses.push_back(ch == '1');
      }
    } else {
      for (const Json& b : r) c.responses.push_back(b.get<int>() != 0);
    }
  }
  c.pre_count = j.value("pre_count", std::uint64_t{0});
  c.seed = j.value("seed", std::uint64_t{0});
  c.trials = j.value("trials", std::uint64_t{10000});
  c.delta = j.value("delta", kMorrisDelta);
  c.target_epsilon = j.value("epsilon", 0.5);
  c.validate();
  return c;
}

inline Json to_json(const SurveyConfig& c) {
  Json j = to_json(c.mechanism);
  j["population"] = c.respondents();
  j["true_count"] = c.true_responses();
  j["pre_count"] = c.pre_count;
  j["seed"] = c.seed;
  j["trials"] = c.trials;
  j["delta"] = c.delta;
  if (c.mechanism.kind == MechanismKind::kMaxGeo) j["epsilon"] = c.target_epsilon;
  return j;
}

inline Json survey_summary_json(const SurveyConfig& c, const SurveyOutcome& o) {
  Json j{
      {"config", to_json(c)},
      {"mean", o.mean},
      {"bias", o.bias},
      {"variance", o.variance},
      {"rmse", o.rmse},
      {"std_error", o.std_error},
  };
  j["dp"] = o.dp ? to_json(*o.dp) : Json(nullptr);
  j["dp_satisfied"] = o.dp_satisfied;
  return j;
}

inline void write_trials_csv(std::ostream& out, const SurveyOutcome& o,
                             int digits = kDefaultDigits) {
  out << "trial,released,estimate\n";
  for (std::size_t i = 0; i < o.trials.size(); ++i) {
    out << i << ',' << format_double(o.trials[i].released, digits) << ','
        << format_double(o.trials[i].estimate, digits) << '\n';
  }
}

// {"endpoint", "mechanism", "params", "pre_count", "seed",
//  "release_policy": "on-command" | "after-N", "release_after", "output"}
inline ServiceConfig service_config_from_json(const Json& j) {
  ServiceConfig c;
  c.endpoint = j.value("endpoint", std::string("stdio"));
  c.mechanism = mechanism_from_json(j);
  c.pre_count = j.value("pre_count", std::uint64_t{0});
  c.seed = j.value("seed", std::uint64_t{0});
  const std::string policy = j.value("release_policy", std::string("on-command"));
  if (policy == "on-command") {
    c.release_policy = ReleasePolicy::kOnCommand;
  } else if (policy == "after-N") {
    c.release_policy = ReleasePolicy::kAfterResponses;
    c.release_after = j.at("release_after").get<std::uint64_t>();
  } else {
    throw DomainError("release_policy must be 'on-command' or 'after-N'");
  }
  const std::string output = j.value("output", std::string("level-and-estimate"));
  if (output == "level-and-estimate") {
    c.output = ReleaseOutput::kLevelAndEstimate;
  } else if (output == "estimate-only") {
    c.output = ReleaseOutput::kEstimateOnly;
  } else {
    throw DomainError("output must be 'level-and-estimate' or 'estimate-only'");
  }
  c.validate();
  return c;
}

}  // namespace probcount
