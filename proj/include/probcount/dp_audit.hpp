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

// (epsilon, delta) accounting for released counter values.
//
// Exact quantities (Morris privacy loss, tail masses) are ExtReal and are
// rounded outward when turned into doubles: epsilon up, delta up. Closed-form
// bounds are plain doubles.

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "probcount/errors.hpp"
#include "probcount/exact_dist.hpp"
#include "probcount/ext_real.hpp"

namespace probcount {

// Smallest request count for which the Morris audit is defined.
inline constexpr std::uint64_t kMorrisAuditMinN = 17;
// Total tail mass outside I_n that the Morris guarantee is stated with.
inline constexpr double kMorrisDelta = 0.00033;

struct DpParams {
  double epsilon = 0.0;
  double delta = 0.0;

  friend bool operator==(const DpParams&, const DpParams&) = default;
};

inline DpParams make_dp_params(double epsilon, double delta) {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    throw DomainError("epsilon must be a finite non-negative number");
  }
  if (!(delta >= 0.0 && delta < 1.0)) {
    throw DomainError("delta must lie in [0, 1)");
  }
  return DpParams{epsilon, delta};
}

// Mechanisms on disjoint data: (max epsilon, max delta).
inline DpParams parallel_compose(std::span<const DpParams> params) {
  if (params.empty()) {
    throw DomainError("parallel_compose needs at least one mechanism");
  }
  DpParams out = params.front();
  for (const DpParams& p : params) {
    out.epsilon = std::max(out.epsilon, p.epsilon);
    out.delta = std::max(out.delta, p.delta);
  }
  return out;
}

// Laplace noise scale giving epsilon-DP for a sensitivity-1 count.
inline double laplace_scale(double epsilon) {
  if (!(epsilon > 0.0)) throw DomainError("laplace_scale requires epsilon > 0");
  return 1.0 / epsilon;
}

inline double laplace_epsilon(double scale) {
  if (!(scale > 0.0)) throw DomainError("Laplace scale must be positive");
  return 1.0 / scale;
}

enum class Direction { kForward, kBackward };

inline const char* direction_name(Direction d) {
  return d == Direction::kForward ? "forward" : "backward";
}

struct MorrisEpsilon {
  ExtReal epsilon;
  std::int64_t argmax_k = 0;
  Direction direction = Direction::kForward;

  // epsilon rounded up to a double.
  double upper() const { return epsilon.to_double(MPFR_RNDU); }
};

struct MorrisEpsilonOptions {
  // Also check the backward ratios for every n, not only at n = 2^l + 1.
  bool strict = false;
  std::uint64_t row_cap = dist::kDefaultRowCap;
};

namespace detail {

// p(m, k) for k in `ks`, by recursion when m is within the cap.
inline std::vector<ExtReal> morris_column_values(std::uint64_t m,
                                                 const dist::Interval& ks,
                                                 std::uint64_t cap) {
  std::vector<ExtReal> out;
  if (m <= cap) {
    const dist::ProbRow row = dist::morris_row(m, cap);
    for (std::int64_t k = ks.lo; k <= ks.hi; ++k) out.push_back(row.at(k));
  } else {
    for (std::int64_t k = ks.lo; k <= ks.hi; ++k) out.push_back(dist::morris_pmf(m, k));
  }
  return out;
}

inline bool is_power_of_two_plus_one(std::uint64_t n) {
  return n >= 2 && std::has_single_bit(n - 1);
}

}  // namespace detail

// max over k in I_n of |ln(p(n+1, k) / p(n, k))|, plus the backward ratios
// p(n-1, k) / p(n, k) when n = 2^l + 1 (or always, in strict mode).
inline MorrisEpsilon morris_epsilon_exact(std::uint64_t n,
                                          MorrisEpsilonOptions options = {}) {
  if (n < kMorrisAuditMinN) {
    throw DomainError("the Morris privacy loss is audited for n >= 17, got n = " +
                      std::to_string(n));
  }
  const dist::Interval in = dist::interval_In(n);
  const std::vector<ExtReal> here = detail::morris_column_values(n, in, options.row_cap);
  const std::vector<ExtReal> next =
      detail::morris_column_values(n + 1, in, options.row_cap);

  MorrisEpsilon best{ExtReal(-1L), in.lo, Direction::kForward};
  auto consider = [&](const std::vector<ExtReal>& other, Direction dir) {
    for (std::size_t i = 0; i < here.size(); ++i) {
      if (here[i].is_zero() || other[i].is_zero()) {
        throw DomainError("zero probability inside I_n at n = " + std::to_string(n));
      }
      ExtReal loss = abs(log(other[i] / here[i]));
      if (loss > best.epsilon) {
        best.epsilon = std::move(loss);
        best.argmax_k = in.lo + static_cast<std::int64_t>(i);
        best.direction = dir;
      }
    }
  };
  consider(next, Direction::kForward);
  if (options.strict || detail::is_power_of_two_plus_one(n)) {
    consider(detail::morris_column_values(n - 1, in, options.row_cap),
             Direction::kBackward);
  }
  return best;
}

// L(n) = -ln(1 - 16/n).
inline double morris_bound_L(std::uint64_t n) {
  if (n <= 16) throw DomainError("L(n) = -ln(1 - 16/n) requires n > 16");
  return -std::log1p(-16.0 / static_cast<double>(n));
}

// -ln(1 - w/n) at the working precision; w = 16 gives L(n), w = 8 the
// matching lower curve.
inline ExtReal morris_log_curve(std::uint64_t n, long w) {
  if (n <= static_cast<std::uint64_t>(w)) {
    throw DomainError("-ln(1 - w/n) requires n > w");
  }
  return -log1p(-(ExtReal(w) / ExtReal(n)));
}

struct MorrisAudit {
  std::uint64_t n = 0;
  dist::Interval interval;
  ExtReal epsilon_exact;
  double epsilon_bound = 0.0;  // L(n)
  ExtReal delta1;
  ExtReal delta2;
  ExtReal delta_total;
  std::int64_t argmax_k = 0;
  Direction direction = Direction::kForward;

  // The guarantee this audit supports: (min(exact, L(n)), delta total), both
  // rounded up.
  DpParams claim() const {
    return DpParams{std::min(epsilon_exact.to_double(MPFR_RNDU), epsilon_bound),
                    delta_total.to_double(MPFR_RNDU)};
  }
};

inline MorrisAudit morris_audit(std::uint64_t n, MorrisEpsilonOptions options = {}) {
  MorrisEpsilon eps = morris_epsilon_exact(n, options);
  dist::Tails tails = dist::morris_tails(n, options.row_cap);
  MorrisAudit out;
  out.n = n;
  out.interval = dist::interval_In(n);
  out.epsilon_exact = std::move(eps.epsilon);
  out.epsilon_bound = morris_bound_L(n);
  out.delta1 = std::move(tails.lower);
  out.delta2 = std::move(tails.upper);
  out.delta_total = std::move(tails.total);
  out.argmax_k = eps.argmax_k;
  out.direction = eps.direction;
  return out;
}

struct MorrisAsymptotic {
  std::int64_t rho = 0;
  double epsilon_bound = 0.0;
  ExtReal delta_exact;  // mass outside J_n(c)
};

// Envelope for the privacy loss over J_n(c):
//   max(-ln(1 - 2^(rho - ceil(log2 n))), ln(1 + (ceil(log2 n) + rho)^2 / n)).
inline MorrisAsymptotic morris_asymptotic_params(std::uint64_t n, double c,
                                                 std::uint64_t cap = dist::kDefaultRowCap) {
  const std::int64_t rho = dist::jn_radius(n, c);
  const auto centre = static_cast<std::int64_t>(dist::ceil_log2(n));
  if (rho >= centre) {
    throw DomainError("J_n(c) reaches level 0 for n = " + std::to_string(n) +
                      "; the envelope needs ceil(c*log2(ln n)) < ceil(log2 n)");
  }
  const double nd = static_cast<double>(n);
  const double first = -std::log1p(-std::ldexp(1.0, static_cast<int>(rho - centre)));
  const double width = static_cast<double>(centre + rho);
  const double second = std::log1p(width * width / nd);
  return MorrisAsymptotic{rho, std::max(first, second), dist::morris_tail_Jn(n, c, cap)};
}

struct MaxGeoOptions {
  // Use ceil(log2(1 + 1/epsilon)) for l_epsilon instead of the exact
  // threshold ceil(log2(e^eps / (e^eps - 1))).
  bool compat_level = false;
};

// -ln(1 - 2^-l): the largest per-level privacy loss above level l.
inline double maxgeo_level_loss(std::int64_t l) {
  return -std::log1p(-std::ldexp(1.0, static_cast<int>(-l)));
}

// Smallest l >= 1 with -ln(1 - 2^-l) <= epsilon.
inline std::int64_t maxgeo_l_epsilon(double epsilon, MaxGeoOptions options = {}) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw DomainError("l_epsilon requires a finite epsilon > 0");
  }
  if (options.compat_level) {
    return std::max<std::int64_t>(
        1, static_cast<std::int64_t>(std::ceil(std::log2(1.0 + 1.0 / epsilon))));
  }
  const double x = 1.0 / -std::expm1(-epsilon);  // e^eps / (e^eps - 1)
  std::int64_t l = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(std::log2(x))));
  // Check the defining inequality with a few ulps of slack, so that an
  // epsilon that is exactly a threshold (ln 2, ln(4/3), ...) up to rounding
  // lands on its own level.
  const double slack = epsilon * (1.0 + 8.0 * std::numeric_limits<double>::epsilon());
  while (l > 1 && maxgeo_level_loss(l - 1) <= slack) --l;
  while (maxgeo_level_loss(l) > slack) ++l;
  return l;
}

// ceil(ln delta / ln(1 - 2^-l_epsilon)).
inline std::uint64_t maxgeo_min_n(double epsilon, double delta, MaxGeoOptions options = {}) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw DomainError("maxgeo_min_n requires 0 < delta < 1");
  }
  const std::int64_t l = maxgeo_l_epsilon(epsilon, options);
  const double ratio =
      std::log(delta) / std::log1p(-std::ldexp(1.0, static_cast<int>(-l)));
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil(ratio)));
}

struct MaxGeoEnvelope {
  std::int64_t exponent = 0;  // floor(-log2(1 - delta^(1/n)))
  double eps0 = 0.0;          // (2^e - 1)^-1
  double psi = 0.0;           // ((1 - delta^(1/n))^-1 - 1)^-1
  double phi = 0.0;           // (2^(e-1) - 1)^-1, +inf when e = 1
};

// Privacy level reachable at a given n, with its two envelopes.
inline MaxGeoEnvelope maxgeo_eps_given_n(std::uint64_t n, double delta) {
  if (n < 1) throw DomainError("maxgeo_eps_given_n requires n >= 1");
  if (!(delta > 0.0 && delta < 1.0)) {
    throw DomainError("maxgeo_eps_given_n requires 0 < delta < 1");
  }
  // u = 1 - delta^(1/n), kept accurate for large n.
  const ExtReal u = -expm1(log(ExtReal(delta)) / ExtReal(n));
  const auto e = static_cast<std::int64_t>(floor(-log2(u)).to_double());
  if (e <= 0) {
    throw DomainError("delta^(1/n) <= 1/2 at n = " + std::to_string(n) +
                      ", delta = " + ExtReal(delta).to_string(6) +
                      ": floor(-log2(1 - delta^(1/n))) is " + std::to_string(e) +
                      ", so no level satisfies the tail condition");
  }
  MaxGeoEnvelope out;
  out.exponent = e;
  out.eps0 = 1.0 / (std::ldexp(1.0, static_cast<int>(e)) - 1.0);
  out.psi = (u / (1L - u)).to_double();
  out.phi = e == 1 ? std::numeric_limits<double>::infinity()
                   : 1.0 / (std::ldexp(1.0, static_cast<int>(e - 1)) - 1.0);
  return out;
}

struct MaxGeoDpCheck {
  std::uint64_t n = 0;
  std::int64_t l_epsilon = 0;
  ExtReal cdf_tail;         // P(M_n <= l_epsilon)
  ExtReal max_ratio;        // max over checked l > l_epsilon of pmf(n,l)/pmf(n+1,l)
  std::int64_t checked_to = 0;
  bool tail_ok = false;
  bool ratio_ok = false;
};

// Verifies the two conditions behind the MaxGeo guarantee at n:
// the mass at or below l_epsilon is at most delta, and above l_epsilon the
// pmf ratio between n and n+1 requests stays within e^epsilon. Levels are
// checked up to l_epsilon + log2(n) + extra_levels.
inline MaxGeoDpCheck maxgeo_dp_check(double epsilon, double delta, std::uint64_t n,
                                     std::int64_t extra_levels = 64,
                                     MaxGeoOptions options = {}) {
  MaxGeoDpCheck out;
  out.n = n;
  out.l_epsilon = maxgeo_l_epsilon(epsilon, options);
  out.cdf_tail = dist::maxgeo_cdf(n, out.l_epsilon);
  out.tail_ok = out.cdf_tail <= ExtReal(delta);
  out.checked_to = out.l_epsilon + static_cast<std::int64_t>(std::bit_width(n)) + extra_levels;
  out.max_ratio = ExtReal(0L);
  for (std::int64_t l = out.l_epsilon + 1; l <= out.checked_to; ++l) {
    ExtReal ratio = dist::maxgeo_pmf(n, l) / dist::maxgeo_pmf(n + 1, l);
    if (ratio > out.max_ratio) out.max_ratio = std::move(ratio);
  }
  out.ratio_ok = out.max_ratio <= exp(ExtReal(epsilon));
  return out;
}

}  // namespace probcount
