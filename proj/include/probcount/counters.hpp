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

// Probabilistic counters: Morris, MaxGeo, PCSA and HyperLogLog.
//
// Counters are plain single-writer values. Every random decision is made
// from fair bits so that branch probabilities are exact powers of two; the
// only floating-point sampling is the geometric waiting time used by
// MorrisCounter::skip_batch.

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "probcount/errors.hpp"
#include "probcount/ext_real.hpp"
#include "probcount/fm_constant.hpp"
#include "probcount/random_source.hpp"

namespace probcount {

// The next k fair bits, first one least significant.
template <FairBitSource Source>
std::uint64_t draw_bits(Source& source, unsigned k) {
  if constexpr (requires { source.bits(k); }) {
    return source.bits(k);
  } else {
    std::uint64_t out = 0;
    for (unsigned i = 0; i < k; ++i) {
      if (source.bit()) out |= std::uint64_t{1} << i;
    }
    return out;
  }
}

// True with probability exactly 2^-m. Always consumes m bits and succeeds
// iff every one of them is zero.
template <FairBitSource Source>
bool bernoulli_pow2(Source& source, std::uint32_t m) {
  if (m == 0) {
    throw DomainError("bernoulli_pow2 requires m >= 1");
  }
  bool all_zero = true;
  for (std::uint32_t left = m; left > 0;) {
    const unsigned take = std::min<std::uint32_t>(left, 64);
    if (draw_bits(source, take) != 0) all_zero = false;
    left -= take;
  }
  return all_zero;
}

// Geo(1/2) on {1, 2, ...}: the number of bits read up to and including the
// first 1.
template <FairBitSource Source>
std::uint32_t geometric_half(Source& source) {
  if constexpr (requires { source.count_to_first_one(); }) {
    return source.count_to_first_one();
  } else {
    std::uint32_t count = 1;
    while (!source.bit()) ++count;
    return count;
  }
}

// Number of failures-then-success draws W >= 1 until the first success of a
// Bernoulli(2^-level) trial, by inversion: W = ceil(ln U / ln(1 - 2^-level)).
template <UniformSource Source>
std::uint64_t geometric_waiting_time(Source& source, std::uint32_t level) {
  const long double u = source.uniform01_extended();
  const long double p = std::ldexp(1.0L, -static_cast<int>(level));
  const long double w = std::ceil(std::log(u) / std::log1p(-p));
  if (!(w < 1.8e19L)) return UINT64_MAX;
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(w));
}

class MorrisCounter {
 public:
  MorrisCounter() = default;
  // Builds a counter already at `level`; for tests and deserialisation.
  static MorrisCounter at_level(std::uint32_t level,
                                std::uint64_t requests_seen = 0) {
    if (level < 1) throw DomainError("Morris level must be >= 1");
    MorrisCounter c;
    c.level_ = level;
    c.requests_seen_ = requests_seen;
    return c;
  }

  std::uint32_t level() const { return level_; }
  std::uint64_t requests_seen() const { return requests_seen_; }

  template <FairBitSource Source>
  void observe(bool datum, Source& source) {
    if (!datum) return;
    ++requests_seen_;
    if (bernoulli_pow2(source, level_)) ++level_;
  }

  // Equivalent in distribution to `k` calls of observe(true, ...), using one
  // uniform draw per level change instead of `level` bits per request.
  template <UniformSource Source>
  void skip_batch(std::uint64_t k, Source& source) {
    std::uint64_t remaining = k;
    while (remaining > 0) {
      const std::uint64_t wait = geometric_waiting_time(source, level_);
      if (wait > remaining) break;
      remaining -= wait;
      ++level_;
    }
    requests_seen_ += k;
  }

  friend bool operator==(const MorrisCounter&, const MorrisCounter&) = default;

 private:
  std::uint32_t level_ = 1;
  std::uint64_t requests_seen_ = 0;
};

// 2^M - 2, an unbiased estimate of the request count.
inline std::uint64_t morris_estimate(const MorrisCounter& counter) {
  if (counter.level() >= 64) {
    throw ResourceError("Morris level too large for a 64-bit estimate");
  }
  return (std::uint64_t{1} << counter.level()) - 2;
}

// Var(2^M_n - 2) = n(n+1)/2 as a function of the true count n.
inline long double morris_variance_at(std::uint64_t n) {
  const long double x = static_cast<long double>(n);
  return x * (x + 1.0L) / 2.0L;
}

class MaxGeoCounter {
 public:
  MaxGeoCounter() = default;
  static MaxGeoCounter at_level(std::uint32_t level,
                                std::uint64_t requests_seen = 0) {
    if (level < 1) throw DomainError("MaxGeo level must be >= 1");
    MaxGeoCounter c;
    c.level_ = level;
    c.requests_seen_ = requests_seen;
    return c;
  }

  std::uint32_t level() const { return level_; }
  std::uint64_t requests_seen() const { return requests_seen_; }

  template <FairBitSource Source>
  void observe(bool datum, Source& source) {
    if (!datum) return;
    ++requests_seen_;
    level_ = std::max(level_, geometric_half(source));
  }

  // Applies one already-drawn geometric value.
  void absorb(std::uint32_t draw) {
    ++requests_seen_;
    level_ = std::max(level_, draw);
  }

  friend MaxGeoCounter maxgeo_merge(const MaxGeoCounter& a,
                                    const MaxGeoCounter& b) {
    MaxGeoCounter out;
    out.level_ = std::max(a.level_, b.level_);
    out.requests_seen_ = a.requests_seen_ + b.requests_seen_;
    return out;
  }

  friend bool operator==(const MaxGeoCounter&, const MaxGeoCounter&) = default;

 private:
  std::uint32_t level_ = 1;
  std::uint64_t requests_seen_ = 0;
};

// floor(2^M / phi).
inline std::uint64_t maxgeo_estimate(const MaxGeoCounter& counter,
                                     const FMConstant& phi) {
  const ExtReal value = ExtReal::pow2(counter.level()) / phi.phi;
  return static_cast<std::uint64_t>(floor(value).to_double());
}

// m MaxGeo registers fed by uniform lot assignment (stochastic averaging).
class PcsaCounter {
 public:
  explicit PcsaCounter(std::uint32_t lots) : registers_(lots) {
    if (lots < 2 || !std::has_single_bit(lots)) {
      throw DomainError("lot count must be a power of two >= 2, got " +
                        std::to_string(lots));
    }
    lot_bits_ = static_cast<std::uint32_t>(std::countr_zero(lots));
  }

  std::uint32_t lots() const {
    return static_cast<std::uint32_t>(registers_.size());
  }
  std::uint32_t lot_bits() const { return lot_bits_; }
  std::uint64_t requests_seen() const { return requests_seen_; }
  const std::vector<MaxGeoCounter>& registers() const { return registers_; }

  std::vector<std::uint32_t> levels() const {
    std::vector<std::uint32_t> out;
    out.reserve(registers_.size());
    for (const auto& r : registers_) out.push_back(r.level());
    return out;
  }

  // Sum of register levels (sigma).
  std::uint64_t sigma() const {
    std::uint64_t s = 0;
    for (const auto& r : registers_) s += r.level();
    return s;
  }

  // Lot index is read from lot_bits() fair bits, first bit least significant.
  template <FairBitSource Source>
  void observe(bool datum, Source& source) {
    if (!datum) return;
    const auto lot = static_cast<std::uint32_t>(draw_bits(source, lot_bits_));
    registers_[lot].observe(true, source);
    ++requests_seen_;
  }

  void set_register(std::uint32_t lot, std::uint32_t level) {
    registers_.at(lot) = MaxGeoCounter::at_level(
        level, registers_.at(lot).requests_seen());
  }

  friend bool operator==(const PcsaCounter&, const PcsaCounter&) = default;

 private:
  std::vector<MaxGeoCounter> registers_;
  std::uint32_t lot_bits_ = 1;
  std::uint64_t requests_seen_ = 0;
};

// floor((m / phi) * 2^(sigma / m)), with the power taken in extended precision.
inline std::uint64_t pcsa_estimate(const PcsaCounter& counter,
                                   const FMConstant& phi) {
  const ExtReal m(counter.lots());
  const ExtReal exponent = ExtReal(counter.sigma()) / m;
  const ExtReal value = m / phi.phi * pow(ExtReal(2L), exponent);
  return static_cast<std::uint64_t>(floor(value).to_double());
}

// Bias correction alpha_m for the raw HyperLogLog estimator.
inline double hll_alpha(std::uint32_t lots) {
  if (lots < 16 || !std::has_single_bit(lots)) {
    throw DomainError("HyperLogLog requires m = 2^k with k >= 4, got m = " +
                      std::to_string(lots));
  }
  switch (lots) {
    case 16:
      return 0.673;
    case 32:
      return 0.697;
    case 64:
      return 0.709;
    default:
      return 0.7213 / (1.0 + 1.079 / static_cast<double>(lots));
  }
}

// Same register array as PCSA with the harmonic-mean estimator.
class HllCounter : public PcsaCounter {
 public:
  explicit HllCounter(std::uint32_t lots)
      : PcsaCounter(lots), alpha_(hll_alpha(lots)) {}

  double alpha() const { return alpha_; }

 private:
  double alpha_;
};

// alpha_m * m^2 / sum_j 2^-M[j]; no small- or large-range correction.
inline double hll_estimate(const HllCounter& counter) {
  long double harmonic = 0.0L;
  for (const auto& r : counter.registers()) {
    harmonic += std::ldexp(1.0L, -static_cast<int>(r.level()));
  }
  const long double m = counter.lots();
  return static_cast<double>(counter.alpha() * m * m / harmonic);
}

// Bits needed to store the level(s): bit length of each register, summed.
inline std::uint64_t memory_footprint(const MorrisCounter& c) {
  return std::bit_width(c.level());
}
inline std::uint64_t memory_footprint(const MaxGeoCounter& c) {
  return std::bit_width(c.level());
}
inline std::uint64_t memory_footprint(const PcsaCounter& c) {
  std::uint64_t bits = 0;
  for (const auto& r : c.registers()) bits += std::bit_width(r.level());
  return bits;
}

}  // namespace probcount
