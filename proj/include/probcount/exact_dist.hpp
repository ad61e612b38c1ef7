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

// Exact distributions of the Morris and MaxGeo counters.
//
// Two independent routes to the Morris pmf p(n, l) = P(M_n = l):
//
//   * morris_row: the forward recursion
//       p(n+1, l) = (1 - 2^-l) p(n, l) + 2^(1-l) p(n, l-1),  p(0, 1) = 1,
//     which only adds positive terms and is accurate at working precision,
//     but costs O(n^2) for a whole row.
//   * morris_pmf: Flajolet's alternating closed form
//       p(n, l) = sum_{j<l} (-1)^j 2^(-j(j-1)/2) (1 - 2^(j-l))^n r_j r_{l-1-j}
//     with r_k = prod_{i<=k} (1 - 2^-i)^-1, evaluated per (n, l).
//
// The alternating sum cancels about l(l-1)/2 bits in the far tail, so
// morris_pmf sizes its internal precision from a rigorous lower bound on the
// result and refuses (ResourceError) past a configurable ceiling instead of
// returning noise.

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <gmpxx.h>

#include "probcount/errors.hpp"
#include "probcount/ext_real.hpp"

namespace probcount::dist {

inline constexpr std::uint64_t kDefaultRowCap = 4096;
inline constexpr long kDefaultPmfMaxBits = 1L << 16;
inline constexpr std::uint64_t kInfinity = std::numeric_limits<std::uint64_t>::max();

// ceil(log2 n) for n >= 1, by bit length.
constexpr std::uint32_t ceil_log2(std::uint64_t n) {
  return n <= 1 ? 0U : static_cast<std::uint32_t>(std::bit_width(n - 1));
}

// Exact pmf of M_n on its support [1 : n+1].
struct ProbRow {
  std::uint64_t n = 0;
  std::vector<ExtReal> probs;  // probs[l - 1] = p(n, l)

  std::uint64_t support_max() const { return probs.size(); }

  ExtReal at(std::int64_t l) const {
    if (l < 1 || static_cast<std::uint64_t>(l) > probs.size()) {
      return ExtReal(0L);
    }
    return probs[static_cast<std::size_t>(l - 1)];
  }

  ExtReal total() const {
    ExtReal s(0L);
    for (const auto& p : probs) s += p;
    return s;
  }
};

inline ProbRow initial_morris_row() {
  ProbRow row;
  row.n = 0;
  row.probs.emplace_back(1L);
  return row;
}

// Advances a row by one request, in place.
inline void advance_morris_row(ProbRow& row) {
  row.probs.emplace_back(0L);
  ExtReal stay;
  ExtReal climb;
  for (std::size_t idx = row.probs.size(); idx-- > 0;) {
    const long l = static_cast<long>(idx) + 1;
    ExtReal& p = row.probs[idx];
    stay.assign_scaled(p, -l);
    p -= stay;
    if (idx > 0) {
      climb.assign_scaled(row.probs[idx - 1], -(l - 1));
      p += climb;
    }
  }
  ++row.n;
}

// Full row for n by recursion. n above `cap` is refused: use morris_pmf.
inline ProbRow morris_row(std::uint64_t n, std::uint64_t cap = kDefaultRowCap) {
  if (n > cap) {
    throw ResourceError("morris_row(" + std::to_string(n) +
                        ") exceeds the recursion cap of " + std::to_string(cap) +
                        "; evaluate single entries with morris_pmf instead");
  }
  ProbRow row = initial_morris_row();
  for (std::uint64_t i = 0; i < n; ++i) advance_morris_row(row);
  return row;
}

// r_k = prod_{i=1}^{k} (1 - 2^-i)^-1; k == kInfinity gives the limit R.
inline ExtReal r_product(std::uint64_t k) {
  ExtReal r(1L);
  const long bits = working_precision_bits();
  // Factors with i > bits + 2 are 1 at this precision.
  const std::uint64_t last =
      (k == kInfinity) ? static_cast<std::uint64_t>(bits + 2)
                       : std::min<std::uint64_t>(k, static_cast<std::uint64_t>(bits + 2));
  for (std::uint64_t i = 1; i <= last; ++i) {
    r /= 1L - ExtReal::pow2(-static_cast<long>(i));
  }
  return r;
}

struct PmfOptions {
  // Highest internal precision the closed form may use.
  long max_bits = kDefaultPmfMaxBits;
  // Bits of accuracy wanted in the result beyond cancellation.
  long target_bits = 0;  // 0: the working precision
};

// Rigorous lower bound on log2 p(n, l) for 1 <= l <= n + 1: the path that
// climbs on each of the first l - 1 requests and then stays put.
inline double morris_pmf_log2_lower_bound(std::uint64_t n, std::uint64_t l) {
  const double nd = static_cast<double>(n);
  const double ld = static_cast<double>(l);
  const int e = static_cast<int>(std::min<std::uint64_t>(l, 1100));
  return -ld * (ld - 1.0) / 2.0 +
         (nd - ld + 1.0) * std::log1p(-std::ldexp(1.0, -e)) / std::log(2.0);
}

// Internal precision the closed form needs for (n, l) at `target_bits`.
inline long morris_pmf_required_bits(std::uint64_t n, std::uint64_t l,
                                     long target_bits) {
  const double nd = static_cast<double>(n);
  // log2 of the largest |term|; r_j r_{l-1-j} <= R^2 < 2^3.6.
  double max_term = -std::numeric_limits<double>::infinity();
  for (std::uint64_t j = 0; j < l; ++j) {
    const double jd = static_cast<double>(j);
    const int e = static_cast<int>(std::min<std::uint64_t>(l - j, 1100));
    const double t = -jd * (jd - 1.0) / 2.0 +
                     nd * std::log1p(-std::ldexp(1.0, -e)) / std::log(2.0);
    max_term = std::max(max_term, t);
  }
  max_term += 3.6 + std::log2(static_cast<double>(l));
  const double loss = std::max(0.0, max_term - morris_pmf_log2_lower_bound(n, l));
  return target_bits + static_cast<long>(std::ceil(loss)) + 32;
}

// p(n, l) by the closed form. Zero outside [1 : n+1].
inline ExtReal morris_pmf(std::uint64_t n, std::int64_t l, PmfOptions options = {}) {
  const long out_bits = working_precision_bits();
  if (l < 1 || static_cast<std::uint64_t>(l) > n + 1) return ExtReal(0L);
  if (n == 0) return ExtReal(1L);
  const auto ul = static_cast<std::uint64_t>(l);
  const long target = options.target_bits > 0 ? options.target_bits : out_bits;
  const long bits = morris_pmf_required_bits(n, ul, target);
  if (bits > options.max_bits) {
    throw ResourceError("closed-form p(" + std::to_string(n) + ", " +
                        std::to_string(l) + ") needs " + std::to_string(bits) +
                        " bits of precision, above the ceiling of " +
                        std::to_string(options.max_bits));
  }
  ExtReal sum = ExtReal::with_precision(bits);
  {
    ScopedPrecision guard(bits);
    // r_0 .. r_{l-1}
    std::vector<ExtReal> r;
    r.reserve(ul);
    r.emplace_back(1L);
    for (std::uint64_t i = 1; i < ul; ++i) {
      r.push_back(r.back() / (1L - ExtReal::pow2(-static_cast<long>(i))));
    }
    for (std::uint64_t j = 0; j < ul; ++j) {
      ExtReal term = pow(1L - ExtReal::pow2(-static_cast<long>(ul - j)), n);
      term *= r[j];
      term *= r[ul - 1 - j];
      const auto jj = static_cast<long>(j);
      term.scale2(-(jj * (jj - 1)) / 2);
      if (j % 2 == 0) {
        sum += term;
      } else {
        sum -= term;
      }
    }
  }
  return sum.round_to(out_bits);
}

namespace detail {

// Non-negative fixed-point magnitude as a little-endian limb array.
struct Magnitude {
  std::vector<mp_limb_t> limbs;
  mp_size_t size = 0;

  void normalize() {
    while (size > 0 && limbs[static_cast<std::size_t>(size - 1)] == 0) --size;
  }
  void assign(const mpz_class& z) {
    size = static_cast<mp_size_t>(mpz_size(z.get_mpz_t()));
    limbs.assign(static_cast<std::size_t>(size), 0);
    for (mp_size_t i = 0; i < size; ++i) {
      limbs[static_cast<std::size_t>(i)] = mpz_getlimbn(z.get_mpz_t(), i);
    }
  }
  // this -= floor(this / 2^d)
  void shrink(unsigned long d, std::vector<mp_limb_t>& scratch) {
    const auto whole = static_cast<mp_size_t>(d / GMP_NUMB_BITS);
    const auto part = static_cast<unsigned>(d % GMP_NUMB_BITS);
    if (size <= whole) return;
    const mp_size_t n = size - whole;
    if (scratch.size() < static_cast<std::size_t>(n)) scratch.resize(static_cast<std::size_t>(n));
    if (part != 0) {
      mpn_rshift(scratch.data(), limbs.data() + whole, n, part);
    } else {
      mpn_copyi(scratch.data(), limbs.data() + whole, n);
    }
    mpn_sub(limbs.data(), limbs.data(), size, scratch.data(), n);
    normalize();
  }
};

// acc += x, where acc has room for any carry out of x.
inline void add_into(std::vector<mp_limb_t>& acc, const Magnitude& x) {
  if (x.size == 0) return;
  mp_limb_t carry = mpn_add_n(acc.data(), acc.data(), x.limbs.data(), x.size);
  for (std::size_t i = static_cast<std::size_t>(x.size); carry != 0; ++i) {
    carry = (++acc[i] == 0) ? 1 : 0;
  }
}

inline mpz_class to_mpz(const std::vector<mp_limb_t>& limbs) {
  mpz_class out;
  mpz_import(out.get_mpz_t(), limbs.size(), -1, sizeof(mp_limb_t), 0, 0,
             limbs.data());
  return out;
}

}  // namespace detail

// Evaluates the closed form for every column l in [1 : n_max + 1] over
// n in [l - 1 : n_max], calling sink(l, column) with column[i] = p(l-1+i, l)
// in increasing l. Same formula as morris_pmf, rewritten as
//   p(n, l) = r_{l-1} sum_j (-1)^j 2^(-j(j-1)/2 - j(l-1-j)) G(l-1, j) (1 - 2^(j-l))^n
// with G the Gaussian binomial coefficient at q = 2, so that the alternating
// sum runs in exact-integer fixed point and each power advances to the next
// n with one shift and one subtraction.
template <typename Sink>
void morris_closed_form_columns(std::uint64_t n_max, Sink&& sink,
                                long target_bits = 0) {
  const long out_bits = working_precision_bits();
  const long target = target_bits > 0 ? target_bits : out_bits;
  const std::uint64_t l_max = n_max + 1;
  // Fractional bits for column l: covers cancellation down to the smallest
  // entry, the requested accuracy, and one ulp lost per term per step.
  auto frac_bits = [&](std::uint64_t l) {
    return static_cast<long>(std::ceil(-morris_pmf_log2_lower_bound(n_max, l))) +
           target + 40 + static_cast<long>(std::bit_width(l) + std::bit_width(n_max));
  };
  const long f_max = frac_bits(l_max) + 64;

  // power[d] = (1 - 2^-d)^n * 2^f_max for the current n, d in [1 : l_max].
  std::vector<mpz_class> power(l_max + 1);
  for (std::uint64_t d = 1; d <= l_max; ++d) mpz_setbit(power[d].get_mpz_t(), f_max);
  std::uint64_t power_n = 0;
  mpz_class scratch;
  std::vector<mp_limb_t> limb_scratch;

  ExtReal r_prev = ExtReal::with_precision(out_bits + 64);
  r_prev = ExtReal(1L);

  constexpr std::uint64_t kBlock = 8;
  std::vector<mpz_class> gauss;
  std::vector<detail::Magnitude> terms;
  std::vector<std::vector<mp_limb_t>> even_sums(kBlock);
  std::vector<std::vector<mp_limb_t>> odd_sums(kBlock);
  std::vector<ExtReal> column;
  for (std::uint64_t l = 1; l <= l_max; ++l) {
    for (; power_n < l - 1; ++power_n) {
      for (std::uint64_t d = 1; d <= l_max; ++d) {
        mpz_fdiv_q_2exp(scratch.get_mpz_t(), power[d].get_mpz_t(), d);
        power[d] -= scratch;
      }
    }
    if (l >= 2) {
      ScopedPrecision guard(out_bits + 64);
      r_prev /= 1L - ExtReal::pow2(-static_cast<long>(l - 1));
    }
    const std::uint64_t m = l - 1;
    const long f = frac_bits(l);

    // G(m, j) for j in [0 : m].
    gauss.assign(l, mpz_class(1));
    for (std::uint64_t j = 1; j <= m; ++j) {
      mpz_class& g = gauss[j];
      mpz_mul_2exp(scratch.get_mpz_t(), gauss[j - 1].get_mpz_t(), m - j + 1);
      g = scratch - gauss[j - 1];
      mpz_class divisor(0);
      mpz_setbit(divisor.get_mpz_t(), j);
      divisor -= 1;
      mpz_divexact(g.get_mpz_t(), g.get_mpz_t(), divisor.get_mpz_t());
    }

    // |term j| at n = l - 1, scaled by 2^f.
    terms.resize(l);
    for (std::uint64_t j = 0; j < l; ++j) {
      const long e = static_cast<long>(j * (j - 1) / 2 + j * (m - j));
      const long shift = f_max - f + e;
      const long g_bits = static_cast<long>(mpz_sizeinbase(gauss[j].get_mpz_t(), 2));
      const long pre = std::max(0L, shift - g_bits);
      mpz_fdiv_q_2exp(scratch.get_mpz_t(), power[l - j].get_mpz_t(), pre);
      scratch *= gauss[j];
      mpz_fdiv_q_2exp(scratch.get_mpz_t(), scratch.get_mpz_t(), shift - pre);
      terms[j].assign(scratch);
    }

    // Every |term| is below 2^(f + 3); l of them need bit_width(l) more bits.
    const auto sum_limbs =
        static_cast<std::size_t>((f + 4 + static_cast<long>(std::bit_width(l))) /
                                     GMP_NUMB_BITS + 2);
    column.clear();
    const std::uint64_t count = n_max - m + 1;
    for (std::uint64_t base = 0; base < count; base += kBlock) {
      const std::uint64_t width = std::min(kBlock, count - base);
      for (std::uint64_t b = 0; b < width; ++b) {
        even_sums[b].assign(sum_limbs, 0);
        odd_sums[b].assign(sum_limbs, 0);
      }
      for (std::uint64_t j = l; j-- > 0;) {
        detail::Magnitude& t = terms[j];
        auto& sums = (j % 2 == 0) ? even_sums : odd_sums;
        for (std::uint64_t b = 0; b < width; ++b) {
          detail::add_into(sums[b], t);
          if (base + b + 1 < count) t.shrink(l - j, limb_scratch);
        }
      }
      for (std::uint64_t b = 0; b < width; ++b) {
        const mpz_class sum = detail::to_mpz(even_sums[b]) - detail::to_mpz(odd_sums[b]);
        ScopedPrecision guard(out_bits);
        ExtReal p = ExtReal::from_scaled_integer(sum.get_mpz_t(), -f);
        p *= r_prev;
        column.push_back(p.round_to(out_bits));
      }
    }
    sink(l, static_cast<const std::vector<ExtReal>&>(column));
  }
}

struct Moments {
  ExtReal mean;
  ExtReal variance;
  ExtReal mean_pow2;  // E[2^M]
};

inline Moments moments_of(const ProbRow& row) {
  ExtReal m1(0L);
  ExtReal m2(0L);
  ExtReal p2(0L);
  for (std::size_t i = 0; i < row.probs.size(); ++i) {
    const long l = static_cast<long>(i) + 1;
    const ExtReal& p = row.probs[i];
    m1 += p * l;
    m2 += p * (l * l);
    ExtReal w(p);
    w.scale2(l);
    p2 += w;
  }
  return Moments{m1, m2 - m1 * m1, p2};
}

inline Moments morris_moments(std::uint64_t n, std::uint64_t cap = kDefaultRowCap) {
  return moments_of(morris_row(n, cap));
}

// Inclusive discrete interval [lo : hi].
struct Interval {
  std::int64_t lo = 1;
  std::int64_t hi = 1;

  bool contains(std::int64_t k) const { return lo <= k && k <= hi; }
  bool covers(const Interval& other) const {
    return lo <= other.lo && other.hi <= hi;
  }
  friend bool operator==(const Interval&, const Interval&) = default;
};

// I_n = [max(1, ceil(log2 n) - 4) : min(n + 1, ceil(log2 n) + 4)].
inline Interval interval_In(std::uint64_t n) {
  if (n < 1) throw DomainError("I_n requires n >= 1");
  const auto c = static_cast<std::int64_t>(ceil_log2(n));
  return Interval{std::max<std::int64_t>(1, c - 4),
                  std::min<std::int64_t>(static_cast<std::int64_t>(n) + 1, c + 4)};
}

// rho = ceil(c * log2(ln n)), required to be >= 1.
inline std::int64_t jn_radius(std::uint64_t n, double c) {
  if (n < 1 || !(c > 0.0)) throw DomainError("J_n(c) requires n >= 1 and c > 0");
  const double raw = c * std::log2(std::log(static_cast<double>(n)));
  const double rho = std::ceil(raw);
  if (!(rho >= 1.0)) {
    throw DomainError("n too small for this c: ceil(c*log2(ln n)) < 1 for n = " +
                      std::to_string(n));
  }
  return static_cast<std::int64_t>(rho);
}

inline Interval interval_Jn(std::uint64_t n, double c) {
  const std::int64_t rho = jn_radius(n, c);
  const auto centre = static_cast<std::int64_t>(ceil_log2(n));
  return Interval{std::max<std::int64_t>(1, centre - rho),
                  std::min<std::int64_t>(static_cast<std::int64_t>(n) + 1,
                                         centre + rho)};
}

// P(M_n outside `keep`). Uses the full row when n is within the recursion
// cap, otherwise the closed form on the short side sums only.
inline ExtReal morris_mass_outside(std::uint64_t n, const Interval& keep,
                                   std::uint64_t cap = kDefaultRowCap) {
  if (n <= cap) {
    const ProbRow row = morris_row(n, cap);
    ExtReal out(0L);
    for (std::size_t i = 0; i < row.probs.size(); ++i) {
      if (!keep.contains(static_cast<std::int64_t>(i) + 1)) out += row.probs[i];
    }
    return out;
  }
  ExtReal below(0L);
  for (std::int64_t l = 1; l < keep.lo; ++l) below += morris_pmf(n, l);
  ExtReal up_to_hi(0L);
  for (std::int64_t l = 1; l <= keep.hi; ++l) up_to_hi += morris_pmf(n, l);
  return below + (1L - up_to_hi);
}

struct Tails {
  ExtReal lower;  // P(M_n <= ceil(log2 n) - 5)
  ExtReal upper;  // P(M_n >= ceil(log2 n) + 5)
  ExtReal total;
};

inline Tails morris_tails(std::uint64_t n, std::uint64_t cap = kDefaultRowCap) {
  if (n < 1) throw DomainError("morris_tails requires n >= 1");
  const auto c = static_cast<std::int64_t>(ceil_log2(n));
  const std::int64_t low_edge = c - 5;   // inclusive
  const std::int64_t high_edge = c + 5;  // inclusive
  ExtReal lower(0L);
  ExtReal upper(0L);
  if (n <= cap) {
    const ProbRow row = morris_row(n, cap);
    for (std::size_t i = 0; i < row.probs.size(); ++i) {
      const auto l = static_cast<std::int64_t>(i) + 1;
      if (l <= low_edge) lower += row.probs[i];
      if (l >= high_edge) upper += row.probs[i];
    }
  } else {
    for (std::int64_t l = 1; l <= low_edge; ++l) lower += morris_pmf(n, l);
    ExtReal below_high(0L);
    for (std::int64_t l = 1; l < high_edge; ++l) below_high += morris_pmf(n, l);
    upper = 1L - below_high;
  }
  ExtReal total = lower + upper;
  return Tails{std::move(lower), std::move(upper), std::move(total)};
}

// P(M_n not in J_n(c)).
inline ExtReal morris_tail_Jn(std::uint64_t n, double c,
                              std::uint64_t cap = kDefaultRowCap) {
  return morris_mass_outside(n, interval_Jn(n, c), cap);
}

// P(max of n Geo(1/2) draws <= l) = (1 - 2^-l)^n.
inline ExtReal maxgeo_cdf(std::uint64_t n, std::int64_t l) {
  if (l < 1) return n == 0 ? ExtReal(1L) : ExtReal(0L);
  return pow(1L - ExtReal::pow2(-l), n);
}

// cdf(l) - cdf(l-1), evaluated as cdf(l) * (1 - (1 - 1/(2^l - 1))^n) so that
// the far tail keeps full relative precision.
inline ExtReal maxgeo_pmf(std::uint64_t n, std::int64_t l) {
  if (n == 0) return ExtReal(l == 1 ? 1L : 0L);
  if (l < 1) return ExtReal(0L);
  if (l == 1) return ExtReal::pow2(-static_cast<long>(n));
  const ExtReal step = 1L / (ExtReal::pow2(l) - 1L);
  const ExtReal ratio = -expm1(log1p(-step) * ExtReal(n));
  return maxgeo_cdf(n, l) * ratio;
}

struct RatioEntry {
  std::int64_t i = 0;
  ExtReal theta;   // p(n, i) / p(n, i+1)
  ExtReal pow2;    // 2^(i-4)
  ExtReal scaled;  // 2^(4-i) * theta
};

inline std::vector<RatioEntry> ratio_table(std::uint64_t n, std::int64_t i_max,
                                           std::uint64_t cap = kDefaultRowCap) {
  if (i_max < 1 || static_cast<std::uint64_t>(i_max) > n) {
    throw DomainError("ratio_table needs 1 <= i_max <= n");
  }
  const ProbRow row = morris_row(n, cap);
  std::vector<RatioEntry> out;
  for (std::int64_t i = 1; i <= i_max; ++i) {
    RatioEntry e;
    e.i = i;
    e.theta = row.at(i) / row.at(i + 1);
    e.pow2 = ExtReal::pow2(i - 4);
    e.scaled = e.theta;
    e.scaled.scale2(4 - i);
    out.push_back(std::move(e));
  }
  return out;
}

struct LemmaRow {
  std::int64_t k = 0;
  ExtReal at_k4;  // p(2^k + 1, k + 4)
  ExtReal at_k5;  // p(2^k + 1, k + 5)
};

struct LemmaSequences {
  std::vector<LemmaRow> rows;
  bool first_descending = true;   // over k in [max(2, k_min) : k_max]
  bool second_ascending = true;   // over k in [max(3, k_min) : k_max]
  bool factor_claim_holds = true; // p(.., k+4) <= 2^7 p(.., k+5) for k >= 7
};

inline LemmaSequences lemma_sequences(std::int64_t k_min, std::int64_t k_max) {
  if (k_min < 2 || k_min > k_max || k_max > 14) {
    throw DomainError("lemma_sequences requires 2 <= k_min <= k_max <= 14");
  }
  LemmaSequences out;
  for (std::int64_t k = k_min; k <= k_max; ++k) {
    const std::uint64_t n = (std::uint64_t{1} << k) + 1;
    out.rows.push_back(LemmaRow{k, morris_pmf(n, k + 4), morris_pmf(n, k + 5)});
  }
  for (std::size_t i = 1; i < out.rows.size(); ++i) {
    const LemmaRow& prev = out.rows[i - 1];
    const LemmaRow& cur = out.rows[i];
    if (prev.k >= 2 && !(cur.at_k4 < prev.at_k4)) out.first_descending = false;
    if (prev.k >= 3 && !(cur.at_k5 > prev.at_k5)) out.second_ascending = false;
  }
  for (const LemmaRow& r : out.rows) {
    if (r.k >= 7) {
      ExtReal bound(r.at_k5);
      bound.scale2(7);
      if (!(r.at_k4 <= bound)) out.factor_claim_holds = false;
    }
  }
  return out;
}

}  // namespace probcount::dist
