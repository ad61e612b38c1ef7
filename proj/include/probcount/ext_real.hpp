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

// Extended-precision real number backed by MPFR.
//
// Every ExtReal carries its own precision (in mantissa bits). Values built
// from machine numbers take the calling thread's working precision, which
// defaults to 256 bits and is changed with ScopedPrecision. Binary operations
// produce a result at the larger of the two operand precisions, so mixing a
// high-precision intermediate with working-precision constants never loses
// bits silently. All rounding is to nearest unless stated otherwise.

#pragma once

#include <mpfr.h>

#include <algorithm>
#include <cmath>
#include <compare>
#include <concepts>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>

#include "probcount/errors.hpp"

namespace probcount {

inline constexpr long kDefaultPrecisionBits = 256;
inline constexpr long kMinPrecisionBits = 64;

namespace detail {

inline long& thread_precision_bits() {
  thread_local long bits = kDefaultPrecisionBits;
  return bits;
}

}  // namespace detail

// Current working precision of this thread in bits.
inline long working_precision_bits() { return detail::thread_precision_bits(); }

inline void set_working_precision_bits(long bits) {
  if (bits < kMinPrecisionBits || bits > MPFR_PREC_MAX) {
    throw DomainError("precision must be at least " +
                      std::to_string(kMinPrecisionBits) + " bits");
  }
  detail::thread_precision_bits() = bits;
}

// Reads PROBCOUNT_PRECISION_BITS, returning `fallback` when it is unset.
inline long precision_bits_from_env(long fallback = kDefaultPrecisionBits) {
  const char* raw = std::getenv("PROBCOUNT_PRECISION_BITS");
  if (raw == nullptr || *raw == '\0') return fallback;
  char* end = nullptr;
  const long bits = std::strtol(raw, &end, 10);
  if (end == raw || *end != '\0' || bits < kMinPrecisionBits) {
    throw DomainError(std::string("invalid PROBCOUNT_PRECISION_BITS: ") + raw);
  }
  return bits;
}

// Sets the working precision for the lifetime of the guard.
class ScopedPrecision {
 public:
  explicit ScopedPrecision(long bits) : saved_(working_precision_bits()) {
    set_working_precision_bits(bits);
  }
  ~ScopedPrecision() { detail::thread_precision_bits() = saved_; }
  ScopedPrecision(const ScopedPrecision&) = delete;
  ScopedPrecision& operator=(const ScopedPrecision&) = delete;

 private:
  long saved_;
};

class ExtReal {
 public:
  ExtReal() : ExtReal(0L) {}

  template <std::signed_integral I>
  ExtReal(I v) {  // NOLINT(google-explicit-constructor)
    mpfr_init2(value_, working_precision_bits());
    mpfr_set_si(value_, static_cast<long>(v), MPFR_RNDN);
  }
  template <std::unsigned_integral U>
  ExtReal(U v) {  // NOLINT(google-explicit-constructor)
    mpfr_init2(value_, working_precision_bits());
    mpfr_set_ui(value_, static_cast<unsigned long>(v), MPFR_RNDN);
  }
  ExtReal(double v) {  // NOLINT(google-explicit-constructor)
    mpfr_init2(value_, working_precision_bits());
    mpfr_set_d(value_, v, MPFR_RNDN);
  }

  // Parses a decimal literal at the working precision.
  static ExtReal parse(std::string_view text) {
    ExtReal out = with_precision(working_precision_bits());
    const std::string owned(text);
    if (mpfr_set_str(out.value_, owned.c_str(), 10, MPFR_RNDN) != 0) {
      throw DomainError("not a number: " + owned);
    }
    return out;
  }

  // Zero carrying an explicit precision.
  static ExtReal with_precision(long bits) {
    ExtReal out(Uninit{}, bits);
    mpfr_set_zero(out.value_, 1);
    return out;
  }

  ExtReal(const ExtReal& other) {
    mpfr_init2(value_, mpfr_get_prec(other.value_));
    mpfr_set(value_, other.value_, MPFR_RNDN);
  }
  ExtReal(ExtReal&& other) noexcept {
    mpfr_init2(value_, mpfr_get_prec(other.value_));
    mpfr_swap(value_, other.value_);
  }
  ExtReal& operator=(const ExtReal& other) {
    if (this != &other) {
      mpfr_set_prec(value_, mpfr_get_prec(other.value_));
      mpfr_set(value_, other.value_, MPFR_RNDN);
    }
    return *this;
  }
  ExtReal& operator=(ExtReal&& other) noexcept {
    mpfr_swap(value_, other.value_);
    return *this;
  }
  ~ExtReal() { mpfr_clear(value_); }

  long precision() const { return mpfr_get_prec(value_); }

  // Re-rounds the value to `bits` of mantissa.
  ExtReal& round_to(long bits) {
    mpfr_prec_round(value_, bits, MPFR_RNDN);
    return *this;
  }
  ExtReal rounded_to(long bits) const {
    ExtReal out(*this);
    out.round_to(bits);
    return out;
  }

  bool is_zero() const { return mpfr_zero_p(value_) != 0; }
  bool is_finite() const { return mpfr_number_p(value_) != 0; }
  int sign() const { return mpfr_sgn(value_); }
  // Binary exponent e with 0.5 <= |x| / 2^e < 1; meaningless for zero.
  long exponent2() const { return mpfr_get_exp(value_); }

  double to_double(mpfr_rnd_t rounding = MPFR_RNDN) const {
    return mpfr_get_d(value_, rounding);
  }
  long double to_long_double() const { return mpfr_get_ld(value_, MPFR_RNDN); }

  // log2 of |x| as a double; usable far outside the double exponent range.
  double log2_abs() const {
    long exp = 0;
    const double mant = mpfr_get_d_2exp(&exp, value_, MPFR_RNDN);
    return std::log2(std::fabs(mant)) + static_cast<double>(exp);
  }

  // Decimal rendering with `digits` significant digits (printf %g style).
  std::string to_string(int digits = 15) const {
    char* buf = nullptr;
    mpfr_asprintf(&buf, "%.*Rg", digits, value_);
    std::string out(buf);
    mpfr_free_str(buf);
    return out;
  }

  // Positional notation (no exponent) with `digits` significant digits.
  std::string to_fixed_string(int digits = 15) const {
    if (mpfr_zero_p(value_) || !mpfr_number_p(value_)) return to_string(digits);
    const long lead = static_cast<long>(std::floor(log2_abs() * 0.30102999566398120));
    const int decimals = static_cast<int>(std::max(0L, digits - 1 - lead));
    char* buf = nullptr;
    mpfr_asprintf(&buf, "%.*Rf", decimals, value_);
    std::string out(buf);
    mpfr_free_str(buf);
    return out;
  }

  ExtReal& operator+=(const ExtReal& rhs) {
    widen_for(rhs);
    mpfr_add(value_, value_, rhs.value_, MPFR_RNDN);
    return *this;
  }
  ExtReal& operator-=(const ExtReal& rhs) {
    widen_for(rhs);
    mpfr_sub(value_, value_, rhs.value_, MPFR_RNDN);
    return *this;
  }
  ExtReal& operator*=(const ExtReal& rhs) {
    widen_for(rhs);
    mpfr_mul(value_, value_, rhs.value_, MPFR_RNDN);
    return *this;
  }
  ExtReal& operator/=(const ExtReal& rhs) {
    widen_for(rhs);
    mpfr_div(value_, value_, rhs.value_, MPFR_RNDN);
    return *this;
  }
  ExtReal& operator*=(long rhs) {
    mpfr_mul_si(value_, value_, rhs, MPFR_RNDN);
    return *this;
  }
  ExtReal& operator+=(long rhs) {
    mpfr_add_si(value_, value_, rhs, MPFR_RNDN);
    return *this;
  }

  // this = src * 2^e, taking src's precision.
  ExtReal& assign_scaled(const ExtReal& src, long e) {
    if (mpfr_get_prec(value_) != mpfr_get_prec(src.value_)) {
      mpfr_set_prec(value_, mpfr_get_prec(src.value_));
    }
    mpfr_mul_2si(value_, src.value_, e, MPFR_RNDN);
    return *this;
  }

  // z * 2^e at the working precision.
  static ExtReal from_scaled_integer(mpz_srcptr z, long e) {
    ExtReal out = with_precision(working_precision_bits());
    mpfr_set_z_2exp(out.value_, z, e, MPFR_RNDN);
    return out;
  }

  // x * 2^e, exact.
  ExtReal& scale2(long e) {
    mpfr_mul_2si(value_, value_, e, MPFR_RNDN);
    return *this;
  }

  // this += a * b, rounded once.
  ExtReal& add_product(const ExtReal& a, const ExtReal& b) {
    widen_for(a);
    widen_for(b);
    mpfr_fma(value_, a.value_, b.value_, value_, MPFR_RNDN);
    return *this;
  }

  friend ExtReal operator-(const ExtReal& x) {
    ExtReal out(x);
    mpfr_neg(out.value_, out.value_, MPFR_RNDN);
    return out;
  }
  friend ExtReal operator+(ExtReal a, const ExtReal& b) { return a += b; }
  friend ExtReal operator-(ExtReal a, const ExtReal& b) { return a -= b; }
  friend ExtReal operator*(ExtReal a, const ExtReal& b) { return a *= b; }
  friend ExtReal operator/(ExtReal a, const ExtReal& b) { return a /= b; }

  friend bool operator==(const ExtReal& a, const ExtReal& b) {
    return mpfr_equal_p(a.value_, b.value_) != 0;
  }
  friend std::partial_ordering operator<=>(const ExtReal& a, const ExtReal& b) {
    if (mpfr_unordered_p(a.value_, b.value_)) {
      return std::partial_ordering::unordered;
    }
    const int c = mpfr_cmp(a.value_, b.value_);
    return c < 0 ? std::partial_ordering::less
                 : (c > 0 ? std::partial_ordering::greater
                          : std::partial_ordering::equivalent);
  }

  friend ExtReal abs(ExtReal x) {
    mpfr_abs(x.value_, x.value_, MPFR_RNDN);
    return x;
  }
  friend ExtReal log(ExtReal x) {
    mpfr_log(x.value_, x.value_, MPFR_RNDN);
    return x;
  }
  friend ExtReal log2(ExtReal x) {
    mpfr_log2(x.value_, x.value_, MPFR_RNDN);
    return x;
  }
  friend ExtReal log1p(ExtReal x) {
    mpfr_log1p(x.value_, x.value_, MPFR_RNDN);
    return x;
  }
  friend ExtReal exp(ExtReal x) {
    mpfr_exp(x.value_, x.value_, MPFR_RNDN);
    return x;
  }
  friend ExtReal expm1(ExtReal x) {
    mpfr_expm1(x.value_, x.value_, MPFR_RNDN);
    return x;
  }
  friend ExtReal sqrt(ExtReal x) {
    mpfr_sqrt(x.value_, x.value_, MPFR_RNDN);
    return x;
  }
  friend ExtReal pow(ExtReal x, unsigned long e) {
    mpfr_pow_ui(x.value_, x.value_, e, MPFR_RNDN);
    return x;
  }
  friend ExtReal pow(ExtReal x, const ExtReal& e) {
    x.widen_for(e);
    mpfr_pow(x.value_, x.value_, e.value_, MPFR_RNDN);
    return x;
  }
  friend ExtReal floor(ExtReal x) {
    mpfr_floor(x.value_, x.value_);
    return x;
  }

  // 2^e exactly, at the working precision.
  static ExtReal pow2(long e) {
    ExtReal out(1L);
    mpfr_mul_2si(out.value_, out.value_, e, MPFR_RNDN);
    return out;
  }
  static ExtReal euler_gamma() {
    ExtReal out = with_precision(working_precision_bits());
    mpfr_const_euler(out.value_, MPFR_RNDN);
    return out;
  }
  static ExtReal ln2() {
    ExtReal out = with_precision(working_precision_bits());
    mpfr_const_log2(out.value_, MPFR_RNDN);
    return out;
  }

  mpfr_srcptr raw() const { return value_; }

 private:
  struct Uninit {};
  ExtReal(Uninit, long bits) { mpfr_init2(value_, bits); }

  void widen_for(const ExtReal& other) {
    if (mpfr_get_prec(other.value_) > mpfr_get_prec(value_)) {
      mpfr_prec_round(value_, mpfr_get_prec(other.value_), MPFR_RNDN);
    }
  }

  mpfr_t value_;
};

// Mixed operations with machine numbers promote the scalar at the ExtReal's
// own precision rather than the thread default.
template <typename T>
  requires std::is_arithmetic_v<T>
ExtReal lift(const ExtReal& like, T v) {
  ScopedPrecision guard(like.precision());
  return ExtReal(v);
}

template <typename T>
  requires std::is_arithmetic_v<T>
ExtReal operator+(const ExtReal& a, T b) { return a + lift(a, b); }
template <typename T>
  requires std::is_arithmetic_v<T>
ExtReal operator+(T a, const ExtReal& b) { return lift(b, a) + b; }
template <typename T>
  requires std::is_arithmetic_v<T>
ExtReal operator-(const ExtReal& a, T b) { return a - lift(a, b); }
template <typename T>
  requires std::is_arithmetic_v<T>
ExtReal operator-(T a, const ExtReal& b) { return lift(b, a) - b; }
template <typename T>
  requires std::is_arithmetic_v<T>
ExtReal operator*(const ExtReal& a, T b) { return a * lift(a, b); }
template <typename T>
  requires std::is_arithmetic_v<T>
ExtReal operator*(T a, const ExtReal& b) { return lift(b, a) * b; }
template <typename T>
  requires std::is_arithmetic_v<T>
ExtReal operator/(const ExtReal& a, T b) { return a / lift(a, b); }
template <typename T>
  requires std::is_arithmetic_v<T>
ExtReal operator/(T a, const ExtReal& b) { return lift(b, a) / b; }

template <typename T>
  requires std::is_arithmetic_v<T>
bool operator==(const ExtReal& a, T b) { return a == lift(a, b); }
template <typename T>
  requires std::is_arithmetic_v<T>
std::partial_ordering operator<=>(const ExtReal& a, T b) {
  return a <=> lift(a, b);
}

// |a/b - 1|, or |a| when b is zero.
inline ExtReal relative_difference(const ExtReal& a, const ExtReal& b) {
  if (b.is_zero()) return abs(a);
  return abs(a / b - 1L);
}

}  // namespace probcount
