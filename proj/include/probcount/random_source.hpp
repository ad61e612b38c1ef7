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

#pragma once

#include <bit>
#include <concepts>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace probcount {

// Anything that hands out independent fair bits.
template <typename S>
concept FairBitSource = requires(S& s) {
  { s.bit() } -> std::convertible_to<bool>;
};

// A fair-bit source that can also produce uniform reals on (0, 1).
template <typename S>
concept UniformSource = FairBitSource<S> && requires(S& s) {
  { s.uniform01() } -> std::convertible_to<double>;
  { s.uniform01_extended() } -> std::convertible_to<long double>;
};

// Seeded pseudo-random source. The engine is std::mt19937_64, whose output
// sequence is fixed by the standard, so a seed reproduces the same bit
// stream on every conforming platform. Bits are drawn least significant
// first from successive 64-bit words.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  bool bit() {
    if (available_ == 0) {
      buffer_ = engine_();
      available_ = 64;
    }
    const bool out = (buffer_ & 1U) != 0;
    buffer_ >>= 1;
    --available_;
    return out;
  }

  // The next k <= 64 bits of the bit() stream, first one least significant.
  std::uint64_t bits(unsigned k) {
    if (k == 0) return 0;
    if (available_ >= k) {
      const std::uint64_t out = buffer_ & low_mask(k);
      buffer_ = k == 64 ? 0 : buffer_ >> k;
      available_ -= k;
      return out;
    }
    const unsigned have = available_;
    const unsigned rest = k - have;
    std::uint64_t out = have == 0 ? 0 : buffer_;
    const std::uint64_t w = engine_();
    out |= (w & low_mask(rest)) << have;
    buffer_ = rest == 64 ? 0 : w >> rest;
    available_ = 64 - rest;
    return out;
  }

  // Number of bit() calls up to and including the first 1.
  std::uint32_t count_to_first_one() {
    std::uint32_t count = 1;
    for (;;) {
      if (buffer_ != 0) {
        const auto zeros = static_cast<unsigned>(std::countr_zero(buffer_));
        count += zeros;
        const unsigned used = zeros + 1;
        buffer_ = used == 64 ? 0 : buffer_ >> used;
        available_ -= used;
        return count;
      }
      count += available_;
      buffer_ = engine_();
      available_ = 64;
    }
  }

  // A full fresh word; does not disturb the buffered bits.
  std::uint64_t word() { return engine_(); }

  // Uniform on (0, 1) with 53 random bits; never returns 0 or 1.
  double uniform01() {
    return (static_cast<double>(word() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Uniform on (0, 1) with 64 bits of mantissa (x87 extended precision).
  long double uniform01_extended() {
    return (static_cast<long double>(word() >> 1) + 0.5L) * 0x1.0p-63L;
  }

 private:
  static constexpr std::uint64_t low_mask(unsigned k) {
    return k >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << k) - 1;
  }

  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::uint64_t buffer_ = 0;
  unsigned available_ = 0;
};

// Replays a fixed bit string such as "0010"; used to force specific branches.
class ScriptedBits {
 public:
  explicit ScriptedBits(std::string_view bits) : bits_(bits) {
    for (char c : bits_) {
      if (c != '0' && c != '1') {
        throw std::invalid_argument("bit script may only contain 0 and 1");
      }
    }
  }

  bool bit() {
    if (pos_ >= bits_.size()) {
      throw std::out_of_range("bit script exhausted");
    }
    return bits_[pos_++] == '1';
  }

  std::size_t consumed() const { return pos_; }

 private:
  std::string bits_;
  std::size_t pos_ = 0;
};

// SplitMix64 finaliser; derives independent per-trial / per-session seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace probcount
