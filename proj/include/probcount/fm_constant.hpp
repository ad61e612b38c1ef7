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
#include <cstdint>

#include "probcount/ext_real.hpp"

namespace probcount {

inline constexpr std::uint64_t kDefaultPhiTerms = std::uint64_t{1} << 16;

// The Flajolet-Martin bias constant phi = 0.77351...
struct FMConstant {
  ExtReal phi;
  std::uint64_t terms_used = 0;

  double value() const { return phi.to_double(); }
  bool converged() const {
    const double v = value();
    return v > 0.7735 && v < 0.7736;
  }
};

// +1 when n has an even number of set bits, -1 otherwise (Morse-Thue).
constexpr int morse_thue_sign(std::uint64_t n) {
  return (std::popcount(n) % 2 == 0) ? 1 : -1;
}

// (e^gamma / sqrt 2) * (2/3) * prod_{n=1}^{N} ((4n+1)(4n+2) / (4n(4n+3)))^{s_n}
// where s_n is the Morse-Thue sign, at the working precision.
inline FMConstant compute_phi(std::uint64_t num_product_terms = kDefaultPhiTerms) {
  ExtReal numerator(1L);
  ExtReal denominator(1L);
  for (std::uint64_t n = 1; n <= num_product_terms; ++n) {
    // Both factors stay below 2^64 for n < 2^30.
    const ExtReal up((4 * n + 1) * (4 * n + 2));
    const ExtReal down((4 * n) * (4 * n + 3));
    if (morse_thue_sign(n) > 0) {
      numerator *= up;
      denominator *= down;
    } else {
      numerator *= down;
      denominator *= up;
    }
  }
  ExtReal phi = exp(ExtReal::euler_gamma()) / sqrt(ExtReal(2L));
  phi *= ExtReal(2L) / ExtReal(3L);
  phi *= numerator / denominator;
  return FMConstant{std::move(phi), num_product_terms};
}

// Process-wide constant at the default term count, computed on first use at
// 256 bits.
inline const FMConstant& flajolet_martin_constant() {
  static const FMConstant kPhi = [] {
    ScopedPrecision guard(kDefaultPrecisionBits);
    return compute_phi(kDefaultPhiTerms);
  }();
  return kPhi;
}

}  // namespace probcount
