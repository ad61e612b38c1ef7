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

#include <stdexcept>
#include <string>

namespace probcount {

// Argument outside the mathematical domain of an operation (n too small for
// a bound, degenerate floor, empty composition, ...).
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

// The request is well-defined but exceeds a configured resource cap, e.g. a
// quadratic recursion past its row limit or a precision ceiling.
class ResourceError : public std::runtime_error {
 public:
  explicit ResourceError(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace probcount
