// Copyright 2026 mvlab contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MVLAB_ERRORS_HPP
#define MVLAB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace mvlab {

// Bad user input: malformed config, dimension mismatch caused by the caller,
// empty measures, invalid ladders.
struct InputError : std::runtime_error {
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// A model violated its own contract (non-finite drift, mismatched evaluators).
struct ModelError : std::runtime_error {
  explicit ModelError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure at runtime: NaN/Inf state, eigensolver breakdown.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Requested an operation the model cannot support (e.g. closed forms on a
// non-linear drift, second variations without second derivatives).
struct CapabilityError : std::runtime_error {
  explicit CapabilityError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mvlab

#endif  // MVLAB_ERRORS_HPP
