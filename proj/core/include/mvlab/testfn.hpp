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

#ifndef MVLAB_TESTFN_HPP
#define MVLAB_TESTFN_HPP

#include <functional>
#include <string>

#include "mvlab/numerics.hpp"

namespace mvlab {

// Named scalar test functions used across experiments:
//   id      x -> x_0            (first coordinate)
//   square  x -> |x|^2
//   cos     x -> cos(x_0)       (bounded, smooth)
//   sigmoid x -> 1/(1+e^{-x_0}) (bounded, smooth)
enum class NamedFn { kId, kSquare, kCos, kSigmoid };

NamedFn parse_named_fn(const std::string& name);
std::string named_fn_label(NamedFn f);

double eval_fn(NamedFn f, const Vec& x);
Vec eval_fn_gradient(NamedFn f, const Vec& x);
bool fn_is_bounded(NamedFn f);

// E[f(X)] for X ~ N(mean, cov). cos is supported in d = 1 only; sigmoid has
// no closed form and is rejected.
double gaussian_expectation(NamedFn f, const Vec& mean, const Mat& cov);

}  // namespace mvlab

#endif  // MVLAB_TESTFN_HPP
