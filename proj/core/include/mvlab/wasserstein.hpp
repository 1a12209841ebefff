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

#ifndef MVLAB_WASSERSTEIN_HPP
#define MVLAB_WASSERSTEIN_HPP

#include <cstdint>

#include "mvlab/measure.hpp"
#include "mvlab/rng.hpp"

namespace mvlab {

inline constexpr int kExactAssignmentCap = 256;

// Exact W_p in one dimension via the quantile coupling. Equal-size uniform
// measures reduce to sorted pairing; general weights use the common
// refinement of the two cumulative weight grids.
double wasserstein_1d(int p, const EmpiricalMeasure& mu, const EmpiricalMeasure& nu);

// Exact W_p for equal-weight measures of equal size via optimal assignment
// (Jonker-Volgenant shortest augmenting paths, O(N^3)). N above the cap is
// refused; use sliced_wasserstein instead.
double wasserstein_exact(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, int p,
                         int cap = kExactAssignmentCap);

// Monte-Carlo sliced distance: average of 1d distances over random unit
// projection directions. A monitoring surrogate, not an acceptance metric.
double sliced_wasserstein(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, int p,
                          int n_proj, const StreamKey& key);

// Dense linear assignment: returns the minimal total cost of a perfect
// matching for the n x n cost matrix.
double solve_assignment(const Mat& cost);

}  // namespace mvlab

#endif  // MVLAB_WASSERSTEIN_HPP
