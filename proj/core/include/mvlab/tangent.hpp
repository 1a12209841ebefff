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

#ifndef MVLAB_TANGENT_HPP
#define MVLAB_TANGENT_HPP

#include "mvlab/model.hpp"
#include "mvlab/sde.hpp"

namespace mvlab {

// Pathwise first and second variations of the flow map with respect to its
// start point. Matrices use the transposed-Jacobian layout: first(k,i) is
// the derivative of coordinate i with respect to start coordinate k, and the
// recursion along the path is M <- M (I + dt b1).
struct TangentFlow {
  TimeGrid grid;
  std::vector<Mat> first;        // at checkpoints
  std::vector<Tensor3> second;   // at checkpoints; empty when unavailable
  Mat first_final;
  Tensor3 second_final;
  bool has_second = false;
};

// Integrates the discrete variational recursions along the recorded path.
// The result is the exact derivative of the discrete flow map, so a
// common-noise finite-difference replay reproduces it to roundoff for
// drifts that are affine in the state.
TangentFlow tangent_flow(const DriftModel& model, const FlowSample& flow);

struct FdGradientReport {
  double max_rel_error = 0.0;
  Mat tangent;         // final-time first variation
  Mat finite_difference;
};

// Central finite differences of the flow map under common noise versus the
// integrated tangent, at the final grid time.
FdGradientReport fd_gradient_check(const ModelPtr& model, const InitialSpec& mu0, int m_proxy,
                                   const Vec& x, double bump, const TimeGrid& grid,
                                   std::uint64_t seed, const FlowOptions& opts = {});

}  // namespace mvlab

#endif  // MVLAB_TANGENT_HPP
