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

#ifndef MVLAB_SPECTRAL_HPP
#define MVLAB_SPECTRAL_HPP

#include <cstdint>
#include <vector>

#include "mvlab/model.hpp"
#include "mvlab/numerics.hpp"

namespace mvlab {

// Axis-aligned probe region for the drift-stability scan.
struct ProbeBox {
  Vec lo;
  Vec hi;
  bool valid() const { return lo.size() == hi.size() && (hi - lo).minCoeff() > 0.0; }
  static ProbeBox cube(int dim, double radius);
};

struct Probe {
  double t = 0.0;
  Vec x1;
  Vec x2;
};

// Verdict on the drift-stability condition over the scanned box.
// lambda0  = -sup lambda_max(A_sym)
// lambda1  = -sup lambda_max(b1_sym)
// b2_norm  =  sup ||b2||_2
// lambda12 =  lambda1 - b2_norm           (W1 rate)
// lambda12_hat >= lambda12                (refined W1 rate)
struct SpectralReport {
  double lambda0 = 0.0;
  double lambda1 = 0.0;
  double b2_norm = 0.0;
  double lambda12 = 0.0;
  double lambda12_hat = 0.0;
  bool h_satisfied = false;
  std::vector<Probe> probes;  // argmax probes: A_sym, b1_sym, b2 norm, refined
  ProbeBox domain_box;
};

// The 2d x 2d block matrix [[b1(x1,x2), b2(x2,x1)], [b2(x1,x2), b1(x2,x1)]].
Mat assemble_A(const DriftModel& model, double t, const Vec& x1, const Vec& x2);

// Latin-hypercube sampling of the suprema over the box, then local
// eigenvalue-ascent refinement from the best probe of each objective.
// Deterministic given the seed. Constant-derivative models are exact.
SpectralReport spectral_scan(const DriftModel& model, const ProbeBox& box, int n_probes,
                             std::uint64_t seed);

}  // namespace mvlab

#endif  // MVLAB_SPECTRAL_HPP
