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

#ifndef MVLAB_LINEAR_FLOW_HPP
#define MVLAB_LINEAR_FLOW_HPP

#include <utility>

#include "mvlab/model.hpp"
#include "mvlab/numerics.hpp"

namespace mvlab {

// Closed forms for the linear drift b(x1,x2) = B1 x1 + B2 x2. The flow from x
// under initial mean mu_mean is Gaussian:
//   X_{s,t}(x) = e^{(t-s)B1}(x - mu) + e^{(t-s)(B1+B2)} mu + int e^{B1(t-u)} dW_u

struct GaussianMoments {
  Vec mean;
  Mat cov;
};

// Mean/covariance of the flow at horizon t from start x.
GaussianMoments closed_form_flow_moments(const LinearDrift& model, double s, double t,
                                         const Vec& x, const Vec& mu_mean);

// Mean of the measure flow: e^{(t-s)(B1+B2)} mu_mean.
Vec closed_form_phi_mean(const LinearDrift& model, double s, double t, const Vec& mu_mean);

// The four-term first-order transport kernel p_{s,t}(x, z); the two time
// integrals are evaluated by 64-node Gauss-Legendre quadrature.
Vec closed_form_p(const LinearDrift& model, double s, double t, const Vec& x, const Vec& z,
                  const Vec& mu1_mean, const Vec& mu0_mean);

}  // namespace mvlab

#endif  // MVLAB_LINEAR_FLOW_HPP
