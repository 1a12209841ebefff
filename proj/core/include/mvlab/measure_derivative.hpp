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

#ifndef MVLAB_MEASURE_DERIVATIVE_HPP
#define MVLAB_MEASURE_DERIVATIVE_HPP

#include "mvlab/bel.hpp"
#include "mvlab/sde.hpp"
#include "mvlab/testfn.hpp"

namespace mvlab {

// Routes to the centered first-order derivative (delta_y - mu) D_mu phi_{s,t}(f):
//  - closed_form: exact Gaussian-mixture calculus; linear drift only.
//  - semigroup_quadrature: P(f)(y) plus the transport-kernel time integral,
//    with trapezoid nodes and Monte-Carlo inner expectations.
//  - measure_fd: central difference of eps -> phi((1-eps) mu + eps delta_y)(f)
//    under common random numbers.
enum class FirstOrderRoute { kClosedForm, kSemigroupQuadrature, kMeasureFd };

// Routes to (delta_y - mu) (x) (delta_z - mu) D^2_mu phi_{s,t}(f):
//  - closed_form: exact mixed eps-derivatives of the Gaussian mixture; linear.
//  - quadrature: time integral of the tensor-square composition; linear.
//  - double_measure_fd: 4-point mixed stencil with common random numbers.
enum class SecondOrderRoute { kClosedForm, kQuadrature, kDoubleMeasureFd };

struct DerivParams {
  // semigroup quadrature budgets
  int nodes = 32;         // outer trapezoid nodes over [s, t]
  int law_atoms = 32;     // y samples per node
  int mc_paths = 32;      // paths per inner expectation
  int x_paths = 512;      // paths from each evaluation point
  int batches = 8;        // independent repetitions driving the stderr
  int chamber_depth = 2;  // kernel recursion depth
  int b1_atoms = 128;     // cloud slice for derivative averages (generic models)
  // measure-fd stencils
  double fd_eps = 1e-2;
  double fd_eps2 = 5e-2;
  int fd_cloud = 1024;
  int fd_replicas = 16;
  // shared
  double dt = 1e-3;
  int m_proxy = 1024;
  LawMode mode = LawMode::kAuto;
  int threads = 1;
  int center_atoms = 32;  // mu-average sample count for non-finite mu
};

DerivativeEstimate first_order_derivative(const ModelPtr& model, const InitialSpec& mu, double s,
                                          double t, NamedFn f, const Vec& y,
                                          FirstOrderRoute route, const DerivParams& params,
                                          std::uint64_t seed);

DerivativeEstimate second_order_derivative(const ModelPtr& model, const InitialSpec& mu, double s,
                                           double t, NamedFn f, const Vec& y, const Vec& z,
                                           SecondOrderRoute route, const DerivParams& params,
                                           std::uint64_t seed);

// Carre-du-champ pairing <grad f, grad g>(x).
double gamma_operator(const std::function<Vec(const Vec&)>& grad_f,
                      const std::function<Vec(const Vec&)>& grad_g, const Vec& x);

// Evaluates both sides of the pathwise backward decomposition of
// X^{mu1}_{s,t}(x) - X^{mu0}_{s,t}(x) under common noise and reports the gap.
struct BackwardCheckReport {
  Vec lhs;
  Vec rhs;
  double discrepancy = 0.0;
  double rel_discrepancy = 0.0;
};

BackwardCheckReport backward_difference_decomposition(const ModelPtr& model,
                                                      const InitialSpec& mu0,
                                                      const InitialSpec& mu1, double s, double t,
                                                      const Vec& x, std::uint64_t seed,
                                                      const DerivParams& params);

// phi_{s,t}(mu_stencil)(f) estimated by one weighted-cloud run; mu_stencil is
// mu plus signed point masses at the extra atoms. Building block of the
// measure-FD routes, exposed for the Taylor-remainder experiments.
double weighted_flow_functional(const ModelPtr& model, const InitialSpec& mu,
                                const std::vector<Vec>& extra_atoms,
                                const std::vector<double>& extra_weights, double base_weight,
                                NamedFn f, const TimeGrid& grid, std::uint64_t seed,
                                std::uint32_t replica, int m_cloud, int threads = 1);

}  // namespace mvlab

#endif  // MVLAB_MEASURE_DERIVATIVE_HPP
