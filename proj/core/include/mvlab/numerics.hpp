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

#ifndef MVLAB_NUMERICS_HPP
#define MVLAB_NUMERICS_HPP

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <vector>

namespace mvlab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Matrix exponential, scaling-and-squaring with Pade(13).
Mat expm(const Mat& a);

// Gauss-Legendre nodes/weights on [a, b].
struct Quadrature {
  std::vector<double> nodes;
  std::vector<double> weights;
};
Quadrature gauss_legendre(int n, double a, double b);

// integral over [0, tau] of e^{A u} C e^{B u} du by 64-node Gauss-Legendre.
Mat integrate_exp_sandwich(const Mat& a, const Mat& c, const Mat& b, double tau);

// integral over [0, tau] of e^{A (tau-u)} C e^{B u} du; the two exponentials
// need not commute.
Mat integrate_exp_transport(const Mat& a, const Mat& c, const Mat& b, double tau);

// Fixed-order pairwise summation; deterministic and accurate for long sums.
double pairwise_sum(std::span<const double> xs);

// Pairwise sum of strided columns: mean of an n x d row-major array.
Vec column_mean(std::span<const double> xs, int n, int d);

// Spectral norm (largest singular value).
double spectral_norm(const Mat& a);

// Largest eigenvalue of the symmetric part (A + A')/2.
double max_eig_sym(const Mat& a);

// Simple deterministic parallel-for; results must be written to disjoint
// slots by the body. threads <= 1 runs inline.
void parallel_for(int count, int threads, const std::function<void(int)>& body);

// Thread count resolution: explicit flag > MVLAB_THREADS env > hardware.
int resolve_threads(int requested);

}  // namespace mvlab

#endif  // MVLAB_NUMERICS_HPP
