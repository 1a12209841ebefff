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

#ifndef MVLAB_MEASURE_HPP
#define MVLAB_MEASURE_HPP

#include <functional>
#include <span>
#include <vector>

#include "mvlab/numerics.hpp"

namespace mvlab {

// Weighted point cloud on R^d. Weights are nonnegative and sum to one.
class EmpiricalMeasure {
 public:
  // Uniform weights over the given atoms (row-major n x d).
  EmpiricalMeasure(std::vector<double> atoms, int dim);
  EmpiricalMeasure(std::vector<double> atoms, std::vector<double> weights, int dim);

  static EmpiricalMeasure dirac(const Vec& x);

  int size() const { return n_; }
  int dim() const { return d_; }
  std::span<const double> atoms() const { return atoms_; }
  std::span<const double> weights() const { return weights_; }
  Vec atom(int i) const;
  double weight(int i) const { return weights_[static_cast<size_t>(i)]; }

  Vec mean() const;

 private:
  void validate() const;

  int n_ = 0;
  int d_ = 0;
  std::vector<double> atoms_;    // n x d row-major
  std::vector<double> weights_;  // n
};

// sum_i w_i f(x_i); throws NumericError on non-finite values of f.
double integrate(const EmpiricalMeasure& mu, const std::function<double(const Vec&)>& f);
Vec integrate_vec(const EmpiricalMeasure& mu, const std::function<Vec(const Vec&)>& f);

// [ integral of |x|^n d mu ]^(1/n)
double moment_norm(const EmpiricalMeasure& mu, int n);

}  // namespace mvlab

#endif  // MVLAB_MEASURE_HPP
