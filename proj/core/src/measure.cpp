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

#include "mvlab/measure.hpp"

#include <cmath>

#include "mvlab/errors.hpp"

namespace mvlab {

EmpiricalMeasure::EmpiricalMeasure(std::vector<double> atoms, int dim)
    : d_(dim), atoms_(std::move(atoms)) {
  if (d_ <= 0 || atoms_.empty() || atoms_.size() % static_cast<size_t>(d_) != 0)
    throw InputError("EmpiricalMeasure: atoms do not form an n x d array");
  n_ = static_cast<int>(atoms_.size()) / d_;
  weights_.assign(static_cast<size_t>(n_), 1.0 / n_);
  validate();
}

EmpiricalMeasure::EmpiricalMeasure(std::vector<double> atoms, std::vector<double> weights, int dim)
    : d_(dim), atoms_(std::move(atoms)), weights_(std::move(weights)) {
  if (d_ <= 0 || atoms_.empty() || atoms_.size() % static_cast<size_t>(d_) != 0)
    throw InputError("EmpiricalMeasure: atoms do not form an n x d array");
  n_ = static_cast<int>(atoms_.size()) / d_;
  if (weights_.size() != static_cast<size_t>(n_))
    throw InputError("EmpiricalMeasure: weight count does not match atom count");
  validate();
}

EmpiricalMeasure EmpiricalMeasure::dirac(const Vec& x) {
  return EmpiricalMeasure(std::vector<double>(x.data(), x.data() + x.size()),
                          static_cast<int>(x.size()));
}

void EmpiricalMeasure::validate() const {
  double total = 0.0;
  for (double w : weights_) {
    if (w < 0.0) throw InputError("EmpiricalMeasure: negative weight");
    total += w;
  }
  if (std::fabs(total - 1.0) > 1e-12) throw InputError("EmpiricalMeasure: weights must sum to 1");
  for (double x : atoms_)
    if (!std::isfinite(x)) throw InputError("EmpiricalMeasure: non-finite atom");
}

Vec EmpiricalMeasure::atom(int i) const {
  return Eigen::Map<const Vec>(atoms_.data() + static_cast<size_t>(i) * d_, d_);
}

Vec EmpiricalMeasure::mean() const {
  Vec m = Vec::Zero(d_);
  for (int i = 0; i < n_; ++i) m += weights_[static_cast<size_t>(i)] * atom(i);
  return m;
}

double integrate(const EmpiricalMeasure& mu, const std::function<double(const Vec&)>& f) {
  double acc = 0.0;
  for (int i = 0; i < mu.size(); ++i) {
    const double v = f(mu.atom(i));
    if (!std::isfinite(v)) throw NumericError("integrate: f is non-finite at an atom");
    acc += mu.weight(i) * v;
  }
  return acc;
}

Vec integrate_vec(const EmpiricalMeasure& mu, const std::function<Vec(const Vec&)>& f) {
  Vec acc = Vec::Zero(mu.dim());
  for (int i = 0; i < mu.size(); ++i) {
    const Vec v = f(mu.atom(i));
    if (!v.allFinite()) throw NumericError("integrate_vec: f is non-finite at an atom");
    if (acc.size() != v.size()) acc = Vec::Zero(v.size());
    acc += mu.weight(i) * v;
  }
  return acc;
}

double moment_norm(const EmpiricalMeasure& mu, int n) {
  if (n < 1) throw InputError("moment_norm: order must be >= 1");
  const double m = integrate(mu, [n](const Vec& x) { return std::pow(x.norm(), n); });
  return std::pow(m, 1.0 / n);
}

}  // namespace mvlab
