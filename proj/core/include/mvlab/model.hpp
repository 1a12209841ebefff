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

#ifndef MVLAB_MODEL_HPP
#define MVLAB_MODEL_HPP

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mvlab/measure.hpp"
#include "mvlab/numerics.hpp"

namespace mvlab {

// (d x d x d) array of second partials; t(i, j, k) = d^2 b^k / dx^i dx^j.
class Tensor3 {
 public:
  Tensor3() = default;
  explicit Tensor3(int d) : d_(d), v_(static_cast<size_t>(d) * d * d, 0.0) {}

  int dim() const { return d_; }
  double& operator()(int i, int j, int k) { return v_[idx(i, j, k)]; }
  double operator()(int i, int j, int k) const { return v_[idx(i, j, k)]; }
  bool is_zero(double tol = 0.0) const;

 private:
  size_t idx(int i, int j, int k) const {
    return (static_cast<size_t>(i) * d_ + j) * d_ + k;
  }
  int d_ = 0;
  std::vector<double> v_;
};

// Two-body drift coefficient b_t(x1, x2) together with its first and second
// partial derivative evaluators.
//
// Derivative layout: b1(t,x1,x2)(i,j) = d b^j / d x1^i, i.e. the transposed
// Jacobian. Along a trajectory the tangent propagates by right
// multiplication, M <- M (I + dt b1). For the linear drift this makes
// b1 == B1' and b2 == B2'.
class DriftModel {
 public:
  virtual ~DriftModel() = default;

  int dim() const { return dim_; }
  std::optional<double> lipschitz_hint() const { return lipschitz_hint_; }

  // Hot-path evaluation; out has dim() entries.
  virtual void eval_b(double t, const double* x1, const double* x2, double* out) const = 0;

  virtual Mat b1(double t, const Vec& x1, const Vec& x2) const = 0;
  virtual Mat b2(double t, const Vec& x1, const Vec& x2) const = 0;

  virtual bool has_second_derivatives() const { return false; }
  virtual Tensor3 b11(double t, const Vec& x1, const Vec& x2) const;
  virtual Tensor3 b12(double t, const Vec& x1, const Vec& x2) const;
  virtual Tensor3 b22(double t, const Vec& x1, const Vec& x2) const;

  // Moment closure: when the mean-field drift depends on the interaction
  // measure only through its mean, em steps run in O(N) instead of O(N^2).
  virtual bool has_mean_closure() const { return false; }
  virtual void eval_drift_mean(double t, const double* x, const double* mean, double* out) const;

  // b1 and b2 are the same matrix at every (t, x1, x2).
  virtual bool constant_first_derivatives() const { return false; }
  // b1 and b11 do not depend on the interaction argument x2, so tangent
  // coefficients need only the state and the law mean.
  virtual bool interaction_curvature_constant() const { return false; }

  Vec b(double t, const Vec& x1, const Vec& x2) const;

  // Weighted average of b(t, x, y_j) over atoms; empty weights mean uniform.
  void mean_field_drift(double t, const double* x, std::span<const double> atoms,
                        std::span<const double> weights, double* out) const;

  // Averages of derivative evaluators against a point cloud.
  Mat b1_mean(double t, const Vec& x, std::span<const double> atoms,
              std::span<const double> weights) const;
  Tensor3 b11_mean(double t, const Vec& x, std::span<const double> atoms,
                   std::span<const double> weights) const;

 protected:
  explicit DriftModel(int dim) : dim_(dim) {}
  std::optional<double> lipschitz_hint_;

 private:
  int dim_;
};

using ModelPtr = std::shared_ptr<const DriftModel>;

// b_t(x1, x2) = B1 x1 + B2 x2.
class LinearDrift : public DriftModel {
 public:
  LinearDrift(Mat b1_coef, Mat b2_coef);

  const Mat& B1() const { return b1_; }
  const Mat& B2() const { return b2_; }

  void eval_b(double t, const double* x1, const double* x2, double* out) const override;
  Mat b1(double t, const Vec& x1, const Vec& x2) const override;
  Mat b2(double t, const Vec& x1, const Vec& x2) const override;
  bool has_second_derivatives() const override { return true; }
  Tensor3 b11(double, const Vec&, const Vec&) const override { return Tensor3(dim()); }
  Tensor3 b12(double, const Vec&, const Vec&) const override { return Tensor3(dim()); }
  Tensor3 b22(double, const Vec&, const Vec&) const override { return Tensor3(dim()); }
  bool has_mean_closure() const override { return true; }
  void eval_drift_mean(double t, const double* x, const double* mean, double* out) const override;
  bool constant_first_derivatives() const override { return true; }
  bool interaction_curvature_constant() const override { return true; }

 private:
  Mat b1_, b2_;
};

enum class Parity { kEven, kOdd, kNone };

// b(x1, x2) = -grad U(x1) - grad V(x1 - x2) for a confinement potential U and
// an interaction potential V.
class LangevinDrift : public DriftModel {
 public:
  struct Potential {
    std::function<Vec(const Vec&)> grad;
    std::function<Mat(const Vec&)> hess;
    // Optional third derivatives; t(i,j,k) = d^3 U / dx^i dx^j dx^k.
    std::function<Tensor3(const Vec&)> third;
  };

  LangevinDrift(int dim, Potential confinement, Potential interaction, Parity parity);

  // U = alpha |x|^2 / 2, optionally plus kappa sum_i x_i^4 / 4.
  static Potential quadratic_potential(int dim, double alpha);
  static Potential quartic_potential(int dim, double alpha, double kappa);

  Parity parity() const { return parity_; }
  // Set when the interaction Hessian is the constant beta * I.
  std::optional<double> quadratic_interaction() const { return quad_beta_; }

  void eval_b(double t, const double* x1, const double* x2, double* out) const override;
  Mat b1(double t, const Vec& x1, const Vec& x2) const override;
  Mat b2(double t, const Vec& x1, const Vec& x2) const override;
  bool has_second_derivatives() const override { return has_thirds_; }
  Tensor3 b11(double t, const Vec& x1, const Vec& x2) const override;
  Tensor3 b12(double t, const Vec& x1, const Vec& x2) const override;
  Tensor3 b22(double t, const Vec& x1, const Vec& x2) const override;
  bool has_mean_closure() const override { return quad_beta_.has_value(); }
  void eval_drift_mean(double t, const double* x, const double* mean, double* out) const override;
  bool constant_first_derivatives() const override {
    return quad_confinement_ && quad_beta_.has_value();
  }
  bool interaction_curvature_constant() const override { return quad_beta_.has_value(); }

  Vec grad_u(const Vec& x) const { return confinement_.grad(x); }
  Mat hess_u(const Vec& x) const { return confinement_.hess(x); }
  Vec grad_v(const Vec& z) const { return interaction_.grad(z); }
  Mat hess_v(const Vec& z) const { return interaction_.hess(z); }

  void set_quadratic_interaction(double beta) { quad_beta_ = beta; }
  void set_quadratic_confinement(bool value) { quad_confinement_ = value; }

 private:
  Potential confinement_, interaction_;
  Parity parity_;
  bool has_thirds_;
  bool quad_confinement_ = false;
  std::optional<double> quad_beta_;
};

// mu-average of b_t(x, .): the drift felt at x under measure mu.
Vec eval_mean_drift(const DriftModel& model, double t, const Vec& x, const EmpiricalMeasure& mu);

// Compiled-in custom models addressed by name.
class ModelRegistry {
 public:
  using Factory = std::function<ModelPtr(const nlohmann::json& params)>;
  static ModelRegistry& instance();
  void add(const std::string& name, Factory factory);
  ModelPtr make(const std::string& name, const nlohmann::json& params) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, Factory> factories_;
};

// Loads {"kind":"linear",...}, {"kind":"langevin",...} or
// {"kind":"registry","name":...} documents.
ModelPtr load_model(const nlohmann::json& doc);

// Maximum relative error of b1/b2 against central finite differences of b at
// random probes inside [-radius, radius]^d; the cross-check oracle for
// analytic derivative evaluators.
double fd_derivative_check(const DriftModel& model, double radius, int n_probes,
                           std::uint64_t seed);

}  // namespace mvlab

#endif  // MVLAB_MODEL_HPP
