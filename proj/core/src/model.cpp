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

#include "mvlab/model.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

#include "mvlab/errors.hpp"
#include "mvlab/rng.hpp"

namespace mvlab {

using nlohmann::json;

bool Tensor3::is_zero(double tol) const {
  for (double x : v_)
    if (std::fabs(x) > tol) return false;
  return true;
}

Tensor3 DriftModel::b11(double, const Vec&, const Vec&) const {
  throw CapabilityError("model does not provide second derivatives (b11)");
}
Tensor3 DriftModel::b12(double, const Vec&, const Vec&) const {
  throw CapabilityError("model does not provide second derivatives (b12)");
}
Tensor3 DriftModel::b22(double, const Vec&, const Vec&) const {
  throw CapabilityError("model does not provide second derivatives (b22)");
}

void DriftModel::eval_drift_mean(double, const double*, const double*, double*) const {
  throw CapabilityError("model does not expose a mean closure");
}

Vec DriftModel::b(double t, const Vec& x1, const Vec& x2) const {
  if (x1.size() != dim() || x2.size() != dim())
    throw ModelError("drift evaluation: dimension mismatch");
  Vec out(dim());
  eval_b(t, x1.data(), x2.data(), out.data());
  return out;
}

void DriftModel::mean_field_drift(double t, const double* x, std::span<const double> atoms,
                                  std::span<const double> weights, double* out) const {
  const int d = dim();
  const size_t n = atoms.size() / static_cast<size_t>(d);
  if (n == 0) throw InputError("mean_field_drift: empty measure");
  if (!weights.empty() && weights.size() != n)
    throw InputError("mean_field_drift: weight count mismatch");
  std::vector<double> tmp(static_cast<size_t>(d));
  for (int j = 0; j < d; ++j) out[j] = 0.0;
  const double wu = 1.0 / static_cast<double>(n);
  for (size_t i = 0; i < n; ++i) {
    eval_b(t, x, atoms.data() + i * static_cast<size_t>(d), tmp.data());
    const double w = weights.empty() ? wu : weights[i];
    for (int j = 0; j < d; ++j) out[j] += w * tmp[static_cast<size_t>(j)];
  }
}

Mat DriftModel::b1_mean(double t, const Vec& x, std::span<const double> atoms,
                        std::span<const double> weights) const {
  const int d = dim();
  const size_t n = atoms.size() / static_cast<size_t>(d);
  if (n == 0) throw InputError("b1_mean: empty measure");
  Mat acc = Mat::Zero(d, d);
  const double wu = 1.0 / static_cast<double>(n);
  for (size_t i = 0; i < n; ++i) {
    const Vec y = Eigen::Map<const Vec>(atoms.data() + i * static_cast<size_t>(d), d);
    acc += (weights.empty() ? wu : weights[i]) * b1(t, x, y);
  }
  return acc;
}

Tensor3 DriftModel::b11_mean(double t, const Vec& x, std::span<const double> atoms,
                             std::span<const double> weights) const {
  const int d = dim();
  const size_t n = atoms.size() / static_cast<size_t>(d);
  if (n == 0) throw InputError("b11_mean: empty measure");
  Tensor3 acc(d);
  const double wu = 1.0 / static_cast<double>(n);
  for (size_t idx = 0; idx < n; ++idx) {
    const Vec y = Eigen::Map<const Vec>(atoms.data() + idx * static_cast<size_t>(d), d);
    const Tensor3 h = b11(t, x, y);
    const double w = weights.empty() ? wu : weights[idx];
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k) acc(i, j, k) += w * h(i, j, k);
  }
  return acc;
}

// ---------------------------------------------------------------------------
// LinearDrift

LinearDrift::LinearDrift(Mat b1_coef, Mat b2_coef)
    : DriftModel(static_cast<int>(b1_coef.rows())), b1_(std::move(b1_coef)), b2_(std::move(b2_coef)) {
  if (b1_.rows() != b1_.cols() || b2_.rows() != b2_.cols() || b1_.rows() != b2_.rows())
    throw InputError("LinearDrift: B1 and B2 must be square with equal size");
  lipschitz_hint_ = spectral_norm(b1_) + spectral_norm(b2_);
}

void LinearDrift::eval_b(double, const double* x1, const double* x2, double* out) const {
  const int d = dim();
  for (int i = 0; i < d; ++i) {
    double acc = 0.0;
    for (int j = 0; j < d; ++j) acc += b1_(i, j) * x1[j] + b2_(i, j) * x2[j];
    out[i] = acc;
  }
}

Mat LinearDrift::b1(double, const Vec&, const Vec&) const { return b1_.transpose(); }
Mat LinearDrift::b2(double, const Vec&, const Vec&) const { return b2_.transpose(); }

void LinearDrift::eval_drift_mean(double, const double* x, const double* mean, double* out) const {
  const int d = dim();
  for (int i = 0; i < d; ++i) {
    double acc = 0.0;
    for (int j = 0; j < d; ++j) acc += b1_(i, j) * x[j] + b2_(i, j) * mean[j];
    out[i] = acc;
  }
}

// ---------------------------------------------------------------------------
// LangevinDrift

LangevinDrift::LangevinDrift(int dim, Potential confinement, Potential interaction, Parity parity)
    : DriftModel(dim),
      confinement_(std::move(confinement)),
      interaction_(std::move(interaction)),
      parity_(parity),
      has_thirds_(confinement_.third && interaction_.third) {}

LangevinDrift::Potential LangevinDrift::quadratic_potential(int dim, double alpha) {
  Potential p;
  p.grad = [alpha](const Vec& x) -> Vec { return alpha * x; };
  p.hess = [alpha, dim](const Vec&) -> Mat { return alpha * Mat::Identity(dim, dim); };
  p.third = [dim](const Vec&) { return Tensor3(dim); };
  return p;
}

LangevinDrift::Potential LangevinDrift::quartic_potential(int dim, double alpha, double kappa) {
  Potential p;
  p.grad = [alpha, kappa](const Vec& x) -> Vec {
    return alpha * x + kappa * x.array().cube().matrix();
  };
  p.hess = [alpha, kappa, dim](const Vec& x) -> Mat {
    Mat h = alpha * Mat::Identity(dim, dim);
    for (int i = 0; i < dim; ++i) h(i, i) += 3.0 * kappa * x[i] * x[i];
    return h;
  };
  p.third = [kappa, dim](const Vec& x) {
    Tensor3 t(dim);
    for (int i = 0; i < dim; ++i) t(i, i, i) = 6.0 * kappa * x[i];
    return t;
  };
  return p;
}

void LangevinDrift::eval_b(double, const double* x1, const double* x2, double* out) const {
  const int d = dim();
  const Vec v1 = Eigen::Map<const Vec>(x1, d);
  const Vec v2 = Eigen::Map<const Vec>(x2, d);
  const Vec r = -confinement_.grad(v1) - interaction_.grad(v1 - v2);
  for (int i = 0; i < d; ++i) out[i] = r[i];
}

Mat LangevinDrift::b1(double, const Vec& x1, const Vec& x2) const {
  // Hessians are symmetric, so the transposed-Jacobian layout coincides.
  return -confinement_.hess(x1) - interaction_.hess(x1 - x2);
}

Mat LangevinDrift::b2(double, const Vec& x1, const Vec& x2) const {
  return interaction_.hess(x1 - x2);
}

namespace {
Tensor3 scaled(const Tensor3& t, double s) {
  Tensor3 out(t.dim());
  for (int i = 0; i < t.dim(); ++i)
    for (int j = 0; j < t.dim(); ++j)
      for (int k = 0; k < t.dim(); ++k) out(i, j, k) = s * t(i, j, k);
  return out;
}
Tensor3 add(const Tensor3& a, const Tensor3& b, double sb) {
  Tensor3 out(a.dim());
  for (int i = 0; i < a.dim(); ++i)
    for (int j = 0; j < a.dim(); ++j)
      for (int k = 0; k < a.dim(); ++k) out(i, j, k) = a(i, j, k) + sb * b(i, j, k);
  return out;
}
}  // namespace

Tensor3 LangevinDrift::b11(double, const Vec& x1, const Vec& x2) const {
  if (!has_thirds_) return DriftModel::b11(0, x1, x2);
  return add(scaled(confinement_.third(x1), -1.0), interaction_.third(x1 - x2), -1.0);
}

Tensor3 LangevinDrift::b12(double, const Vec& x1, const Vec& x2) const {
  if (!has_thirds_) return DriftModel::b12(0, x1, x2);
  return scaled(interaction_.third(x1 - x2), 1.0);
}

Tensor3 LangevinDrift::b22(double, const Vec& x1, const Vec& x2) const {
  if (!has_thirds_) return DriftModel::b22(0, x1, x2);
  return scaled(interaction_.third(x1 - x2), -1.0);
}

void LangevinDrift::eval_drift_mean(double, const double* x, const double* mean, double* out) const {
  if (!quad_beta_) throw CapabilityError("LangevinDrift: closure requires a quadratic interaction");
  const int d = dim();
  const Vec v = Eigen::Map<const Vec>(x, d);
  const Vec g = confinement_.grad(v);
  const double beta = *quad_beta_;
  for (int i = 0; i < d; ++i) out[i] = -g[i] - beta * (x[i] - mean[i]);
}

// ---------------------------------------------------------------------------

Vec eval_mean_drift(const DriftModel& model, double t, const Vec& x, const EmpiricalMeasure& mu) {
  if (mu.size() == 0) throw InputError("eval_mean_drift: empty measure");
  if (x.size() != model.dim() || mu.dim() != model.dim())
    throw ModelError("eval_mean_drift: dimension mismatch");
  Vec out(model.dim());
  model.mean_field_drift(t, x.data(), mu.atoms(), mu.weights(), out.data());
  return out;
}

ModelRegistry& ModelRegistry::instance() {
  static ModelRegistry reg;
  return reg;
}

void ModelRegistry::add(const std::string& name, Factory factory) {
  factories_[name] = std::move(factory);
}

ModelPtr ModelRegistry::make(const std::string& name, const json& params) const {
  const auto it = factories_.find(name);
  if (it == factories_.end()) throw InputError("unknown registered model: " + name);
  return it->second(params);
}

std::vector<std::string> ModelRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : factories_) out.push_back(k);
  return out;
}

namespace {

Mat mat_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw InputError("model: expected a matrix as array of rows");
  const size_t rows = j.size();
  const size_t cols = j[0].size();
  Mat m(rows, cols);
  for (size_t i = 0; i < rows; ++i) {
    if (j[i].size() != cols) throw InputError("model: ragged matrix rows");
    for (size_t k = 0; k < cols; ++k) m(static_cast<int>(i), static_cast<int>(k)) = j[i][k].get<double>();
  }
  return m;
}

LangevinDrift::Potential potential_from_json(const json& doc, const std::string& kind_key,
                                             int dim, double alpha_or_beta) {
  const std::string kind = doc.value(kind_key, "quadratic");
  if (kind == "quadratic") return LangevinDrift::quadratic_potential(dim, alpha_or_beta);
  if (kind == "quartic")
    return LangevinDrift::quartic_potential(dim, alpha_or_beta, doc.value("kappa", 0.1));
  throw InputError("model: unknown potential kind '" + kind + "'");
}

}  // namespace

ModelPtr load_model(const json& doc) {
  if (!doc.is_object() || !doc.contains("kind"))
    throw InputError("model document must be an object with a 'kind' field");
  const std::string kind = doc.at("kind").get<std::string>();
  if (kind == "linear") {
    Mat m1 = mat_from_json(doc.at("B1"));
    Mat m2 = mat_from_json(doc.at("B2"));
    return std::make_shared<LinearDrift>(std::move(m1), std::move(m2));
  }
  if (kind == "langevin") {
    const int dim = doc.value("dim", 1);
    const double alpha = doc.value("alpha", 1.0);
    const double beta = doc.value("beta", 0.5);
    auto u = potential_from_json(doc, "U", dim, alpha);
    const std::string vkind = doc.value("V", "quadratic");
    if (vkind != "quadratic") throw InputError("model: only quadratic interaction V is built in");
    auto v = LangevinDrift::quadratic_potential(dim, beta);
    Parity parity = Parity::kEven;
    const std::string p = doc.value("parity", "even");
    if (p == "odd") parity = Parity::kOdd;
    else if (p == "none") parity = Parity::kNone;
    else if (p != "even") throw InputError("model: parity must be even|odd|none");
    auto model = std::make_shared<LangevinDrift>(dim, std::move(u), std::move(v), parity);
    model->set_quadratic_interaction(beta);
    model->set_quadratic_confinement(doc.value("U", std::string("quadratic")) == "quadratic");
    return model;
  }
  if (kind == "registry") {
    const std::string name = doc.at("name").get<std::string>();
    static const json empty = json::object();
    return ModelRegistry::instance().make(name, doc.contains("params") ? doc.at("params") : empty);
  }
  throw InputError("model: unknown kind '" + kind + "'");
}

double fd_derivative_check(const DriftModel& model, double radius, int n_probes,
                           std::uint64_t seed) {
  const int d = model.dim();
  const double h = 1e-5 * std::max(1.0, radius);
  double worst = 0.0;
  NoiseStream ns(StreamKey{split_seed(seed, seed_domain::kScan), 0, 0, 0});
  for (int p = 0; p < n_probes; ++p) {
    Vec x1(d), x2(d);
    for (int i = 0; i < d; ++i) x1[i] = (2.0 * ns.uniform() - 1.0) * radius;
    for (int i = 0; i < d; ++i) x2[i] = (2.0 * ns.uniform() - 1.0) * radius;
    const double t = 0.0;
    const Mat m1 = model.b1(t, x1, x2);
    const Mat m2 = model.b2(t, x1, x2);
    const double scale = std::max({1.0, m1.cwiseAbs().maxCoeff(), m2.cwiseAbs().maxCoeff()});
    for (int i = 0; i < d; ++i) {
      Vec e = Vec::Zero(d);
      e[i] = h;
      const Vec d1 = (model.b(t, x1 + e, x2) - model.b(t, x1 - e, x2)) / (2.0 * h);
      const Vec d2 = (model.b(t, x1, x2 + e) - model.b(t, x1, x2 - e)) / (2.0 * h);
      for (int j = 0; j < d; ++j) {
        worst = std::max(worst, std::fabs(d1[j] - m1(i, j)) / scale);
        worst = std::max(worst, std::fabs(d2[j] - m2(i, j)) / scale);
      }
    }
  }
  return worst;
}

}  // namespace mvlab
