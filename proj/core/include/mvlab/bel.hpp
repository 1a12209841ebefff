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

#ifndef MVLAB_BEL_HPP
#define MVLAB_BEL_HPP

#include <functional>
#include <map>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "mvlab/sde.hpp"

namespace mvlab {

using ScalarFn = std::function<double(const Vec&)>;

// Monte-Carlo estimate with componentwise standard errors. A closed-form
// route reports zero standard error.
struct DerivativeEstimate {
  Vec value;
  Vec std_error;
  std::string route;
  long samples = 0;
  std::map<std::string, double> meta;
};

nlohmann::json estimate_to_json(const DerivativeEstimate& est);

struct MatrixEstimate {
  Mat value;
  Mat std_error;
  long samples = 0;
};

// Reweighting profile omega_{s,t}(u) = phi((u-s)/(t-s)). The cosine tail
// rises from 0 to 1 on the final epsilon-fraction of the interval, which
// trades estimator bias against short-horizon variance.
struct BelWeight {
  enum class Kind { kCosineTail };
  double epsilon = 0.5;
  Kind kind = Kind::kCosineTail;

  double phi(double v) const;
  double phi_derivative(double v) const;
};

struct EstimatorOptions {
  LawMode mode = LawMode::kAuto;
  int m_proxy = 1024;
  double dt = 1e-3;
  int threads = 1;
};

// Gradient of the frozen-law semigroup, nabla P_{s,t}(f)(x), as the
// expectation of f(X_t) times the reweighted noise integral of the tangent.
// Works for merely bounded f.
DerivativeEstimate bel_gradient(const ModelPtr& model, const InitialSpec& mu, double s, double t,
                                const Vec& x, const ScalarFn& f, long m, const BelWeight& weight,
                                std::uint64_t seed, const EstimatorOptions& opts = {});

// Hessian of the semigroup via the two-block estimator with split point
// u = s + (1 - split_eps)(t - s).
MatrixEstimate bel_hessian(const ModelPtr& model, const InitialSpec& mu, double s, double t,
                           const Vec& x, const ScalarFn& f, long m, const BelWeight& weight,
                           double split_eps, std::uint64_t seed,
                           const EstimatorOptions& opts = {});

// Common-noise central-difference oracle for the semigroup gradient: the
// componentwise mean and standard error of (f(X_t(x + h e_k)) -
// f(X_t(x - h e_k))) / 2h with identical driving noise.
DerivativeEstimate fd_semigroup_gradient(const ModelPtr& model, const InitialSpec& mu, double s,
                                         double t, const Vec& x, const ScalarFn& f, double bump,
                                         long m, std::uint64_t seed,
                                         const EstimatorOptions& opts = {});

// First-order transport kernel estimate: E[ nablaX_{s,t}(x0) b2(x1, X_t) ].
struct BBKernel {
  Mat value;
  Mat std_error;
  long m_samples = 0;
};

BBKernel estimate_BB(const ModelPtr& model, const InitialSpec& mu, double s, double t,
                     const Vec& x0, const Vec& x1, long m, std::uint64_t seed,
                     const EstimatorOptions& opts = {});

}  // namespace mvlab

#endif  // MVLAB_BEL_HPP
