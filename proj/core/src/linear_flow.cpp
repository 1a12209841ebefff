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

#include "mvlab/linear_flow.hpp"

#include "mvlab/errors.hpp"

namespace mvlab {

GaussianMoments closed_form_flow_moments(const LinearDrift& model, double s, double t,
                                         const Vec& x, const Vec& mu_mean) {
  if (t < s) throw InputError("closed_form_flow_moments: t must be >= s");
  const double tau = t - s;
  const int d = model.dim();
  GaussianMoments out;
  if (tau == 0.0) {
    out.mean = x;
    out.cov = Mat::Zero(d, d);
    return out;
  }
  const Mat ea = expm(tau * model.B1());
  const Mat eth = expm(tau * (model.B1() + model.B2()));
  if (!ea.allFinite() || !eth.allFinite())
    throw NumericError("closed_form_flow_moments: matrix exponential overflow");
  out.mean = ea * (x - mu_mean) + eth * mu_mean;
  // cov = int_0^tau e^{B1 v} e^{B1' v} dv
  out.cov = integrate_exp_sandwich(model.B1(), Mat::Identity(d, d), model.B1().transpose(), tau);
  return out;
}

Vec closed_form_phi_mean(const LinearDrift& model, double s, double t, const Vec& mu_mean) {
  if (t < s) throw InputError("closed_form_phi_mean: t must be >= s");
  return expm((t - s) * (model.B1() + model.B2())) * mu_mean;
}

Vec closed_form_p(const LinearDrift& model, double s, double t, const Vec& x, const Vec& z,
                  const Vec& mu1_mean, const Vec& mu0_mean) {
  if (t < s) throw InputError("closed_form_p: t must be >= s");
  const double tau = t - s;
  const Mat& b1 = model.B1();
  const Mat& b2 = model.B2();
  const Mat theta = b1 + b2;
  Vec p = b1 * z + b2 * (expm(tau * theta) * x);
  if (tau > 0.0) {
    // int_0^tau e^{theta (tau-u)} C e^{theta u} du for C in {B1, B2}.
    const Mat i1 = integrate_exp_transport(theta, b1, theta, tau);
    const Mat i2 = integrate_exp_transport(theta, b2, theta, tau);
    p += b2 * (i1 * mu1_mean + i2 * mu0_mean);
  }
  if (!p.allFinite()) throw NumericError("closed_form_p: overflow");
  return p;
}

}  // namespace mvlab
