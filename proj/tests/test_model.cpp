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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <nlohmann/json.hpp>

#include <cmath>

#include "mvlab/errors.hpp"
#include "mvlab/linear_flow.hpp"
#include "mvlab/model.hpp"
#include "mvlab/spectral.hpp"

using namespace mvlab;
using nlohmann::json;

namespace {

std::shared_ptr<const LinearDrift> linear_1d(double b1, double b2) {
  return std::make_shared<LinearDrift>(Mat::Constant(1, 1, b1), Mat::Constant(1, 1, b2));
}

ModelPtr langevin_quadratic(int dim, double alpha, double beta) {
  auto m = std::make_shared<LangevinDrift>(dim, LangevinDrift::quadratic_potential(dim, alpha),
                                           LangevinDrift::quadratic_potential(dim, beta),
                                           Parity::kEven);
  m->set_quadratic_interaction(beta);
  m->set_quadratic_confinement(true);
  return m;
}

}  // namespace

TEST_CASE("mean drift over a Dirac measure is plain evaluation") {
  auto model = linear_1d(-1.0, 0.5);
  const Vec x = Vec::Constant(1, 2.0);
  const EmpiricalMeasure mu = EmpiricalMeasure::dirac(Vec::Constant(1, 2.0));
  CHECK(eval_mean_drift(*model, 0.0, x, mu)[0] == doctest::Approx(-1.0).epsilon(1e-14));
}

TEST_CASE("duplicate atoms behave like a single atom") {
  auto model = linear_1d(-1.0, 0.5);
  const Vec x = Vec::Constant(1, 0.3);
  const Vec y = Vec::Constant(1, 1.7);
  EmpiricalMeasure two({1.7, 1.7}, 1);
  CHECK(eval_mean_drift(*model, 0.0, x, two)[0] ==
        doctest::Approx(model->b(0.0, x, y)[0]).epsilon(1e-14));
}

TEST_CASE("Langevin drift is minus the potential gradients") {
  auto model = langevin_quadratic(1, 1.0, 0.5);
  const Vec x = Vec::Constant(1, 1.0);
  const EmpiricalMeasure mu = EmpiricalMeasure::dirac(Vec::Zero(1));
  // -U'(1) - V'(1-0) = -1 - 0.5
  CHECK(eval_mean_drift(*model, 0.0, x, mu)[0] == doctest::Approx(-1.5).epsilon(1e-14));
}

TEST_CASE("empty measure is rejected") {
  auto model = linear_1d(-1.0, 0.5);
  CHECK_THROWS_AS(EmpiricalMeasure({}, 1), InputError);
}

TEST_CASE("analytic derivatives match finite differences at random probes") {
  auto lin2 = std::make_shared<LinearDrift>((Mat(2, 2) << -1.0, 0.4, -0.3, -1.2).finished(),
                                            (Mat(2, 2) << 0.2, 0.1, 0.0, 0.3).finished());
  CHECK(fd_derivative_check(*lin2, 2.0, 100, 11) < 1e-5);
  auto lang = langevin_quadratic(2, 1.0, 0.5);
  CHECK(fd_derivative_check(*lang, 2.0, 100, 12) < 1e-5);
  auto quartic = std::make_shared<LangevinDrift>(
      1, LangevinDrift::quartic_potential(1, 1.0, 0.3),
      LangevinDrift::quadratic_potential(1, 0.5), Parity::kEven);
  quartic->set_quadratic_interaction(0.5);
  CHECK(fd_derivative_check(*quartic, 2.0, 100, 13) < 1e-5);
}

TEST_CASE("second partials are symmetric in the differentiation slots") {
  auto quartic = std::make_shared<LangevinDrift>(
      1, LangevinDrift::quartic_potential(1, 1.0, 0.3),
      LangevinDrift::quadratic_potential(1, 0.5), Parity::kEven);
  const Vec x1 = Vec::Constant(1, 0.7), x2 = Vec::Constant(1, -0.4);
  const Tensor3 h = quartic->b11(0.0, x1, x2);
  for (int i = 0; i < 1; ++i)
    for (int j = 0; j < 1; ++j)
      for (int k = 0; k < 1; ++k) CHECK(h(i, j, k) == doctest::Approx(h(j, i, k)));
}

TEST_CASE("assemble_A reproduces the linear block matrix") {
  auto model = linear_1d(-1.0, 0.5);
  const Vec x = Vec::Zero(1);
  const Mat a = assemble_A(*model, 0.0, x, x);
  CHECK(a(0, 0) == doctest::Approx(-1.0));
  CHECK(a(0, 1) == doctest::Approx(0.5));
  CHECK(a(1, 0) == doctest::Approx(0.5));
  CHECK(a(1, 1) == doctest::Approx(-1.0));
}

TEST_CASE("assemble_A for zero drift is the zero matrix") {
  auto zero = std::make_shared<LinearDrift>(Mat::Zero(1, 1), Mat::Zero(1, 1));
  const Vec x = Vec::Constant(1, 3.0);
  CHECK(assemble_A(*zero, 0.0, x, x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("assemble_A for the quadratic Langevin model") {
  auto model = langevin_quadratic(1, 1.0, 0.5);
  const Vec x1 = Vec::Constant(1, 0.3), x2 = Vec::Constant(1, -1.1);
  const Mat a = assemble_A(*model, 0.0, x1, x2);
  CHECK(a(0, 0) == doctest::Approx(-1.5));
  CHECK(a(0, 1) == doctest::Approx(0.5));
  CHECK(a(1, 0) == doctest::Approx(0.5));
  CHECK(a(1, 1) == doctest::Approx(-1.5));
}

TEST_CASE("spectral scan is exact for the linear model") {
  auto model = linear_1d(-1.0, 0.5);
  const SpectralReport r = spectral_scan(*model, ProbeBox::cube(1, 3.0), 32, 5);
  CHECK(r.lambda1 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.lambda12 == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.lambda0 == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.b2_norm == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.h_satisfied);
  CHECK(r.lambda12_hat >= r.lambda12);
}

TEST_CASE("spectral scan flags a violated condition") {
  auto model = linear_1d(-1.0, 2.0);
  const SpectralReport r = spectral_scan(*model, ProbeBox::cube(1, 3.0), 32, 5);
  CHECK(r.lambda12 == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK_FALSE(r.h_satisfied);
}

TEST_CASE("spectral scan for constant-Hessian Langevin matches analytic values") {
  auto model = langevin_quadratic(1, 1.0, 0.5);
  const SpectralReport r = spectral_scan(*model, ProbeBox::cube(1, 3.0), 32, 5);
  CHECK(r.lambda1 == doctest::Approx(1.5).epsilon(1e-10));
  CHECK(r.lambda12 == doctest::Approx(1.0).epsilon(1e-10));
  // even convex V: A_sym <= -diag(hess U), so lambda0 equals the analytic 1.0
  CHECK(r.lambda0 == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(r.h_satisfied);
}

TEST_CASE("interlacing ordering holds on scans with H satisfied") {
  auto models = {linear_1d(-1.0, 0.5), linear_1d(-2.0, 0.3)};
  for (const auto& m : models) {
    const SpectralReport r = spectral_scan(*m, ProbeBox::cube(1, 2.0), 16, 7);
    if (r.h_satisfied) {
      CHECK(r.lambda12 <= r.lambda0 + 1e-12);
      CHECK(r.lambda0 <= r.lambda1 + 1e-12);
    }
  }
}

TEST_CASE("closed-form flow moments, linear 1d") {
  auto model = linear_1d(-1.0, 0.5);
  const Vec x = Vec::Constant(1, 2.0);
  const Vec mu = Vec::Constant(1, 2.0);
  const GaussianMoments gm = closed_form_flow_moments(*model, 0.0, 1.0, x, mu);
  CHECK(gm.mean[0] == doctest::Approx(2.0 * std::exp(-0.5)).epsilon(1e-12));
  CHECK(gm.cov(0, 0) == doctest::Approx((1.0 - std::exp(-2.0)) / 2.0).epsilon(1e-12));
  const GaussianMoments at_s = closed_form_flow_moments(*model, 0.0, 0.0, x, mu);
  CHECK(at_s.mean[0] == doctest::Approx(2.0));
  CHECK(at_s.cov(0, 0) == doctest::Approx(0.0));
}

TEST_CASE("closed-form transport kernel, linear 1d") {
  auto model = linear_1d(-1.0, 0.5);
  const Vec zero = Vec::Zero(1);
  const Vec one = Vec::Ones(1);
  // only the B2 e^{(t-s)(B1+B2)} x term survives
  CHECK(closed_form_p(*model, 0.0, 1.0, one, zero, zero, zero)[0] ==
        doctest::Approx(0.5 * std::exp(-0.5)).epsilon(1e-10));
  // z-only input: first term B1 z
  const Vec z = Vec::Constant(1, 0.7);
  CHECK(closed_form_p(*model, 0.0, 1.0, zero, z, zero, zero)[0] ==
        doctest::Approx(-0.7 + 0.0).epsilon(1e-10));
  // zero horizon: integrals vanish
  CHECK(closed_form_p(*model, 0.0, 0.0, zero, z, zero, zero)[0] ==
        doctest::Approx(-0.7).epsilon(1e-12));
}

TEST_CASE("model JSON loading round-trips kinds") {
  const json lin = {{"kind", "linear"}, {"B1", {{-1.0}}}, {"B2", {{0.5}}}};
  auto m1 = load_model(lin);
  CHECK(m1->dim() == 1);
  CHECK(m1->b(0.0, Vec::Constant(1, 2.0), Vec::Constant(1, 2.0))[0] ==
        doctest::Approx(-1.0));

  const json lang = {{"kind", "langevin"}, {"U", "quadratic"}, {"alpha", 1.0},
                     {"V", "quadratic"},   {"beta", 0.5}};
  auto m2 = load_model(lang);
  CHECK(m2->b(0.0, Vec::Ones(1), Vec::Zero(1))[0] == doctest::Approx(-1.5));

  CHECK_THROWS_AS(load_model(json{{"kind", "nope"}}), InputError);
}

TEST_CASE("model registry serves compiled-in models by name") {
  ModelRegistry::instance().add("test_zero", [](const json&) -> ModelPtr {
    return std::make_shared<LinearDrift>(Mat::Zero(1, 1), Mat::Zero(1, 1));
  });
  const json doc = {{"kind", "registry"}, {"name", "test_zero"}};
  auto m = load_model(doc);
  CHECK(m->b(0.0, Vec::Ones(1), Vec::Ones(1))[0] == 0.0);
  CHECK_THROWS_AS(load_model(json{{"kind", "registry"}, {"name", "missing"}}), InputError);
}
