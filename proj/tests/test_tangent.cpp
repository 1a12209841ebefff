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

#include <cmath>

#include "mvlab/model.hpp"
#include "mvlab/sde.hpp"
#include "mvlab/spectral.hpp"
#include "mvlab/tangent.hpp"

using namespace mvlab;

namespace {

std::shared_ptr<const LinearDrift> linear_1d(double b1, double b2) {
  return std::make_shared<LinearDrift>(Mat::Constant(1, 1, b1), Mat::Constant(1, 1, b2));
}

std::shared_ptr<LangevinDrift> langevin(int dim, double alpha, double beta, double kappa = 0.0) {
  auto u = kappa == 0.0 ? LangevinDrift::quadratic_potential(dim, alpha)
                        : LangevinDrift::quartic_potential(dim, alpha, kappa);
  auto m = std::make_shared<LangevinDrift>(dim, std::move(u),
                                           LangevinDrift::quadratic_potential(dim, beta),
                                           Parity::kEven);
  m->set_quadratic_interaction(beta);
  m->set_quadratic_confinement(kappa == 0.0);
  return m;
}

FlowSample one_flow(const ModelPtr& model, const InitialSpec& mu, const Vec& x,
                    const TimeGrid& grid, std::uint64_t seed) {
  return simulate_nonlinear_flow(model, mu, 256, {x}, grid, seed, {})[0];
}

}  // namespace

TEST_CASE("tangent of the linear flow matches the discrete exponential") {
  auto model = linear_1d(-1.0, 0.5);
  TimeGrid grid{0.0, 1.0, 1e-4, {1.0}};
  const FlowSample flow = one_flow(model, InitialSpec::dirac1(0.0), Vec::Zero(1), grid, 5);
  const TangentFlow tf = tangent_flow(*model, flow);
  // exact continuous value e^{B1 t}; the discrete product differs by O(dt)
  CHECK(tf.first_final(0, 0) == doctest::Approx(std::exp(-1.0)).epsilon(5e-4));
  CHECK(tf.has_second);
  CHECK(tf.second_final.is_zero());
}

TEST_CASE("tangent at zero horizon is the identity with zero second variation") {
  auto model = linear_1d(-1.0, 0.5);
  TimeGrid grid{0.0, 0.0, 1e-3, {0.0}};
  const FlowSample flow = one_flow(model, InitialSpec::dirac1(0.0), Vec::Ones(1), grid, 5);
  const TangentFlow tf = tangent_flow(*model, flow);
  CHECK(tf.first_final(0, 0) == 1.0);
  CHECK(tf.second_final.is_zero());
}

TEST_CASE("tangent norm obeys the exponential bound for h-satisfied models") {
  const TimeGrid grid{0.0, 2.0, 1e-3, {2.0}};
  struct Case {
    ModelPtr model;
    double lambda1;
  };
  std::vector<Case> cases;
  cases.push_back({linear_1d(-1.0, 0.5), 1.0});
  cases.push_back({langevin(1, 1.0, 0.5), 1.5});
  for (const auto& c : cases) {
    for (std::uint64_t probe = 0; probe < 20; ++probe) {
      NoiseStream ns(StreamKey{900 + probe, 0, 0, 0});
      const Vec x = Vec::Constant(1, 4.0 * ns.uniform() - 2.0);
      const FlowSample flow = one_flow(c.model, InitialSpec::gaussian1(0.0, 1.0), x, grid,
                                       1000 + probe);
      const TangentFlow tf = tangent_flow(*c.model, flow);
      CHECK(spectral_norm(tf.first_final) <= 1.05 * std::exp(-c.lambda1 * 2.0));
    }
  }
}

TEST_CASE("second variation norm decays like the first") {
  // quartic confinement turns on a genuine second variation
  auto model = langevin(1, 1.0, 0.5, 0.2);
  const std::vector<double> ts{1.0, 2.0, 3.0};
  std::vector<double> ratios;
  for (double t : ts) {
    TimeGrid grid{0.0, t, 1e-3, {t}};
    const FlowSample flow = one_flow(model, InitialSpec::gaussian1(0.5, 0.25),
                                     Vec::Constant(1, 0.8), grid, 31);
    const TangentFlow tf = tangent_flow(*model, flow);
    double frob = 0.0;
    for (int i = 0; i < 1; ++i) frob += tf.second_final(i, i, i) * tf.second_final(i, i, i);
    // lambda1 over the reachable set is at least alpha + beta = 1.5
    ratios.push_back(std::sqrt(frob) / std::exp(-1.5 * t));
  }
  // C = ratio stays bounded and stable across horizons
  for (double r : ratios) CHECK(r < 1.0);
  CHECK(std::fabs(ratios[1] - ratios[2]) < 0.5 * (ratios[0] + 1e-12) + 0.1);
}

TEST_CASE("finite-difference replay reproduces the tangent") {
  TimeGrid grid{0.0, 0.5, 1e-3, {0.5}};

  SUBCASE("linear drift is exact to roundoff") {
    auto model = linear_1d(-1.0, 0.5);
    const auto report = fd_gradient_check(model, InitialSpec::dirac1(0.0), 64,
                                          Vec::Constant(1, 0.7), 1e-4, grid, 21);
    CHECK(report.max_rel_error < 1e-10);
  }
  SUBCASE("zero drift has identity tangent") {
    auto model = linear_1d(0.0, 0.0);
    const auto report = fd_gradient_check(model, InitialSpec::dirac1(0.0), 16,
                                          Vec::Zero(1), 1e-4, grid, 22);
    CHECK(report.tangent(0, 0) == 1.0);
    CHECK(report.max_rel_error < 1e-12);
  }
  SUBCASE("quadratic Langevin is affine, so the replay is exact") {
    auto model = langevin(1, 1.0, 0.5);
    const auto report = fd_gradient_check(model, InitialSpec::gaussian1(0.0, 1.0), 128,
                                          Vec::Constant(1, 1.0), 1e-4, grid, 23);
    CHECK(report.max_rel_error < 1e-3);
    CHECK(report.max_rel_error < 1e-9);
  }
  SUBCASE("quartic Langevin stays within the central-difference error") {
    auto model = langevin(1, 1.0, 0.5, 0.3);
    const auto report = fd_gradient_check(model, InitialSpec::gaussian1(0.0, 0.25), 128,
                                          Vec::Constant(1, 0.5), 1e-4, grid, 24);
    CHECK(report.max_rel_error < 1e-3);
  }
}

TEST_CASE("tangent in two dimensions tracks the matrix flow") {
  Mat b1(2, 2), b2(2, 2);
  b1 << -1.0, 0.4, -0.3, -1.2;
  b2 << 0.2, 0.0, 0.1, 0.1;
  auto model = std::make_shared<LinearDrift>(b1, b2);
  TimeGrid grid{0.0, 1.0, 1e-4, {1.0}};
  const FlowSample flow = one_flow(model, InitialSpec::dirac(Vec::Zero(2)),
                                   (Vec(2) << 0.3, -0.2).finished(), grid, 9);
  const TangentFlow tf = tangent_flow(*model, flow);
  const Mat exact = expm(b1).transpose();
  CHECK((tf.first_final - exact).cwiseAbs().maxCoeff() < 1e-3);
}
