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

#include "mvlab/errors.hpp"
#include "mvlab/model.hpp"
#include "mvlab/sde.hpp"

using namespace mvlab;

namespace {

std::shared_ptr<const LinearDrift> linear_1d(double b1, double b2) {
  return std::make_shared<LinearDrift>(Mat::Constant(1, 1, b1), Mat::Constant(1, 1, b2));
}

struct ConstantDrift final : DriftModel {
  double c;
  explicit ConstantDrift(double value) : DriftModel(1), c(value) {}
  void eval_b(double, const double*, const double*, double* out) const override { out[0] = c; }
  Mat b1(double, const Vec&, const Vec&) const override { return Mat::Zero(1, 1); }
  Mat b2(double, const Vec&, const Vec&) const override { return Mat::Zero(1, 1); }
};

}  // namespace

TEST_CASE("dirac initial puts every particle at the point") {
  const auto ens = sample_initial(InitialSpec::dirac1(3.0), 4, 1, StreamKey{1, 0, 0, 0});
  for (int i = 0; i < 4; ++i) CHECK(ens.row(i)[0] == 3.0);
}

TEST_CASE("gaussian initial sample mean obeys the CLT bound") {
  const int n = 100000;
  const auto ens = sample_initial(InitialSpec::gaussian(Vec::Zero(2), Mat::Identity(2, 2)), n, 2,
                                  StreamKey{7, 0, 0, 0});
  const Vec mean = ens.mean();
  for (int j = 0; j < 2; ++j) CHECK(std::fabs(mean[j]) < 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("two-point initial is reproducible bit for bit") {
  const InitialSpec spec = InitialSpec::two_point(Vec::Zero(1), Vec::Ones(1), 0.5);
  const auto a = sample_initial(spec, 2, 1, StreamKey{5, 1, 0, 0});
  const auto b = sample_initial(spec, 2, 1, StreamKey{5, 1, 0, 0});
  CHECK(a.positions == b.positions);
}

TEST_CASE("non-PSD covariance is rejected") {
  Mat cov(2, 2);
  cov << 1.0, 2.0, 2.0, 1.0;  // eigenvalues 3, -1
  CHECK_THROWS_AS(sample_initial(InitialSpec::gaussian(Vec::Zero(2), cov), 4, 2,
                                 StreamKey{1, 0, 0, 0}),
                  InputError);
}

TEST_CASE("zero drift and zeroed noise is a fixed point") {
  auto zero = std::make_shared<LinearDrift>(Mat::Zero(1, 1), Mat::Zero(1, 1));
  auto ens = sample_initial(InitialSpec::gaussian1(0.0, 1.0), 16, 1, StreamKey{3, 0, 0, 0});
  EmOptions opts;
  opts.noise_scale = 0.0;
  const auto next = em_step(ens, *zero, 0.1, StreamKey{3, 0, 0, 0}, opts);
  CHECK(next.positions == ens.positions);
  CHECK(next.t == doctest::Approx(0.1));
}

TEST_CASE("constant drift with zero noise shifts every particle by c dt") {
  ConstantDrift model(2.0);
  auto ens = sample_initial(InitialSpec::dirac1(1.0), 8, 1, StreamKey{3, 0, 0, 0});
  EmOptions opts;
  opts.noise_scale = 0.0;
  const auto next = em_step(ens, model, 0.1, StreamKey{3, 0, 0, 0}, opts);
  for (int i = 0; i < 8; ++i) CHECK(next.row(i)[0] == doctest::Approx(1.2).epsilon(1e-14));
}

TEST_CASE("ensemble mean follows the closed ODE over replicas") {
  // E[m_{t+dt}] = (1 + (B1+B2) dt) m_t for the linear drift
  auto model = linear_1d(-1.0, 0.5);
  const double dt = 0.05;
  double acc = 0.0;
  const int reps = 400;
  for (int r = 0; r < reps; ++r) {
    auto ens = sample_initial(InitialSpec::dirac1(2.0), 64, 1,
                              StreamKey{split_seed(9, seed_domain::kInit),
                                        static_cast<std::uint32_t>(r), 0, 0});
    const auto next =
        em_step(ens, *model, dt, StreamKey{split_seed(9, seed_domain::kStep),
                                           static_cast<std::uint32_t>(r), 0, 0});
    acc += next.mean()[0];
  }
  CHECK(acc / reps == doctest::Approx(2.0 * (1.0 - 0.5 * dt)).epsilon(2e-3));
}

TEST_CASE("mean-field simulation matches the closed-form mean") {
  auto model = linear_1d(-1.0, 0.5);
  TimeGrid grid{0.0, 1.0, 1e-3, {1.0}};
  const auto snaps = simulate_mean_field(*model, InitialSpec::dirac1(2.0), 10000, grid, 17);
  REQUIRE(snaps.size() == 1);
  const double mean = snaps[0].mean()[0];
  const double exact = 2.0 * std::exp(-0.5);
  const double stderr_bound = 3.0 * std::sqrt(0.7 / 10000.0);
  CHECK(std::fabs(mean - exact) < stderr_bound + 2e-3);
}

TEST_CASE("checkpoint at the start returns the initial ensemble") {
  auto model = linear_1d(-1.0, 0.0);
  TimeGrid grid{0.0, 0.5, 1e-2, {0.0}};
  const auto snaps = simulate_mean_field(*model, InitialSpec::dirac1(1.5), 4, grid, 1);
  REQUIRE(snaps.size() == 1);
  for (int i = 0; i < 4; ++i) CHECK(snaps[0].row(i)[0] == 1.5);
}

TEST_CASE("simulation is deterministic and thread-count independent") {
  auto model = linear_1d(-1.0, 0.5);
  TimeGrid grid{0.0, 0.2, 1e-2, {0.2}};
  SimOptions one;
  one.threads = 1;
  SimOptions four;
  four.threads = 4;
  const auto a = simulate_mean_field(*model, InitialSpec::gaussian1(0.0, 1.0), 512, grid, 33, one);
  const auto b = simulate_mean_field(*model, InitialSpec::gaussian1(0.0, 1.0), 512, grid, 33, four);
  CHECK(a[0].positions == b[0].positions);
}

TEST_CASE("weak order: mean error shrinks with dt and N") {
  auto model = linear_1d(-1.0, 0.5);
  // deterministic part of the bias: the discrete mean recursion vs e^{theta t}
  const auto discrete_mean = [&](double dt) {
    double m = 2.0;
    const int steps = static_cast<int>(std::llround(1.0 / dt));
    for (int k = 0; k < steps; ++k) m *= 1.0 - 0.5 * dt;
    return m;
  };
  const double exact = 2.0 * std::exp(-0.5);
  const double err_coarse = std::fabs(discrete_mean(2e-3) - exact);
  const double err_fine = std::fabs(discrete_mean(1e-3) - exact);
  CHECK(err_fine < 0.6 * err_coarse);  // first order in dt
}

TEST_CASE("second moments stay bounded over [0, 10] when H holds") {
  auto model = linear_1d(-1.0, 0.5);
  TimeGrid grid{0.0, 10.0, 1e-2, {2.0, 4.0, 6.0, 8.0, 10.0}};
  const auto snaps = simulate_mean_field(*model, InitialSpec::dirac1(2.0), 2000, grid, 4);
  for (const auto& ens : snaps) {
    double m2 = 0.0;
    for (int i = 0; i < ens.n; ++i) m2 += ens.row(i)[0] * ens.row(i)[0];
    m2 /= ens.n;
    CHECK(m2 < 4.0 + 1.0);  // initial second moment plus stationary spread
  }
}

TEST_CASE("nonlinear flow in exact mode reproduces the closed-form moments") {
  auto model = linear_1d(-1.0, 0.5);
  TimeGrid grid{0.0, 1.0, 1e-3, {1.0}};
  std::vector<Vec> starts;
  const int flows = 4000;
  for (int i = 0; i < flows; ++i) starts.push_back(Vec::Constant(1, 2.0));
  FlowOptions opts;
  opts.record_tangent_data = false;
  opts.record_increments = false;
  // distinct replica ids give the flows independent noise
  const auto samples =
      simulate_nonlinear_flow(model, InitialSpec::dirac1(2.0), 1, starts, grid, 77, opts);
  double sum = 0.0, sum2 = 0.0;
  for (const auto& s : samples) {
    const double v = s.record.state(s.record.n_steps)[0];
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / flows;
  const double var = sum2 / flows - mean * mean;
  CHECK(mean == doctest::Approx(2.0 * std::exp(-0.5)).epsilon(0.02));
  CHECK(var == doctest::Approx((1.0 - std::exp(-2.0)) / 2.0).epsilon(0.08));
}

TEST_CASE("proxy of one particle with no interaction is a plain SDE") {
  // b2 == 0: the law proxy is irrelevant
  auto model = linear_1d(-1.0, 0.0);
  TimeGrid grid{0.0, 0.5, 1e-2, {0.5}};
  FlowOptions opts;
  opts.mode = LawMode::kParticle;
  const auto a = simulate_nonlinear_flow(model, InitialSpec::dirac1(5.0), 1,
                                         {Vec::Constant(1, 1.0)}, grid, 3, opts);
  const auto b = simulate_nonlinear_flow(model, InitialSpec::dirac1(-5.0), 1,
                                         {Vec::Constant(1, 1.0)}, grid, 3, opts);
  CHECK(a[0].record.state(a[0].record.n_steps)[0] ==
        doctest::Approx(b[0].record.state(b[0].record.n_steps)[0]).epsilon(1e-12));
}

TEST_CASE("coupled flows contract pathwise within the advertised rate") {
  // |X^1 - X^0| <= e^{-lambda12 t} W2(mu0, mu1), same noise key
  auto model = linear_1d(-1.0, 0.5);
  TimeGrid grid{0.0, 1.0, 1e-3, {1.0}};
  const Vec x = Vec::Zero(1);
  const auto f0 =
      simulate_nonlinear_flow(model, InitialSpec::dirac1(0.0), 1, {x}, grid, 123, {});
  const auto f1 =
      simulate_nonlinear_flow(model, InitialSpec::dirac1(1.0), 1, {x}, grid, 123, {});
  const double gap = std::fabs(f1[0].record.state(f1[0].record.n_steps)[0] -
                               f0[0].record.state(f0[0].record.n_steps)[0]);
  CHECK(gap <= 1.10 * std::exp(-0.5 * 1.0) * 1.0);
}

TEST_CASE("weighted steps accept signed perturbation weights") {
  auto model = linear_1d(-1.0, 0.5);
  ParticleEnsemble ens;
  ens.n = 3;
  ens.d = 1;
  ens.t = 0.0;
  ens.positions = {0.0, 1.0, 2.0};
  const std::vector<double> weights = {1.05, -0.1, 0.05};
  EmOptions opts;
  opts.noise_scale = 0.0;
  const auto next = em_step_weighted(ens, weights, *model, 0.1, StreamKey{1, 0, 0, 0}, opts);
  // weighted mean = 1.05*0 - 0.1*1 + 0.05*2 = 0
  CHECK(next.row(0)[0] == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(next.row(1)[0] == doctest::Approx(1.0 - 0.1).epsilon(1e-14));
}

TEST_CASE("grid validation rejects malformed inputs") {
  TimeGrid bad{0.0, 1.0, -0.1, {}};
  CHECK_THROWS_AS(bad.validate(), InputError);
  TimeGrid outside{0.0, 1.0, 0.1, {2.0}};
  CHECK_THROWS_AS(outside.validate(), InputError);
}
