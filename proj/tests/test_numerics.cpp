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

#include <atomic>
#include <cmath>

#include "mvlab/numerics.hpp"

using namespace mvlab;

TEST_CASE("matrix exponential matches scalar and commuting cases") {
  Mat a(1, 1);
  a << -1.0;
  CHECK(expm(a)(0, 0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));

  Mat n(2, 2);
  n << 0.0, 1.0, 0.0, 0.0;  // nilpotent: e^N = I + N
  const Mat en = expm(n);
  CHECK(en(0, 0) == doctest::Approx(1.0));
  CHECK(en(0, 1) == doctest::Approx(1.0));
  CHECK(en(1, 0) == doctest::Approx(0.0));
}

TEST_CASE("Gauss-Legendre integrates polynomials exactly") {
  const Quadrature q = gauss_legendre(8, 0.0, 2.0);
  double acc = 0.0;
  for (size_t i = 0; i < q.nodes.size(); ++i) {
    const double x = q.nodes[i];
    acc += q.weights[i] * (x * x * x * x * x);  // x^5 over [0,2]: 64/6
  }
  CHECK(acc == doctest::Approx(64.0 / 6.0).epsilon(1e-13));
}

TEST_CASE("exp sandwich integral reproduces the scalar OU variance") {
  Mat b1(1, 1);
  b1 << -1.0;
  const Mat v = integrate_exp_sandwich(b1, Mat::Identity(1, 1), b1.transpose(), 1.0);
  CHECK(v(0, 0) == doctest::Approx((1.0 - std::exp(-2.0)) / 2.0).epsilon(1e-12));
}

TEST_CASE("transport integral matches the semigroup difference identity") {
  // int_0^t e^{theta(t-u)} B2 e^{B1 u} du = e^{t theta} - e^{t B1} when
  // theta = B1 + B2, including non-commuting matrices.
  Mat b1(2, 2), b2(2, 2);
  b1 << -1.0, 0.3, -0.2, -1.5;
  b2 << 0.4, 0.1, 0.0, 0.2;
  const Mat theta = b1 + b2;
  const double t = 0.7;
  const Mat lhs = integrate_exp_transport(theta, b2, b1, t);
  const Mat rhs = expm(t * theta) - expm(t * b1);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("pairwise sum is exact on integers and deterministic") {
  std::vector<double> xs(1000);
  for (int i = 0; i < 1000; ++i) xs[static_cast<size_t>(i)] = i + 1;
  CHECK(pairwise_sum(xs) == 500500.0);
}

TEST_CASE("spectral helpers agree with hand values") {
  Mat a(2, 2);
  a << -1.0, 0.5, 0.5, -1.0;
  CHECK(max_eig_sym(a) == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(spectral_norm(a) == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("parallel_for covers every index once") {
  std::vector<std::atomic<int>> hits(257);
  parallel_for(257, 4, [&](int i) { hits[static_cast<size_t>(i)]++; });
  for (const auto& h : hits) CHECK(h.load() == 1);
}
