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

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mvlab/errors.hpp"
#include "mvlab/measure.hpp"
#include "mvlab/rng.hpp"
#include "mvlab/wasserstein.hpp"

using namespace mvlab;

namespace {

EmpiricalMeasure random_cloud(int n, int d, std::uint64_t seed) {
  NoiseStream ns(StreamKey{seed, 0, 0, 0});
  std::vector<double> atoms(static_cast<size_t>(n) * d);
  for (auto& a : atoms) a = 2.0 * ns.uniform() - 1.0;
  return EmpiricalMeasure(std::move(atoms), d);
}

double brute_force_w(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, int p) {
  const int n = mu.size();
  std::vector<int> perm(static_cast<size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  double best = 1e300;
  do {
    double cost = 0.0;
    for (int i = 0; i < n; ++i) {
      const double dist = (mu.atom(i) - nu.atom(perm[static_cast<size_t>(i)])).norm();
      cost += p == 1 ? dist : dist * dist;
    }
    best = std::min(best, cost);
  } while (std::next_permutation(perm.begin(), perm.end()));
  best /= n;
  return p == 1 ? best : std::sqrt(best);
}

}  // namespace

TEST_CASE("integration against atoms") {
  const EmpiricalMeasure dirac = EmpiricalMeasure::dirac(Vec::Constant(1, 3.0));
  CHECK(integrate(dirac, [](const Vec& x) { return x[0] * x[0] + 1.0; }) ==
        doctest::Approx(10.0));
  const EmpiricalMeasure two({0.0, 1.0}, 1);
  CHECK(integrate(two, [](const Vec& x) { return x[0]; }) == doctest::Approx(0.5));
  const EmpiricalMeasure three({1.0, 2.0, 3.0}, 1);
  CHECK(integrate(three, [](const Vec& x) { return x[0] * x[0]; }) ==
        doctest::Approx(14.0 / 3.0).epsilon(1e-14));
  CHECK_THROWS_AS(integrate(three, [](const Vec&) { return std::nan(""); }), NumericError);
}

TEST_CASE("moment norms") {
  const Vec p = Vec::Constant(1, -2.5);
  CHECK(moment_norm(EmpiricalMeasure::dirac(p), 3) == doctest::Approx(2.5));
  CHECK(moment_norm(EmpiricalMeasure({-1.0, 1.0}, 1), 2) == doctest::Approx(1.0));
  CHECK(moment_norm(EmpiricalMeasure({0.0, 2.0}, 1), 2) ==
        doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
  CHECK_THROWS_AS(moment_norm(EmpiricalMeasure({1.0}, 1), 0), InputError);
}

TEST_CASE("weights must be a probability vector") {
  CHECK_THROWS_AS(EmpiricalMeasure({0.0, 1.0}, {0.7, 0.7}, 1), InputError);
  CHECK_THROWS_AS(EmpiricalMeasure({0.0, 1.0}, {-0.5, 1.5}, 1), InputError);
}

TEST_CASE("1d Wasserstein on sorted atoms") {
  const EmpiricalMeasure a({0.0, 1.0, 2.0}, 1);
  const EmpiricalMeasure b({1.0, 2.0, 3.0}, 1);
  CHECK(wasserstein_1d(1, a, b) == doctest::Approx(1.0));
  CHECK(wasserstein_1d(1, a, a) == doctest::Approx(0.0));
  const EmpiricalMeasure c({0.0, 0.0}, 1);
  const EmpiricalMeasure d({0.0, 2.0}, 1);
  CHECK(wasserstein_1d(2, c, d) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
  CHECK_THROWS_AS(wasserstein_1d(1, random_cloud(4, 2, 1), random_cloud(4, 2, 2)), InputError);
}

TEST_CASE("1d quantile coupling handles general weights") {
  const EmpiricalMeasure a({0.0, 1.0}, {0.25, 0.75}, 1);
  const EmpiricalMeasure b({0.0, 1.0}, {0.75, 0.25}, 1);
  // move 0.5 of mass across a unit gap
  CHECK(wasserstein_1d(1, a, b) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("exact assignment distance: translation and permutation invariance") {
  const EmpiricalMeasure mu = random_cloud(16, 2, 3);
  std::vector<double> shifted(mu.atoms().begin(), mu.atoms().end());
  const Vec v = (Vec(2) << 0.3, -0.4).finished();
  for (size_t i = 0; i < shifted.size(); i += 2) {
    shifted[i] += v[0];
    shifted[i + 1] += v[1];
  }
  const EmpiricalMeasure nu(shifted, 2);
  CHECK(wasserstein_exact(mu, nu, 1) == doctest::Approx(v.norm()).epsilon(1e-10));
  CHECK(wasserstein_exact(mu, nu, 2) == doctest::Approx(v.norm()).epsilon(1e-10));

  const EmpiricalMeasure p({0.0, 0.0, 1.0, 0.0}, 2);
  const EmpiricalMeasure q({1.0, 0.0, 0.0, 0.0}, 2);
  CHECK(wasserstein_exact(p, q, 2) == doctest::Approx(0.0));
}

TEST_CASE("exact assignment equals factorial brute force for N <= 7") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const int n = 3 + static_cast<int>(seed % 5);  // 3..7
    const EmpiricalMeasure mu = random_cloud(n, 2, 1000 + seed);
    const EmpiricalMeasure nu = random_cloud(n, 2, 2000 + seed);
    const int p = seed % 2 == 0 ? 1 : 2;
    CHECK(wasserstein_exact(mu, nu, p) ==
          doctest::Approx(brute_force_w(mu, nu, p)).epsilon(1e-10));
  }
}

TEST_CASE("metric axioms on random triples") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const EmpiricalMeasure a = random_cloud(8, 2, 10 + 3 * seed);
    const EmpiricalMeasure b = random_cloud(8, 2, 11 + 3 * seed);
    const EmpiricalMeasure c = random_cloud(8, 2, 12 + 3 * seed);
    const double ab = wasserstein_exact(a, b, 2);
    const double ba = wasserstein_exact(b, a, 2);
    const double ac = wasserstein_exact(a, c, 2);
    const double cb = wasserstein_exact(c, b, 2);
    CHECK(std::fabs(ab - ba) < 1e-9);
    CHECK(ab <= ac + cb + 1e-9);
  }
}

TEST_CASE("W1 <= W2 on every tested pair") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const EmpiricalMeasure a = random_cloud(12, 2, 500 + seed);
    const EmpiricalMeasure b = random_cloud(12, 2, 600 + seed);
    CHECK(wasserstein_exact(a, b, 1) <= wasserstein_exact(a, b, 2) + 1e-12);
  }
}

TEST_CASE("cap refusal points to the sliced variant") {
  const EmpiricalMeasure a = random_cloud(20, 2, 1);
  const EmpiricalMeasure b = random_cloud(20, 2, 2);
  CHECK_THROWS_WITH_AS(wasserstein_exact(a, b, 2, 10),
                       doctest::Contains("sliced"), InputError);
}

TEST_CASE("sliced distance: identity, 1d reduction, translation oracle") {
  const EmpiricalMeasure a = random_cloud(32, 3, 7);
  CHECK(sliced_wasserstein(a, a, 2, 16, StreamKey{1, 0, 0, 0}) == doctest::Approx(0.0));

  const EmpiricalMeasure u({0.0, 1.0, 2.0}, 1);
  const EmpiricalMeasure v({1.0, 2.0, 3.0}, 1);
  CHECK(sliced_wasserstein(u, v, 1, 5, StreamKey{1, 0, 0, 0}) == doctest::Approx(1.0));

  // translation by v in d=3: E|<u, e>| = 1/2 on the sphere
  std::vector<double> shifted(a.atoms().begin(), a.atoms().end());
  for (size_t i = 0; i < shifted.size(); i += 3) shifted[i] += 2.0;
  const EmpiricalMeasure b(shifted, 3);
  const double sw = sliced_wasserstein(a, b, 2, 20000, StreamKey{42, 0, 0, 0});
  CHECK(sw == doctest::Approx(2.0 * 0.5).epsilon(0.02));
}
