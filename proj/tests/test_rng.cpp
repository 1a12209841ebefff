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
#include <set>

#include "mvlab/rng.hpp"

using namespace mvlab;

TEST_CASE("identical keys reproduce identical draws") {
  StreamKey key{42, 3, 7, 11};
  NoiseStream a(key), b(key);
  for (int i = 0; i < 100; ++i) CHECK(a.bits() == b.bits());
}

TEST_CASE("distinct keys yield distinct streams") {
  std::set<std::uint64_t> seen;
  for (std::uint32_t r = 0; r < 8; ++r)
    for (std::uint32_t p = 0; p < 8; ++p)
      for (std::uint32_t s = 0; s < 8; ++s) {
        NoiseStream ns(StreamKey{1, r, p, s});
        seen.insert(ns.bits());
      }
  CHECK(seen.size() == 8 * 8 * 8);
}

TEST_CASE("uniforms lie strictly inside (0,1)") {
  NoiseStream ns(StreamKey{7, 0, 0, 0});
  for (int i = 0; i < 10000; ++i) {
    const double u = ns.uniform();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("inverse normal CDF hits known quantiles") {
  CHECK(normal_inv_cdf(0.5) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(normal_inv_cdf(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(normal_inv_cdf(0.8413447460685429) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(normal_inv_cdf(0.0013498980316300933) == doctest::Approx(-3.0).epsilon(1e-10));
  CHECK_THROWS(normal_inv_cdf(0.0));
  CHECK_THROWS(normal_inv_cdf(1.0));
}

TEST_CASE("gaussian draws have the right first moments") {
  NoiseStream ns(StreamKey{99, 0, 0, 0});
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = ns.gaussian();
    sum += g;
    sum2 += g * g;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK(std::fabs(mean) < 4.0 / std::sqrt(static_cast<double>(n)));
  CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("split_seed separates domains") {
  CHECK(split_seed(1, seed_domain::kInit) != split_seed(1, seed_domain::kStep));
  CHECK(split_seed(1, seed_domain::kInit) != split_seed(2, seed_domain::kInit));
  CHECK(split_seed(5, 9) == split_seed(5, 9));
}
