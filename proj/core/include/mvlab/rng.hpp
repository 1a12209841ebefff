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

#ifndef MVLAB_RNG_HPP
#define MVLAB_RNG_HPP

#include <cstdint>
#include <array>

namespace mvlab {

// Counter-based noise: every (seed, replica, particle, step) addresses an
// independent stream, so parallel simulations are reproducible regardless of
// scheduling. Streams with distinct keys never overlap; identical keys
// reproduce the same draws bit for bit.
struct StreamKey {
  std::uint64_t seed = 0;
  std::uint32_t replica = 0;
  std::uint32_t particle = 0;
  std::uint32_t step = 0;
};

// Stateless domain separation: derive an unrelated seed for a different
// purpose (initial sampling vs. stepping vs. projections) from one user seed.
std::uint64_t split_seed(std::uint64_t seed, std::uint64_t domain);

// Reserved domain tags used across the library.
namespace seed_domain {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kStep = 2;
inline constexpr std::uint64_t kProxy = 3;
inline constexpr std::uint64_t kSample = 4;
inline constexpr std::uint64_t kProjection = 5;
inline constexpr std::uint64_t kScan = 6;
}  // namespace seed_domain

// Philox4x32-10 block function (Salmon et al., SC'11).
std::array<std::uint32_t, 4> philox4x32(const std::array<std::uint32_t, 4>& counter,
                                        const std::array<std::uint32_t, 2>& key);

// Inverse standard-normal CDF (Wichura's AS 241, double precision).
double normal_inv_cdf(double p);

// Draws addressed by a StreamKey. Each instance walks the 128-bit blocks of
// its stream; two instances built from the same key yield identical output.
class NoiseStream {
 public:
  explicit NoiseStream(const StreamKey& key);

  // Uniform on the open interval (0,1).
  double uniform();
  // Standard normal via inverse-CDF of uniform().
  double gaussian();
  // uint64 with all bits random.
  std::uint64_t bits();

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 3> prefix_;  // replica, particle, step
  std::uint32_t block_ = 0;
  std::array<std::uint64_t, 2> buf_{};
  int avail_ = 0;
};

}  // namespace mvlab

#endif  // MVLAB_RNG_HPP
