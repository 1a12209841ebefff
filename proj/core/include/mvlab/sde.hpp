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

#ifndef MVLAB_SDE_HPP
#define MVLAB_SDE_HPP

#include <memory>
#include <optional>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mvlab/measure.hpp"
#include "mvlab/model.hpp"
#include "mvlab/numerics.hpp"
#include "mvlab/rng.hpp"

namespace mvlab {

struct TimeGrid {
  double s = 0.0;
  double t_end = 1.0;
  double dt = 1e-3;
  std::vector<double> checkpoints;

  void validate() const;
  int n_steps() const;
  double time_at(int step) const { return s + step * dt; }
  // Step index whose time is closest to the checkpoint.
  int step_of(double time) const;
};

struct ParticleEnsemble {
  int n = 0;
  int d = 0;
  double t = 0.0;
  std::vector<double> positions;  // n x d row-major

  double* row(int i) { return positions.data() + static_cast<size_t>(i) * d; }
  const double* row(int i) const { return positions.data() + static_cast<size_t>(i) * d; }
  Vec point(int i) const { return Eigen::Map<const Vec>(row(i), d); }
  Vec mean() const { return column_mean(positions, n, d); }
  EmpiricalMeasure to_measure() const { return EmpiricalMeasure(positions, d); }
  void check_finite() const;
};

struct InitialSpec {
  enum class Kind { kDirac, kGaussian, kUniform, kTwoPoint };
  Kind kind = Kind::kDirac;
  Vec point;           // dirac
  Vec mean;            // gaussian
  Mat cov;             // gaussian
  Vec lo, hi;          // uniform box
  Vec a, b;            // two-point
  double p_a = 0.5;    // P(draw == a)

  static InitialSpec dirac(const Vec& x);
  static InitialSpec dirac1(double x);
  static InitialSpec gaussian(const Vec& mean, const Mat& cov);
  static InitialSpec gaussian1(double mean, double var);
  static InitialSpec uniform(const Vec& lo, const Vec& hi);
  static InitialSpec two_point(const Vec& a, const Vec& b, double p_a);

  int dim() const;
  Vec mean_of() const;
  static InitialSpec from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
};

// i.i.d. draws, deterministic given the key (the key's step field is
// reserved and overwritten).
ParticleEnsemble sample_initial(const InitialSpec& spec, int n, int d, const StreamKey& key);

struct EmOptions {
  double noise_scale = 1.0;  // test hook; 0 zeroes the Brownian increments
  int threads = 1;
};

// One Euler-Maruyama step of the N-particle interacting system:
//   x_i <- x_i + b_t(x_i, m(x)) dt + sqrt(dt) Z_i.
// key.step identifies the step; key.particle is overwritten per particle.
// Models with a mean closure run in O(N), otherwise the pairwise drift
// costs O(N^2).
ParticleEnsemble em_step(const ParticleEnsemble& ens, const DriftModel& model, double dt,
                         const StreamKey& key, const EmOptions& opts = {});

// Same step for a weighted cloud; weights are held fixed and may carry the
// signed perturbations used by measure-derivative stencils.
ParticleEnsemble em_step_weighted(const ParticleEnsemble& ens, std::span<const double> weights,
                                  const DriftModel& model, double dt, const StreamKey& key,
                                  const EmOptions& opts = {});

struct SimOptions {
  std::uint32_t replica = 0;
  double noise_scale = 1.0;
  int threads = 1;
};

// Repeated em steps with snapshots at the grid checkpoints.
std::vector<ParticleEnsemble> simulate_mean_field(const DriftModel& model, const InitialSpec& init,
                                                  int n, const TimeGrid& grid, std::uint64_t seed,
                                                  const SimOptions& opts = {});

// ---------------------------------------------------------------------------
// Law along the flow: either the exact linear law or an M-particle proxy
// cloud evolved alongside the driven states. The proxy never sees the states
// it drives.

class LawEvolver {
 public:
  virtual ~LawEvolver() = default;
  virtual int dim() const = 0;
  virtual double time() const = 0;
  // Drift felt by a driven state at the current time: b(x, law_now).
  virtual void drift(const double* x, double* out) const = 0;
  virtual Mat b1_now(const Vec& x) const = 0;
  virtual Tensor3 b11_now(const Vec& x) const = 0;
  virtual Vec mean_now() const = 0;
  virtual ParticleEnsemble snapshot_now(int max_atoms) const = 0;
  virtual void advance(std::uint32_t step_index) = 0;
  virtual std::unique_ptr<LawEvolver> clone() const = 0;
};

// Exact law for LinearDrift (measure enters through its mean only).
std::unique_ptr<LawEvolver> make_exact_law(const std::shared_ptr<const LinearDrift>& model,
                                           const InitialSpec& mu0, const TimeGrid& grid);

// M-particle proxy cloud seeded from mu0. Clouds built from the same seed and
// grid share their noise keys, which couples them pathwise (common random
// numbers).
std::unique_ptr<LawEvolver> make_cloud_law(const ModelPtr& model, const InitialSpec& mu0,
                                           int m_proxy, const TimeGrid& grid, std::uint64_t seed,
                                           const EmOptions& opts = {});

enum class LawMode { kAuto, kExact, kParticle };

// Picks the exact law for linear models in kAuto/kExact mode, otherwise a
// proxy cloud.
std::unique_ptr<LawEvolver> make_law(const ModelPtr& model, const InitialSpec& mu0, int m_proxy,
                                     const TimeGrid& grid, std::uint64_t seed, LawMode mode,
                                     const EmOptions& opts = {});

// Per-step means of the law along the grid; models whose drift and tangent
// coefficients need only the mean can replay the law from this summary
// instead of re-walking a cloud. Empty when the model does not qualify.
struct LawMeanPath {
  TimeGrid grid;
  std::vector<Vec> means;  // n_steps + 1 entries
};
std::optional<LawMeanPath> try_mean_path(const ModelPtr& model, const InitialSpec& mu0,
                                         int m_proxy, const TimeGrid& grid, std::uint64_t seed,
                                         LawMode mode);

// ---------------------------------------------------------------------------
// Nonlinear flow samples

// Dense per-step data recorded along one driven trajectory.
struct FlowRecord {
  int d = 0;
  int n_steps = 0;
  std::vector<double> states;      // (n_steps+1) x d
  std::vector<double> increments;  // n_steps x d, Brownian increments
  std::vector<double> jac1;        // n_steps x d x d, b1(x_n, law_n)
  std::vector<double> hess11;      // n_steps x d^3, b11(x_n, law_n); empty if unavailable

  Vec state(int step) const;
  Mat jac(int step) const;
  Tensor3 hess(int step) const;
  bool has_hessians() const { return !hess11.empty(); }
};

struct FlowSample {
  Vec start_point;
  TimeGrid grid;
  std::vector<ParticleEnsemble> path;       // driven state at checkpoints
  std::vector<ParticleEnsemble> law_proxy;  // law snapshots at checkpoints
  FlowRecord record;
};

struct FlowOptions {
  LawMode mode = LawMode::kAuto;
  bool record_tangent_data = true;
  bool record_increments = true;
  int law_snapshot_atoms = 64;  // proxy atoms kept per checkpoint snapshot
  double noise_scale = 1.0;
};

// Drives one state per start point along the law of mu0.
std::vector<FlowSample> simulate_nonlinear_flow(const ModelPtr& model, const InitialSpec& mu0,
                                                int m_proxy, const std::vector<Vec>& xs,
                                                const TimeGrid& grid, std::uint64_t seed,
                                                const FlowOptions& opts = {});

}  // namespace mvlab

#endif  // MVLAB_SDE_HPP
