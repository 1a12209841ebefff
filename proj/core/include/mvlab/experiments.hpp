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

#ifndef MVLAB_EXPERIMENTS_HPP
#define MVLAB_EXPERIMENTS_HPP

#include <optional>

#include "mvlab/bel.hpp"
#include "mvlab/measure_derivative.hpp"
#include "mvlab/ratefit.hpp"
#include "mvlab/sde.hpp"
#include "mvlab/spectral.hpp"
#include "mvlab/testfn.hpp"

namespace mvlab {

// ---------------------------------------------------------------------------
// Contraction of two coupled measure flows.

struct ContractionConfig {
  ModelPtr model;
  InitialSpec mu0, mu1;
  TimeGrid grid;
  int n = 10000;  // particles per cloud in particle mode
  LawMode mode = LawMode::kAuto;
  std::uint64_t seed = 1;
  int threads = 1;
  double scan_radius = 3.0;
  int scan_probes = 64;
};

struct ContractionRow {
  double t = 0.0;
  double w1 = 0.0;
  double w2 = 0.0;
};

struct ContractionResult {
  std::vector<ContractionRow> rows;
  std::optional<RateFit> w1_fit, w2_fit;
  SpectralReport spectral;  // lambda0 is the W2 target, lambda12_hat the W1 target
};

ContractionResult run_contraction(const ContractionConfig& cfg);

// ---------------------------------------------------------------------------
// Propagation-of-chaos bias and fluctuation scaling over an N-ladder.

struct ChaosConfig {
  ModelPtr model;
  InitialSpec mu0;
  double t = 2.0;
  double dt = 1e-3;
  std::vector<int> n_ladder;
  int replicas = 64;
  std::vector<NamedFn> fs{NamedFn::kId, NamedFn::kSquare};
  std::uint64_t seed = 1;
  int threads = 1;
  int m_proxy_factor = 16;       // proxy size: factor * max(N), non-closure models
  double flat_horizon = 0.0;     // extra horizon for the flatness check; 0 skips
};

struct ChaosCell {
  int n = 0;
  double bias = 0.0;
  double bias_stderr = 0.0;
  double l2err = 0.0;
};

struct ChaosFnResult {
  NamedFn f = NamedFn::kId;
  std::vector<ChaosCell> cells;
  std::optional<RateFit> bias_slope;
  std::optional<RateFit> l2_slope;
  double l2_level = 0.0;  // geometric mean over the ladder
};

struct ChaosResult {
  std::vector<ChaosFnResult> per_fn;
  // per test function: |level(flat) - level(t)| / level(t); empty when skipped
  std::vector<double> flatness;
};

ChaosResult run_chaos(const ChaosConfig& cfg);

// ---------------------------------------------------------------------------
// Taylor remainder orders in the measure perturbation eps.

struct TaylorConfig {
  ModelPtr model;
  InitialSpec mu0;
  Vec y;
  double s = 0.0, t = 1.0;
  std::vector<double> eps_ladder{0.4, 0.2, 0.1, 0.05};
  std::vector<NamedFn> fs{NamedFn::kSquare};
  std::uint64_t seed = 1;
  // flow-level check (common-noise pathwise); runs when flow_x is set
  std::optional<Vec> flow_x;
  double flow_dt = 1e-3;
  int flow_cloud = 2048;
  int threads = 1;
};

struct TaylorFnResult {
  NamedFn f = NamedFn::kId;
  std::vector<double> eps, r1, r2;
  std::optional<RateFit> r1_slope, r2_slope;
  bool r1_degenerate = false;  // remainder vanishes identically
  bool r2_degenerate = false;
};

struct TaylorResult {
  std::vector<TaylorFnResult> per_fn;
  std::vector<double> flow_eps, flow_r;
  std::optional<RateFit> flow_slope;
  bool flow_degenerate = false;
};

TaylorResult run_taylor(const TaylorConfig& cfg);

// Exact phi_{s,t}((1-eps) mu + eps delta_y)(f) for the linear drift; the
// oracle behind the closed-form Taylor table.
double linear_mixture_value(const LinearDrift& model, const InitialSpec& mu, const Vec& y,
                            double eps, NamedFn f, double s, double t);

// ---------------------------------------------------------------------------
// BEL gradient validation against closed-form / common-noise FD oracles.

struct BelValidationConfig {
  ModelPtr model;
  InitialSpec mu;
  Vec x;
  std::vector<NamedFn> fs{NamedFn::kId, NamedFn::kSigmoid};
  std::vector<double> t_ladder{0.25, 0.5, 1.0, 2.0};
  long m = 100000;
  double weight_eps = 0.5;
  double dt = 1e-3;
  std::uint64_t seed = 1;
  int threads = 1;
  long oracle_m = 200000;  // MC budget of the FD oracle
  double oracle_bump = 1e-3;
};

struct BelValidationCell {
  NamedFn f = NamedFn::kId;
  double t = 0.0;
  double estimate = 0.0;      // first component of the BEL gradient
  double std_error = 0.0;
  double oracle = 0.0;
  double oracle_stderr = 0.0;
  bool agree = false;         // within 3 combined standard errors
};

struct BelValidationResult {
  std::vector<BelValidationCell> cells;
  // decay of |gradient| over the t-ladder for each bounded f
  std::vector<std::pair<NamedFn, RateFit>> decay_fits;
  // stderr * sqrt(t-s) per cell, the short-horizon scaling diagnostic
  std::vector<double> scaled_stderr;
};

BelValidationResult run_bel_validation(const BelValidationConfig& cfg);

// Closed-form gradient of the frozen-law semigroup for the linear drift.
Vec linear_semigroup_gradient(const LinearDrift& model, const InitialSpec& mu, double s, double t,
                              NamedFn f, const Vec& x);

}  // namespace mvlab

#endif  // MVLAB_EXPERIMENTS_HPP
