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

#ifndef MVLAB_CONFIG_HPP
#define MVLAB_CONFIG_HPP

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvlab/experiments.hpp"
#include "mvlab/sde.hpp"
#include "mvlab/testfn.hpp"

namespace mvlab {

// Normalized experiment configuration. `normalized` holds the canonical JSON
// document with all defaults filled in; re-validating its serialization
// reproduces identical bytes.
struct ExperimentConfig {
  nlohmann::json normalized;
  std::string experiment;  // check-h | simulate | contraction | chaos | taylor | bel-validate
  ModelPtr model;
  InitialSpec mu0, mu1;
  TimeGrid grid;
  int n = 0;
  std::vector<int> n_ladder;
  int replicas = 8;
  int m_proxy = 0;
  std::uint64_t seed = 1;
  std::vector<NamedFn> fs;
  LawMode mode = LawMode::kAuto;
  std::string out_dir = ".";
  int threads = 0;  // 0 = resolve from environment

  // experiment-specific knobs
  std::vector<double> eps_ladder;
  std::vector<double> t_ladder;
  Vec y, x;
  long bel_m = 100000;
  double bel_weight_eps = 0.5;
  double scan_radius = 3.0;
  int scan_probes = 64;
  double flat_horizon = 0.0;
  nlohmann::json tolerances;  // pass/fail bands, echoed verbatim
};

// Fills defaults and enforces the structural invariants; a violation throws
// InputError naming every offending field.
ExperimentConfig validate_config(const nlohmann::json& doc);

// Canonical bytes of a normalized config (sorted keys, two-space indent).
std::string canonical_config_bytes(const nlohmann::json& normalized);

}  // namespace mvlab

#endif  // MVLAB_CONFIG_HPP
