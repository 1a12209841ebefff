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

#include "mvlab/config.hpp"

#include <algorithm>

#include "mvlab/errors.hpp"

namespace mvlab {

using nlohmann::json;

namespace {

Vec vec_from(const json& j) {
  if (j.is_number()) return Vec::Constant(1, j.get<double>());
  Vec v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v[static_cast<int>(i)] = j[i].get<double>();
  return v;
}

json vec_to(const Vec& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

const std::vector<std::string> kExperiments = {"check-h",  "simulate", "contraction",
                                               "chaos",    "taylor",   "bel-validate"};

// Experiments whose pass/fail logic rests on standard errors; these require
// at least 8 replicas.
bool stderr_based(const std::string& experiment) {
  return experiment == "chaos" || experiment == "bel-validate";
}

}  // namespace

std::string canonical_config_bytes(const json& normalized) {
  return normalized.dump(2) + "\n";
}

ExperimentConfig validate_config(const json& doc) {
  if (!doc.is_object()) throw InputError("config: document must be a JSON object");
  std::vector<std::string> violations;
  json norm = json::object();
  ExperimentConfig cfg;

  // experiment
  cfg.experiment = doc.value("experiment", std::string());
  if (std::find(kExperiments.begin(), kExperiments.end(), cfg.experiment) == kExperiments.end())
    violations.push_back("experiment: must be one of check-h|simulate|contraction|chaos|taylor|bel-validate");
  norm["experiment"] = cfg.experiment;

  // model
  if (!doc.contains("model")) {
    violations.push_back("model: missing");
  } else {
    try {
      cfg.model = load_model(doc.at("model"));
      norm["model"] = doc.at("model");
    } catch (const std::exception& e) {
      violations.push_back(std::string("model: ") + e.what());
    }
  }
  const int dim = cfg.model ? cfg.model->dim() : 1;

  // initial measures
  const auto load_measure = [&](const char* key, const InitialSpec& fallback) {
    if (!doc.contains(key)) {
      norm[key] = fallback.to_json();
      return fallback;
    }
    try {
      InitialSpec spec = InitialSpec::from_json(doc.at(key));
      if (spec.dim() != dim) violations.push_back(std::string(key) + ": dimension mismatch");
      norm[key] = spec.to_json();
      return spec;
    } catch (const std::exception& e) {
      violations.push_back(std::string(key) + ": " + e.what());
      return fallback;
    }
  };
  cfg.mu0 = load_measure("mu0", InitialSpec::dirac(Vec::Zero(dim)));
  cfg.mu1 = load_measure("mu1", InitialSpec::dirac(Vec::Ones(dim)));

  // grid
  cfg.grid.s = doc.value("s", 0.0);
  cfg.grid.t_end = doc.value("t_end", 1.0);
  cfg.grid.dt = doc.value("dt", 1e-3);
  if (doc.contains("checkpoints")) {
    for (const auto& c : doc.at("checkpoints")) cfg.grid.checkpoints.push_back(c.get<double>());
  } else {
    cfg.grid.checkpoints = {cfg.grid.t_end};
  }
  try {
    cfg.grid.validate();
  } catch (const std::exception& e) {
    violations.push_back(std::string("grid: ") + e.what());
  }
  norm["s"] = cfg.grid.s;
  norm["t_end"] = cfg.grid.t_end;
  norm["dt"] = cfg.grid.dt;
  norm["checkpoints"] = cfg.grid.checkpoints;

  // sizes and ladders
  cfg.n = doc.value("n", 10000);
  if (cfg.n < 1) violations.push_back("n: must be >= 1");
  norm["n"] = cfg.n;
  if (doc.contains("n_ladder")) {
    for (const auto& v : doc.at("n_ladder")) cfg.n_ladder.push_back(v.get<int>());
    for (size_t i = 0; i + 1 < cfg.n_ladder.size(); ++i)
      if (cfg.n_ladder[i + 1] <= cfg.n_ladder[i]) {
        violations.push_back("n_ladder: must be strictly increasing");
        break;
      }
  } else if (cfg.experiment == "chaos") {
    cfg.n_ladder = {50, 100, 200, 400, 800};
  }
  norm["n_ladder"] = cfg.n_ladder;

  cfg.replicas = doc.value("replicas", 8);
  if (cfg.replicas < 1) violations.push_back("replicas: must be >= 1");
  if (stderr_based(cfg.experiment) && cfg.replicas < 8)
    violations.push_back("replicas: stderr-based experiments need replicas >= 8");
  norm["replicas"] = cfg.replicas;

  const int max_n =
      cfg.n_ladder.empty() ? cfg.n : *std::max_element(cfg.n_ladder.begin(), cfg.n_ladder.end());
  cfg.m_proxy = doc.value("m_proxy", 16 * max_n);
  if (cfg.m_proxy < 1) violations.push_back("m_proxy: must be >= 1");
  norm["m_proxy"] = cfg.m_proxy;

  cfg.seed = doc.value("seed", static_cast<std::uint64_t>(1));
  norm["seed"] = cfg.seed;
  cfg.threads = doc.value("threads", 0);
  norm["threads"] = cfg.threads;

  // test functions
  if (doc.contains("test_functions")) {
    for (const auto& name : doc.at("test_functions")) {
      try {
        cfg.fs.push_back(parse_named_fn(name.get<std::string>()));
      } catch (const std::exception& e) {
        violations.push_back(std::string("test_functions: ") + e.what());
      }
    }
  } else {
    cfg.fs = {NamedFn::kId, NamedFn::kSquare};
  }
  {
    json names = json::array();
    for (NamedFn f : cfg.fs) names.push_back(named_fn_label(f));
    norm["test_functions"] = names;
  }

  const std::string mode = doc.value("mode", std::string("auto"));
  if (mode == "auto") cfg.mode = LawMode::kAuto;
  else if (mode == "exact") cfg.mode = LawMode::kExact;
  else if (mode == "particle") cfg.mode = LawMode::kParticle;
  else violations.push_back("mode: must be auto|exact|particle");
  norm["mode"] = mode;

  cfg.out_dir = doc.value("out", std::string("."));
  norm["out"] = cfg.out_dir;

  // experiment-specific
  if (doc.contains("eps_ladder")) {
    for (const auto& v : doc.at("eps_ladder")) cfg.eps_ladder.push_back(v.get<double>());
  } else {
    cfg.eps_ladder = {0.4, 0.2, 0.1, 0.05};
  }
  norm["eps_ladder"] = cfg.eps_ladder;

  if (doc.contains("t_ladder")) {
    for (const auto& v : doc.at("t_ladder")) cfg.t_ladder.push_back(v.get<double>());
  } else {
    cfg.t_ladder = {0.25, 0.5, 1.0, 2.0};
  }
  norm["t_ladder"] = cfg.t_ladder;

  cfg.y = doc.contains("y") ? vec_from(doc.at("y")) : Vec::Ones(dim);
  cfg.x = doc.contains("x") ? vec_from(doc.at("x")) : Vec::Zero(dim);
  if (cfg.y.size() != dim) violations.push_back("y: dimension mismatch");
  if (cfg.x.size() != dim) violations.push_back("x: dimension mismatch");
  norm["y"] = vec_to(cfg.y);
  norm["x"] = vec_to(cfg.x);

  cfg.bel_m = doc.value("bel_m", static_cast<long>(100000));
  if (cfg.bel_m < 2) violations.push_back("bel_m: must be >= 2");
  norm["bel_m"] = cfg.bel_m;
  cfg.bel_weight_eps = doc.value("bel_weight_eps", 0.5);
  if (!(cfg.bel_weight_eps > 0.0 && cfg.bel_weight_eps < 1.0))
    violations.push_back("bel_weight_eps: must lie in (0,1)");
  norm["bel_weight_eps"] = cfg.bel_weight_eps;

  cfg.scan_radius = doc.value("scan_radius", 3.0);
  if (!(cfg.scan_radius > 0.0)) violations.push_back("scan_radius: must be positive");
  norm["scan_radius"] = cfg.scan_radius;
  cfg.scan_probes = doc.value("scan_probes", 64);
  if (cfg.scan_probes < 1) violations.push_back("scan_probes: must be >= 1");
  norm["scan_probes"] = cfg.scan_probes;

  cfg.flat_horizon = doc.value("flat_horizon", 0.0);
  norm["flat_horizon"] = cfg.flat_horizon;

  cfg.tolerances = doc.contains("tolerances") ? doc.at("tolerances") : json::object();
  norm["tolerances"] = cfg.tolerances;

  if (!violations.empty()) {
    std::string msg = "config rejected:";
    for (const auto& v : violations) msg += "\n  - " + v;
    throw InputError(msg);
  }
  cfg.normalized = std::move(norm);
  return cfg;
}

}  // namespace mvlab
