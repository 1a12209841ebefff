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

#include "mvlab/cli.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mvlab/config.hpp"
#include "mvlab/errors.hpp"
#include "mvlab/manifest.hpp"

namespace mvlab::cli {

namespace {

using nlohmann::json;

struct Overrides {
  std::string config_path;
  std::string out_dir;
  std::string mode;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = -1;
};

struct RunContext {
  ExperimentConfig cfg;
  std::string config_hash;
  RunManifest manifest;
  json summary;
  std::vector<std::pair<std::string, bool>> criteria;

  bool all_pass() const {
    for (const auto& [name, ok] : criteria) {
      if (!ok) return false;
    }
    return true;
  }
  void criterion(const std::string& name, bool ok, double value) {
    criteria.emplace_back(name, ok);
    summary["criteria"].push_back({{"name", name}, {"pass", ok}, {"value", value}});
  }
};

std::ofstream open_csv(RunContext& ctx, const std::string& name,
                       const std::string& header) {
  namespace fs = std::filesystem;
  fs::create_directories(ctx.cfg.out_dir);
  const fs::path path = fs::path(ctx.cfg.out_dir) / name;
  std::ofstream out(path);
  if (!out) throw InputError("cannot open output file " + path.string());
  out << "# config_hash=" << ctx.config_hash << " seed=" << ctx.cfg.seed << "\n";
  out << header << "\n";
  ctx.manifest.outputs.push_back(path.string());
  return out;
}

json ratefit_to_json(const RateFit& fit) {
  return {{"estimate", fit.estimate},
          {"ci95", {fit.ci_lo, fit.ci_hi}},
          {"r2", fit.r2}};
}

bool in_band(double v, double lo, double hi) { return v >= lo && v <= hi; }

// --------------------------------------------------------------------------

int run_check_h(RunContext& ctx) {
  const SpectralReport report = spectral_scan(
      *ctx.cfg.model, ProbeBox::cube(ctx.cfg.model->dim(), ctx.cfg.scan_radius),
      ctx.cfg.scan_probes, ctx.cfg.seed);
  std::cout << "lambda0=" << report.lambda0 << " lambda1=" << report.lambda1
            << " b2_norm=" << report.b2_norm << " lambda12=" << report.lambda12
            << " lambda12_hat=" << report.lambda12_hat
            << " h_satisfied=" << (report.h_satisfied ? "true" : "false") << "\n";
  ctx.summary["spectral"] = {{"lambda0", report.lambda0},
                             {"lambda1", report.lambda1},
                             {"b2_norm", report.b2_norm},
                             {"lambda12", report.lambda12},
                             {"lambda12_hat", report.lambda12_hat},
                             {"h_satisfied", report.h_satisfied}};
  ctx.criterion("h_satisfied", report.h_satisfied, report.h_satisfied ? 1.0 : 0.0);
  return 0;
}

int run_simulate(RunContext& ctx) {
  auto out = open_csv(ctx, "snapshots.csv", [&] {
    std::ostringstream h;
    h << "t,replica,particle";
    for (int j = 0; j < ctx.cfg.model->dim(); ++j) h << ",x_" << j;
    return h.str();
  }());
  for (int r = 0; r < ctx.cfg.replicas; ++r) {
    SimOptions opts;
    opts.replica = static_cast<std::uint32_t>(r);
    opts.threads = resolve_threads(ctx.cfg.threads);
    const auto snaps =
        simulate_mean_field(*ctx.cfg.model, ctx.cfg.mu0, ctx.cfg.n, ctx.cfg.grid, ctx.cfg.seed, opts);
    for (const auto& ens : snaps)
      for (int i = 0; i < ens.n; ++i) {
        out << ens.t << "," << r << "," << i;
        for (int j = 0; j < ens.d; ++j) out << "," << ens.row(i)[j];
        out << "\n";
      }
  }
  return 0;
}

int run_contraction_cmd(RunContext& ctx) {
  ContractionConfig cc;
  cc.model = ctx.cfg.model;
  cc.mu0 = ctx.cfg.mu0;
  cc.mu1 = ctx.cfg.mu1;
  cc.grid = ctx.cfg.grid;
  cc.n = ctx.cfg.n;
  cc.mode = ctx.cfg.mode;
  cc.seed = ctx.cfg.seed;
  cc.threads = resolve_threads(ctx.cfg.threads);
  cc.scan_radius = ctx.cfg.scan_radius;
  cc.scan_probes = ctx.cfg.scan_probes;
  const ContractionResult res = run_contraction(cc);
  if (!res.spectral.h_satisfied)
    std::cerr << "warning: condition (H) not satisfied on the scanned box\n";

  auto out = open_csv(ctx, "contraction.csv", "t,w1,w2");
  for (const auto& row : res.rows) out << row.t << "," << row.w1 << "," << row.w2 << "\n";

  ctx.summary["lambda0"] = res.spectral.lambda0;
  ctx.summary["lambda12_hat"] = res.spectral.lambda12_hat;
  if (res.w2_fit) ctx.summary["w2_fit"] = ratefit_to_json(*res.w2_fit);
  if (res.w1_fit) ctx.summary["w1_fit"] = ratefit_to_json(*res.w1_fit);

  const json& tol = ctx.cfg.tolerances;
  if (tol.contains("w2_rate") && res.w2_fit) {
    const double target = tol.at("w2_rate").get<double>();
    const double band = tol.value("w2_rate_tol", 0.1);
    ctx.criterion("w2_rate", std::fabs(res.w2_fit->estimate - target) <= band,
                  res.w2_fit->estimate);
  }
  if (tol.contains("w1_rate") && res.w1_fit) {
    const double target = tol.at("w1_rate").get<double>();
    const double band = tol.value("w1_rate_tol", 0.1);
    ctx.criterion("w1_rate", std::fabs(res.w1_fit->estimate - target) <= band,
                  res.w1_fit->estimate);
  }
  return 0;
}

int run_chaos_cmd(RunContext& ctx) {
  ChaosConfig cc;
  cc.model = ctx.cfg.model;
  cc.mu0 = ctx.cfg.mu0;
  cc.t = ctx.cfg.grid.t_end;
  cc.dt = ctx.cfg.grid.dt;
  cc.n_ladder = ctx.cfg.n_ladder;
  cc.replicas = ctx.cfg.replicas;
  cc.fs = ctx.cfg.fs;
  cc.seed = ctx.cfg.seed;
  cc.threads = resolve_threads(ctx.cfg.threads);
  cc.flat_horizon = ctx.cfg.flat_horizon;
  const ChaosResult res = run_chaos(cc);

  auto out = open_csv(ctx, "chaos.csv", "n,f,bias,bias_stderr,l2err,replicas");
  for (const auto& fr : res.per_fn)
    for (const auto& cell : fr.cells)
      out << cell.n << "," << named_fn_label(fr.f) << "," << cell.bias << ","
          << cell.bias_stderr << "," << cell.l2err << "," << cc.replicas << "\n";

  const json& tol = ctx.cfg.tolerances;
  for (size_t fi = 0; fi < res.per_fn.size(); ++fi) {
    const auto& fr = res.per_fn[fi];
    const std::string label = named_fn_label(fr.f);
    json jf;
    if (fr.bias_slope) jf["bias_slope"] = ratefit_to_json(*fr.bias_slope);
    if (fr.l2_slope) jf["l2_slope"] = ratefit_to_json(*fr.l2_slope);
    jf["l2_level"] = fr.l2_level;
    if (fi < res.flatness.size()) jf["flatness"] = res.flatness[fi];
    ctx.summary["per_fn"][label] = jf;

    if (tol.contains("l2_slope_min") && fr.l2_slope)
      ctx.criterion("l2_slope(" + label + ")",
                    in_band(fr.l2_slope->estimate, tol.at("l2_slope_min").get<double>(),
                            tol.at("l2_slope_max").get<double>()),
                    fr.l2_slope->estimate);
    if (tol.contains("bias_slope_min") && fr.bias_slope)
      ctx.criterion("bias_slope(" + label + ")",
                    in_band(fr.bias_slope->estimate, tol.at("bias_slope_min").get<double>(),
                            tol.at("bias_slope_max").get<double>()),
                    fr.bias_slope->estimate);
    if (tol.contains("flatness_max") && fi < res.flatness.size())
      ctx.criterion("flatness(" + label + ")",
                    res.flatness[fi] <= tol.at("flatness_max").get<double>(), res.flatness[fi]);
  }
  return 0;
}

int run_taylor_cmd(RunContext& ctx) {
  TaylorConfig tc;
  tc.model = ctx.cfg.model;
  tc.mu0 = ctx.cfg.mu0;
  tc.y = ctx.cfg.y;
  tc.s = ctx.cfg.grid.s;
  tc.t = ctx.cfg.grid.t_end;
  tc.eps_ladder = ctx.cfg.eps_ladder;
  tc.fs = ctx.cfg.fs;
  tc.seed = ctx.cfg.seed;
  tc.threads = resolve_threads(ctx.cfg.threads);
  if (ctx.cfg.normalized.contains("flow_x") && !ctx.cfg.normalized.at("flow_x").is_null())
    tc.flow_x = ctx.cfg.x;
  const TaylorResult res = run_taylor(tc);

  auto out = open_csv(ctx, "taylor.csv", "f,eps,r1,r2");
  for (const auto& fr : res.per_fn)
    for (size_t i = 0; i < fr.eps.size(); ++i)
      out << named_fn_label(fr.f) << "," << fr.eps[i] << "," << fr.r1[i] << "," << fr.r2[i]
          << "\n";

  const json& tol = ctx.cfg.tolerances;
  for (const auto& fr : res.per_fn) {
    const std::string label = named_fn_label(fr.f);
    json jf;
    jf["r1_degenerate"] = fr.r1_degenerate;
    jf["r2_degenerate"] = fr.r2_degenerate;
    if (fr.r1_slope) jf["r1_slope"] = ratefit_to_json(*fr.r1_slope);
    if (fr.r2_slope) jf["r2_slope"] = ratefit_to_json(*fr.r2_slope);
    ctx.summary["per_fn"][label] = jf;
    if (tol.contains("r1_slope") && fr.r1_slope)
      ctx.criterion("r1_slope(" + label + ")",
                    std::fabs(fr.r1_slope->estimate - tol.at("r1_slope").get<double>()) <=
                        tol.value("r1_tol", 0.1),
                    fr.r1_slope->estimate);
    if (tol.contains("r2_slope") && fr.r2_slope)
      ctx.criterion("r2_slope(" + label + ")",
                    std::fabs(fr.r2_slope->estimate - tol.at("r2_slope").get<double>()) <=
                        tol.value("r2_tol", 0.15),
                    fr.r2_slope->estimate);
  }
  if (!res.flow_eps.empty()) {
    auto fout = open_csv(ctx, "taylor_flow.csv", "eps,flow_r");
    for (size_t i = 0; i < res.flow_eps.size(); ++i)
      fout << res.flow_eps[i] << "," << res.flow_r[i] << "\n";
    ctx.summary["flow_degenerate"] = res.flow_degenerate;
    if (res.flow_slope) ctx.summary["flow_slope"] = ratefit_to_json(*res.flow_slope);
    if (tol.contains("flow_slope") && res.flow_slope)
      ctx.criterion("flow_slope",
                    std::fabs(res.flow_slope->estimate - tol.at("flow_slope").get<double>()) <=
                        tol.value("flow_tol", 0.15),
                    res.flow_slope->estimate);
  }
  return 0;
}

int run_bel_cmd(RunContext& ctx) {
  BelValidationConfig bc;
  bc.model = ctx.cfg.model;
  bc.mu = ctx.cfg.mu0;
  bc.x = ctx.cfg.x;
  bc.fs = ctx.cfg.fs;
  bc.t_ladder = ctx.cfg.t_ladder;
  bc.m = ctx.cfg.bel_m;
  bc.weight_eps = ctx.cfg.bel_weight_eps;
  bc.dt = ctx.cfg.grid.dt;
  bc.seed = ctx.cfg.seed;
  bc.threads = resolve_threads(ctx.cfg.threads);
  const BelValidationResult res = run_bel_validation(bc);

  auto out = open_csv(ctx, "bel.csv", "f,t,estimate,stderr,oracle,oracle_stderr,agree");
  int agree_count = 0;
  for (const auto& cell : res.cells) {
    out << named_fn_label(cell.f) << "," << cell.t << "," << cell.estimate << ","
        << cell.std_error << "," << cell.oracle << "," << cell.oracle_stderr << ","
        << (cell.agree ? 1 : 0) << "\n";
    agree_count += cell.agree ? 1 : 0;
  }
  ctx.summary["agree_count"] = agree_count;
  ctx.summary["cells"] = static_cast<int>(res.cells.size());
  for (const auto& [f, fit] : res.decay_fits)
    ctx.summary["decay"][named_fn_label(f)] = ratefit_to_json(fit);

  const json& tol = ctx.cfg.tolerances;
  if (tol.contains("min_agree"))
    ctx.criterion("agreement", agree_count >= tol.at("min_agree").get<int>(),
                  static_cast<double>(agree_count));
  return 0;
}

}  // namespace

int dispatch(int argc, const char* const* argv) {
  CLI::App app{"simulation and sensitivity toolkit for mean-field diffusions"};
  app.require_subcommand(1);

  Overrides ov;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", ov.config_path, "JSON config path")->required();
    sub->add_option("--out", ov.out_dir, "output directory override");
    sub->add_option("--seed", ov.seed, "seed override")->each([&](const std::string&) {
      ov.seed_set = true;
    });
    sub->add_option("--threads", ov.threads, "worker thread count");
    sub->add_option("--mode", ov.mode, "law mode: auto|exact|particle");
  };

  static const std::vector<std::string> subs = {"check-h",      "simulate", "contraction",
                                                "chaos",        "taylor",   "bel-validate"};
  for (const auto& name : subs) add_common(app.add_subcommand(name));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const std::string sub = app.get_subcommands().front()->get_name();

  std::ifstream in(ov.config_path, std::ios::binary);
  if (!in) {
    std::cerr << "error: cannot open config file " << ov.config_path << "\n";
    return 2;
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string raw = ss.str();

  json doc;
  try {
    doc = json::parse(raw);
  } catch (const std::exception& e) {
    std::cerr << "error: invalid JSON in " << ov.config_path << ": " << e.what() << "\n";
    return 2;
  }

  doc["experiment"] = sub;
  if (ov.seed_set) doc["seed"] = ov.seed;
  if (!ov.out_dir.empty()) doc["out"] = ov.out_dir;
  if (!ov.mode.empty()) doc["mode"] = ov.mode;
  if (ov.threads >= 0) doc["threads"] = ov.threads;

  RunContext ctx;
  try {
    ctx.cfg = validate_config(doc);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  ctx.config_hash = hash_hex(fnv1a64(raw));
  ctx.manifest.config_hash = ctx.config_hash;
  ctx.manifest.seed = ctx.cfg.seed;
  ctx.manifest.started_at = now_iso8601();
  ctx.summary["experiment"] = sub;
  ctx.summary["config_hash"] = ctx.config_hash;
  ctx.summary["seed"] = ctx.cfg.seed;
  ctx.summary["criteria"] = json::array();

  int rc = 0;
  try {
    if (sub == "check-h") rc = run_check_h(ctx);
    else if (sub == "simulate") rc = run_simulate(ctx);
    else if (sub == "contraction") rc = run_contraction_cmd(ctx);
    else if (sub == "chaos") rc = run_chaos_cmd(ctx);
    else if (sub == "taylor") rc = run_taylor_cmd(ctx);
    else if (sub == "bel-validate") rc = run_bel_cmd(ctx);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  ctx.summary["pass"] = ctx.all_pass();
  {
    namespace fs = std::filesystem;
    fs::create_directories(ctx.cfg.out_dir);
    const fs::path path = fs::path(ctx.cfg.out_dir) / "summary.json";
    std::ofstream sout(path);
    sout << ctx.summary.dump(2) << "\n";
    ctx.manifest.outputs.push_back(path.string());
  }
  ctx.manifest.finished_at = now_iso8601();
  write_manifest(ctx.cfg.out_dir, ctx.manifest);

  if (rc != 0) return rc;
  return ctx.all_pass() ? 0 : 1;
}

}  // namespace mvlab::cli
