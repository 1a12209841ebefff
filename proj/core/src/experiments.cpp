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

#include "mvlab/experiments.hpp"

#include <algorithm>
#include <cmath>

#include "mvlab/errors.hpp"
#include "mvlab/linear_flow.hpp"
#include "mvlab/wasserstein.hpp"

namespace mvlab {

namespace {

constexpr double kDegenerateFloor = 1e-12;

std::optional<RateFit> try_exponential_fit(const std::vector<std::pair<double, double>>& pts) {
  std::vector<std::pair<double, double>> usable;
  for (const auto& p : pts)
    if (p.second > kDegenerateFloor) usable.push_back(p);
  if (usable.size() < 3) return std::nullopt;
  return fit_exponential_rate(usable);
}

std::optional<RateFit> try_loglog_fit(const std::vector<std::pair<double, double>>& pts) {
  for (const auto& p : pts)
    if (!(p.second > kDegenerateFloor)) return std::nullopt;
  if (pts.size() < 3) return std::nullopt;
  return fit_loglog_slope(pts);
}

}  // namespace

// ---------------------------------------------------------------------------
// Contraction

ContractionResult run_contraction(const ContractionConfig& cfg) {
  cfg.grid.validate();
  if (cfg.grid.checkpoints.empty())
    throw InputError("run_contraction: grid needs checkpoints");
  const int d = cfg.model->dim();

  ContractionResult result;
  result.spectral =
      spectral_scan(*cfg.model, ProbeBox::cube(d, cfg.scan_radius), cfg.scan_probes, cfg.seed);

  const auto lin = std::dynamic_pointer_cast<const LinearDrift>(cfg.model);
  const bool exact = cfg.mode != LawMode::kParticle && lin != nullptr;
  if (cfg.mode == LawMode::kExact && !lin)
    throw CapabilityError("run_contraction: exact mode requires a linear drift");

  if (exact) {
    const Vec gap0 = cfg.mu1.mean_of() - cfg.mu0.mean_of();
    for (double c : cfg.grid.checkpoints) {
      const Mat theta = expm((c - cfg.grid.s) * (lin->B1() + lin->B2()));
      const double w = (theta * gap0).norm();
      result.rows.push_back({c, w, w});
    }
  } else {
    StreamKey init_key{split_seed(cfg.seed, seed_domain::kInit), 0, 0, 0};
    ParticleEnsemble e0 = sample_initial(cfg.mu0, cfg.n, d, init_key);
    ParticleEnsemble e1 = sample_initial(cfg.mu1, cfg.n, d, init_key);
    e0.t = e1.t = cfg.grid.s;

    std::vector<int> snap_steps;
    for (double c : cfg.grid.checkpoints) snap_steps.push_back(cfg.grid.step_of(c));
    size_t next = 0;
    const int steps = cfg.grid.n_steps();
    EmOptions opts;
    opts.threads = cfg.threads;
    for (int k = 0; k <= steps; ++k) {
      while (next < snap_steps.size() && snap_steps[next] == k) {
        const EmpiricalMeasure m0 = e0.to_measure();
        const EmpiricalMeasure m1 = e1.to_measure();
        double w1, w2;
        if (d == 1) {
          w1 = wasserstein_1d(1, m0, m1);
          w2 = wasserstein_1d(2, m0, m1);
        } else if (cfg.n <= kExactAssignmentCap) {
          w1 = wasserstein_exact(m0, m1, 1);
          w2 = wasserstein_exact(m0, m1, 2);
        } else {
          StreamKey pk{cfg.seed, 0, 0, static_cast<std::uint32_t>(k)};
          w1 = sliced_wasserstein(m0, m1, 1, 64, pk);
          w2 = sliced_wasserstein(m0, m1, 2, 64, pk);
        }
        result.rows.push_back({cfg.grid.time_at(k), w1, w2});
        ++next;
      }
      if (k == steps) break;
      StreamKey key{split_seed(cfg.seed, seed_domain::kStep), 0, 0, static_cast<std::uint32_t>(k)};
      e0 = em_step(e0, *cfg.model, cfg.grid.dt, key, opts);
      e1 = em_step(e1, *cfg.model, cfg.grid.dt, key, opts);
    }
  }

  std::vector<std::pair<double, double>> w1_pts, w2_pts;
  for (const auto& row : result.rows) {
    w1_pts.emplace_back(row.t, row.w1);
    w2_pts.emplace_back(row.t, row.w2);
  }
  result.w1_fit = try_exponential_fit(w1_pts);
  result.w2_fit = try_exponential_fit(w2_pts);
  return result;
}

// ---------------------------------------------------------------------------
// Propagation of chaos

namespace {

// Discrete-flow coefficients of an affine model: X_T = A x0 + C mu_mean + G.
// Matching the Euler recursion of the particle system keeps the coupled
// reference unbiased at finite dt.
struct AffineReference {
  std::vector<Vec> means;  // per step
  Mat a, c, cov;           // at each requested horizon, filled by build()
};

struct AffineCoefficients {
  Mat a, c, cov;
};

class AffineReferenceBuilder {
 public:
  AffineReferenceBuilder(const DriftModel& model, const InitialSpec& mu0, double dt)
      : model_(model), dt_(dt), d_(model.dim()) {
    jac_ = model.b1(0.0, Vec::Zero(d_), Vec::Zero(d_)).transpose();
    gm_ = model.b2(0.0, Vec::Zero(d_), Vec::Zero(d_)).transpose();
    prop_ = Mat::Identity(d_, d_) + dt * jac_;
    mean_ = mu0.mean_of();
    mean_prop_ = Mat::Identity(d_, d_) + dt * (jac_ + gm_);
    a_ = Mat::Identity(d_, d_);
    c_ = Mat::Zero(d_, d_);
    m_coef_ = Mat::Identity(d_, d_);
    cov_ = Mat::Zero(d_, d_);
  }

  const Vec& mean() const { return mean_; }
  AffineCoefficients coefficients() const { return {a_, c_, cov_}; }

  void step() {
    c_ = prop_ * c_ + dt_ * gm_ * m_coef_;
    a_ = prop_ * a_;
    cov_ = prop_ * cov_ * prop_.transpose() + dt_ * Mat::Identity(d_, d_);
    m_coef_ = mean_prop_ * m_coef_;
    mean_ = mean_prop_ * mean_;
  }

 private:
  const DriftModel& model_;
  double dt_;
  int d_;
  Mat jac_, gm_, prop_, mean_prop_;
  Vec mean_;
  Mat a_, c_, m_coef_, cov_;
};

double affine_reference_value(const AffineCoefficients& coef, const InitialSpec& mu0, NamedFn f) {
  const Vec mu_mean = mu0.mean_of();
  const Vec shift = coef.c * mu_mean;
  switch (f) {
    case NamedFn::kId:
      return (coef.a * mu_mean + shift)[0];
    case NamedFn::kSquare: {
      Mat s0 = Mat::Zero(mu_mean.size(), mu_mean.size());
      switch (mu0.kind) {
        case InitialSpec::Kind::kDirac: s0 = mu0.point * mu0.point.transpose(); break;
        case InitialSpec::Kind::kGaussian: s0 = mu0.cov + mu0.mean * mu0.mean.transpose(); break;
        case InitialSpec::Kind::kTwoPoint:
          s0 = mu0.p_a * mu0.a * mu0.a.transpose() + (1.0 - mu0.p_a) * mu0.b * mu0.b.transpose();
          break;
        case InitialSpec::Kind::kUniform: {
          const Vec m = 0.5 * (mu0.lo + mu0.hi);
          s0 = m * m.transpose();
          for (int i = 0; i < m.size(); ++i) {
            const double w = mu0.hi[i] - mu0.lo[i];
            s0(i, i) += w * w / 12.0;
          }
          break;
        }
      }
      return (coef.a.transpose() * coef.a * s0).trace() + 2.0 * shift.dot(coef.a * mu_mean) +
             shift.squaredNorm() + coef.cov.trace();
    }
    default:
      throw CapabilityError("chaos reference: closed form needs f in {id, square}");
  }
}

}  // namespace

ChaosResult run_chaos(const ChaosConfig& cfg) {
  if (cfg.n_ladder.empty()) throw InputError("run_chaos: empty N-ladder");
  for (size_t i = 1; i < cfg.n_ladder.size(); ++i)
    if (cfg.n_ladder[i] <= cfg.n_ladder[i - 1])
      throw InputError("run_chaos: N-ladder must be strictly increasing");
  if (!(cfg.t > 0.0)) throw InputError("run_chaos: horizon must be positive");
  if (!cfg.model->constant_first_derivatives())
    throw CapabilityError(
        "run_chaos: requires an affine drift (linear or quadratic Langevin); "
        "the coupled reference needs exact discrete moments");

  const int d = cfg.model->dim();
  std::vector<double> horizons{cfg.t};
  if (cfg.flat_horizon > 0.0) horizons.push_back(cfg.flat_horizon);
  const double max_t = *std::max_element(horizons.begin(), horizons.end());
  const int total_steps = static_cast<int>(std::llround(max_t / cfg.dt));
  std::vector<int> horizon_steps;
  for (double h : horizons)
    horizon_steps.push_back(static_cast<int>(std::llround(h / cfg.dt)));

  // Reference means per step plus flow coefficients at each horizon.
  AffineReferenceBuilder builder(*cfg.model, cfg.mu0, cfg.dt);
  std::vector<Vec> ref_means;
  ref_means.reserve(static_cast<size_t>(total_steps) + 1);
  std::vector<AffineCoefficients> horizon_coefs(horizons.size());
  for (int k = 0; k <= total_steps; ++k) {
    ref_means.push_back(builder.mean());
    for (size_t h = 0; h < horizons.size(); ++h)
      if (horizon_steps[h] == k) horizon_coefs[h] = builder.coefficients();
    if (k < total_steps) builder.step();
  }

  const size_t n_f = cfg.fs.size();
  const size_t n_h = horizons.size();
  ChaosResult result;
  result.per_fn.resize(n_f);

  std::vector<std::vector<std::vector<double>>> levels(
      n_f, std::vector<std::vector<double>>(n_h));  // geometric-mean inputs

  for (int n : cfg.n_ladder) {
    // slots[replica][f * n_h + h] for value and coupled difference
    const size_t width = n_f * n_h;
    std::vector<double> value_slots(static_cast<size_t>(cfg.replicas) * width);
    std::vector<double> diff_slots(static_cast<size_t>(cfg.replicas) * width);

    parallel_for(cfg.replicas, cfg.threads, [&](int r) {
      const auto rep = static_cast<std::uint32_t>(r);
      StreamKey init_key{split_seed(cfg.seed, seed_domain::kInit), rep, 0, 0};
      ParticleEnsemble inter = sample_initial(cfg.mu0, n, d, init_key);
      ParticleEnsemble coupled = inter;  // same initial draws

      std::vector<double> drift(static_cast<size_t>(d));
      for (int k = 0; k < total_steps; ++k) {
        for (size_t h = 0; h < horizons.size(); ++h) {
          if (horizon_steps[h] != k) continue;
          for (size_t fi = 0; fi < n_f; ++fi) {
            double acc_i = 0.0, acc_c = 0.0;
            for (int i = 0; i < n; ++i) {
              acc_i += eval_fn(cfg.fs[fi], inter.point(i));
              acc_c += eval_fn(cfg.fs[fi], coupled.point(i));
            }
            value_slots[static_cast<size_t>(r) * width + fi * n_h + h] = acc_i / n;
            diff_slots[static_cast<size_t>(r) * width + fi * n_h + h] = (acc_i - acc_c) / n;
          }
        }
        StreamKey key{split_seed(cfg.seed, seed_domain::kStep), rep, 0,
                      static_cast<std::uint32_t>(k)};
        // Interacting system and its synchronously coupled independent copy
        // share every Brownian increment.
        ParticleEnsemble next = em_step(inter, *cfg.model, cfg.dt, key);
        const Vec& ref_mean = ref_means[static_cast<size_t>(k)];
        const double sqdt = std::sqrt(cfg.dt);
        for (int i = 0; i < n; ++i) {
          cfg.model->eval_drift_mean(coupled.t, coupled.row(i), ref_mean.data(), drift.data());
          StreamKey pk = key;
          pk.particle = static_cast<std::uint32_t>(i);
          NoiseStream ns(pk);
          double* dst = coupled.row(i);
          for (int j = 0; j < d; ++j) dst[j] += drift[static_cast<size_t>(j)] * cfg.dt + sqdt * ns.gaussian();
        }
        coupled.t += cfg.dt;
        inter = std::move(next);
      }
      // horizons landing exactly on the final step
      for (size_t h = 0; h < horizons.size(); ++h) {
        if (horizon_steps[h] != total_steps) continue;
        for (size_t fi = 0; fi < n_f; ++fi) {
          double acc_i = 0.0, acc_c = 0.0;
          for (int i = 0; i < n; ++i) {
            acc_i += eval_fn(cfg.fs[fi], inter.point(i));
            acc_c += eval_fn(cfg.fs[fi], coupled.point(i));
          }
          value_slots[static_cast<size_t>(r) * width + fi * n_h + h] = acc_i / n;
          diff_slots[static_cast<size_t>(r) * width + fi * n_h + h] = (acc_i - acc_c) / n;
        }
      }
    });

    for (size_t fi = 0; fi < n_f; ++fi) {
      for (size_t h = 0; h < n_h; ++h) {
        const double ref = affine_reference_value(horizon_coefs[h], cfg.mu0, cfg.fs[fi]);
        double bias_acc = 0.0, bias_sq = 0.0, l2_acc = 0.0;
        for (int r = 0; r < cfg.replicas; ++r) {
          const double b = diff_slots[static_cast<size_t>(r) * width + fi * n_h + h];
          const double dev = value_slots[static_cast<size_t>(r) * width + fi * n_h + h] - ref;
          bias_acc += b;
          bias_sq += b * b;
          l2_acc += dev * dev;
        }
        const double bias_mean = bias_acc / cfg.replicas;
        const double bias_var =
            (bias_sq - cfg.replicas * bias_mean * bias_mean) / (cfg.replicas - 1.0);
        const double l2 = std::sqrt(l2_acc / cfg.replicas);
        if (h == 0) {
          ChaosCell cell;
          cell.n = n;
          cell.bias = std::fabs(bias_mean);
          cell.bias_stderr = std::sqrt(std::max(0.0, bias_var) / cfg.replicas);
          cell.l2err = l2;
          result.per_fn[fi].cells.push_back(cell);
        }
        levels[fi][h].push_back(l2);
      }
    }
  }

  for (size_t fi = 0; fi < n_f; ++fi) {
    auto& fr = result.per_fn[fi];
    fr.f = cfg.fs[fi];
    std::vector<std::pair<double, double>> bias_pts, l2_pts;
    for (const auto& cell : fr.cells) {
      bias_pts.emplace_back(cell.n, cell.bias);
      l2_pts.emplace_back(cell.n, cell.l2err);
    }
    fr.bias_slope = try_loglog_fit(bias_pts);
    fr.l2_slope = try_loglog_fit(l2_pts);
    double acc = 0.0;
    for (double v : levels[fi][0]) acc += std::log(std::max(v, kDegenerateFloor));
    fr.l2_level = std::exp(acc / levels[fi][0].size());
    if (n_h > 1) {
      double acc2 = 0.0;
      for (double v : levels[fi][1]) acc2 += std::log(std::max(v, kDegenerateFloor));
      const double level2 = std::exp(acc2 / levels[fi][1].size());
      result.flatness.push_back(std::fabs(level2 - fr.l2_level) / fr.l2_level);
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Taylor remainders

double linear_mixture_value(const LinearDrift& model, const InitialSpec& mu, const Vec& y,
                            double eps, NamedFn f, double s, double t) {
  const double tau = t - s;
  const Mat a = expm(tau * model.B1());
  const Mat theta = expm(tau * (model.B1() + model.B2()));
  const Mat delta = theta - a;
  const Mat cov = integrate_exp_sandwich(model.B1(), Mat::Identity(model.dim(), model.dim()),
                                         model.B1().transpose(), tau);
  const Vec mu_mean = mu.mean_of();
  const Vec mix_mean = (1.0 - eps) * mu_mean + eps * y;
  switch (f) {
    case NamedFn::kId:
      return (theta * mix_mean)[0];
    case NamedFn::kSquare: {
      Mat s0 = Mat::Zero(model.dim(), model.dim());
      {
        // second moment of the mixture
        Mat base;
        switch (mu.kind) {
          case InitialSpec::Kind::kDirac: base = mu.point * mu.point.transpose(); break;
          case InitialSpec::Kind::kGaussian: base = mu.cov + mu.mean * mu.mean.transpose(); break;
          case InitialSpec::Kind::kTwoPoint:
            base = mu.p_a * mu.a * mu.a.transpose() + (1.0 - mu.p_a) * mu.b * mu.b.transpose();
            break;
          case InitialSpec::Kind::kUniform: {
            const Vec m = 0.5 * (mu.lo + mu.hi);
            base = m * m.transpose();
            for (int i = 0; i < m.size(); ++i) {
              const double w = mu.hi[i] - mu.lo[i];
              base(i, i) += w * w / 12.0;
            }
            break;
          }
        }
        s0 = (1.0 - eps) * base + eps * y * y.transpose();
      }
      const Vec dm = delta * mix_mean;
      return (a.transpose() * a * s0).trace() + 2.0 * dm.dot(a * mix_mean) + dm.squaredNorm() +
             cov.trace();
    }
    case NamedFn::kCos: {
      if (model.dim() != 1) throw CapabilityError("linear_mixture_value: cos requires d = 1");
      const double av = a(0, 0), phase = delta(0, 0) * mix_mean[0], v = cov(0, 0);
      double trig = 0.0;
      switch (mu.kind) {
        case InitialSpec::Kind::kDirac: trig = std::cos(av * mu.point[0] + phase); break;
        case InitialSpec::Kind::kTwoPoint:
          trig = mu.p_a * std::cos(av * mu.a[0] + phase) +
                 (1.0 - mu.p_a) * std::cos(av * mu.b[0] + phase);
          break;
        case InitialSpec::Kind::kGaussian:
          trig = std::exp(-0.5 * av * av * mu.cov(0, 0)) * std::cos(av * mu.mean[0] + phase);
          break;
        case InitialSpec::Kind::kUniform: {
          const double lo = av * mu.lo[0] + phase, hi = av * mu.hi[0] + phase;
          trig = std::fabs(hi - lo) < 1e-14 ? std::cos(lo) : (std::sin(hi) - std::sin(lo)) / (hi - lo);
          break;
        }
      }
      return std::exp(-0.5 * v) *
             ((1.0 - eps) * trig + eps * std::cos(av * y[0] + phase));
    }
    case NamedFn::kSigmoid:
      throw CapabilityError("linear_mixture_value: sigmoid has no closed form");
  }
  throw InputError("linear_mixture_value: unknown function");
}

namespace {

// Final state of the flow from x driven by the weighted mixture law
// (1-eps) mu + eps delta_y, everything under common noise across eps.
Vec weighted_law_flow_final(const ModelPtr& model, const InitialSpec& mu, const Vec& y,
                            double eps, const Vec& x, const TimeGrid& grid, std::uint64_t seed,
                            int m_cloud) {
  const int d = model->dim();
  StreamKey init_key{split_seed(seed, seed_domain::kInit), 0, 0, 0};
  ParticleEnsemble cloud = sample_initial(mu, m_cloud, d, init_key);
  const int n = m_cloud + 1;
  cloud.n = n;
  cloud.positions.resize(static_cast<size_t>(n) * d);
  for (int j = 0; j < d; ++j) cloud.positions[static_cast<size_t>(m_cloud) * d + j] = y[j];
  std::vector<double> weights(static_cast<size_t>(n), (1.0 - eps) / m_cloud);
  weights[static_cast<size_t>(m_cloud)] = eps;

  Vec state = x;
  Vec drift(d);
  const int steps = grid.n_steps();
  const double sqdt = std::sqrt(grid.dt);
  const std::uint64_t x_seed = split_seed(seed, seed_domain::kSample);
  for (int k = 0; k < steps; ++k) {
    model->mean_field_drift(grid.time_at(k), state.data(), cloud.positions, weights, drift.data());
    NoiseStream ns(StreamKey{x_seed, 0, 0, static_cast<std::uint32_t>(k)});
    for (int j = 0; j < d; ++j) state[j] += drift[j] * grid.dt + sqdt * ns.gaussian();
    StreamKey key{split_seed(seed, seed_domain::kStep), 0, 0, static_cast<std::uint32_t>(k)};
    cloud = em_step_weighted(cloud, weights, *model, grid.dt, key);
  }
  return state;
}

}  // namespace

TaylorResult run_taylor(const TaylorConfig& cfg) {
  if (cfg.eps_ladder.size() < 2) throw InputError("run_taylor: epsilon ladder too short");
  const auto lin = std::dynamic_pointer_cast<const LinearDrift>(cfg.model);
  if (!lin)
    throw CapabilityError("run_taylor: closed-form remainder tables require a linear drift");

  TaylorResult result;
  const DerivParams params;
  for (NamedFn f : cfg.fs) {
    TaylorFnResult fr;
    fr.f = f;
    const double base = linear_mixture_value(*lin, cfg.mu0, cfg.y, 0.0, f, cfg.s, cfg.t);
    const DerivativeEstimate d1 = first_order_derivative(
        cfg.model, cfg.mu0, cfg.s, cfg.t, f, cfg.y, FirstOrderRoute::kClosedForm, params, cfg.seed);
    const DerivativeEstimate d2 =
        second_order_derivative(cfg.model, cfg.mu0, cfg.s, cfg.t, f, cfg.y, cfg.y,
                                SecondOrderRoute::kClosedForm, params, cfg.seed);
    const double scale = std::max(1.0, std::fabs(base));
    for (double eps : cfg.eps_ladder) {
      const double value = linear_mixture_value(*lin, cfg.mu0, cfg.y, eps, f, cfg.s, cfg.t);
      const double r1 = std::fabs(value - base - eps * d1.value[0]);
      const double r2 = std::fabs(value - base - eps * d1.value[0] -
                                  0.5 * eps * eps * d2.value[0]);
      fr.eps.push_back(eps);
      fr.r1.push_back(r1);
      fr.r2.push_back(r2);
    }
    const double max_r1 = *std::max_element(fr.r1.begin(), fr.r1.end());
    const double max_r2 = *std::max_element(fr.r2.begin(), fr.r2.end());
    fr.r1_degenerate = max_r1 <= 1e-10 * scale;
    fr.r2_degenerate = max_r2 <= 1e-10 * scale;
    std::vector<std::pair<double, double>> p1, p2;
    for (size_t i = 0; i < fr.eps.size(); ++i) {
      p1.emplace_back(fr.eps[i], fr.r1[i]);
      p2.emplace_back(fr.eps[i], fr.r2[i]);
    }
    if (!fr.r1_degenerate) fr.r1_slope = try_loglog_fit(p1);
    if (!fr.r2_degenerate) fr.r2_slope = try_loglog_fit(p2);
    result.per_fn.push_back(std::move(fr));
  }

  if (cfg.flow_x) {
    TimeGrid grid{cfg.s, cfg.t, cfg.flow_dt, {}};
    const double eps0 = *std::min_element(cfg.eps_ladder.begin(), cfg.eps_ladder.end()) / 8.0;
    const auto flow_at = [&](double eps) {
      return weighted_law_flow_final(cfg.model, cfg.mu0, cfg.y, eps, *cfg.flow_x, grid, cfg.seed,
                                     cfg.flow_cloud);
    };
    const Vec base = flow_at(0.0);
    const Vec tangent = (flow_at(eps0) - flow_at(-eps0)) / (2.0 * eps0);
    double max_r = 0.0;
    for (double eps : cfg.eps_ladder) {
      const double r = (flow_at(eps) - base - eps * tangent).norm();
      result.flow_eps.push_back(eps);
      result.flow_r.push_back(r);
      max_r = std::max(max_r, r);
    }
    result.flow_degenerate = max_r <= 1e-10 * std::max(1.0, base.norm());
    if (!result.flow_degenerate) {
      std::vector<std::pair<double, double>> pts;
      for (size_t i = 0; i < result.flow_eps.size(); ++i)
        pts.emplace_back(result.flow_eps[i], result.flow_r[i]);
      result.flow_slope = try_loglog_fit(pts);
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// BEL validation

Vec linear_semigroup_gradient(const LinearDrift& model, const InitialSpec& mu, double s, double t,
                              NamedFn f, const Vec& x) {
  const double tau = t - s;
  const int d = model.dim();
  const Mat a = expm(tau * model.B1());
  const Mat theta = expm(tau * (model.B1() + model.B2()));
  const Mat cov =
      integrate_exp_sandwich(model.B1(), Mat::Identity(d, d), model.B1().transpose(), tau);
  const Vec mu_mean = mu.mean_of();
  const Vec mean = a * (x - mu_mean) + theta * mu_mean;
  switch (f) {
    case NamedFn::kId:
      return a.transpose().col(0);
    case NamedFn::kSquare:
      return 2.0 * a.transpose() * mean;
    case NamedFn::kCos: {
      if (d != 1) throw CapabilityError("linear_semigroup_gradient: cos requires d = 1");
      Vec g(1);
      g[0] = -a(0, 0) * std::exp(-0.5 * cov(0, 0)) * std::sin(mean[0]);
      return g;
    }
    case NamedFn::kSigmoid:
      throw CapabilityError("linear_semigroup_gradient: sigmoid has no closed form");
  }
  throw InputError("linear_semigroup_gradient: unknown function");
}

BelValidationResult run_bel_validation(const BelValidationConfig& cfg) {
  BelValidationResult result;
  const auto lin = std::dynamic_pointer_cast<const LinearDrift>(cfg.model);
  EstimatorOptions opts;
  opts.dt = cfg.dt;
  opts.threads = cfg.threads;

  std::vector<std::vector<std::pair<double, double>>> decay_pts(cfg.fs.size());
  for (size_t fi = 0; fi < cfg.fs.size(); ++fi) {
    const NamedFn f = cfg.fs[fi];
    const ScalarFn fn = [f](const Vec& v) { return eval_fn(f, v); };
    for (double t : cfg.t_ladder) {
      BelWeight weight;
      weight.epsilon = cfg.weight_eps;
      const DerivativeEstimate est =
          bel_gradient(cfg.model, cfg.mu, 0.0, t, cfg.x, fn, cfg.m, weight, cfg.seed, opts);

      double oracle, oracle_se;
      const bool closed = lin && f != NamedFn::kSigmoid;
      if (closed) {
        oracle = linear_semigroup_gradient(*lin, cfg.mu, 0.0, t, f, cfg.x)[0];
        oracle_se = 0.0;
      } else {
        const DerivativeEstimate fd = fd_semigroup_gradient(
            cfg.model, cfg.mu, 0.0, t, cfg.x, fn, cfg.oracle_bump, cfg.oracle_m,
            split_seed(cfg.seed, 55), opts);
        oracle = fd.value[0];
        oracle_se = fd.std_error[0];
      }

      BelValidationCell cell;
      cell.f = f;
      cell.t = t;
      cell.estimate = est.value[0];
      cell.std_error = est.std_error[0];
      cell.oracle = oracle;
      cell.oracle_stderr = oracle_se;
      const double combined = std::sqrt(cell.std_error * cell.std_error + oracle_se * oracle_se);
      cell.agree = std::fabs(cell.estimate - oracle) <= 3.0 * std::max(combined, 1e-14);
      result.cells.push_back(cell);
      result.scaled_stderr.push_back(cell.std_error * std::sqrt(t));
      decay_pts[fi].emplace_back(t, std::fabs(cell.estimate));
    }
    if (fn_is_bounded(f)) {
      const auto fit = try_exponential_fit(decay_pts[fi]);
      if (fit) result.decay_fits.emplace_back(f, *fit);
    }
  }
  return result;
}

}  // namespace mvlab
