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

#include "mvlab/measure_derivative.hpp"

#include <algorithm>
#include <cmath>

#include "mvlab/errors.hpp"
#include "mvlab/linear_flow.hpp"

namespace mvlab {

namespace {

// ---------------------------------------------------------------------------
// Closed forms, linear drift. The flow is x -> A x + Delta mu_mean + G with
// A = e^{tau B1}, Theta = e^{tau (B1+B2)}, Delta = Theta - A and G Gaussian, so
// eps-derivatives of phi(mu_eps)(f) are explicit in the mixture moments.

struct LinearContext {
  Mat a;       // e^{tau B1}
  Mat theta;   // e^{tau (B1+B2)}
  Mat delta;   // theta - a
  Mat cov;     // law covariance of the driving noise integral
  Vec mu_mean;
  Mat mu_second;  // integral of x x' d mu
};

Mat second_moment_of(const InitialSpec& mu) {
  switch (mu.kind) {
    case InitialSpec::Kind::kDirac:
      return mu.point * mu.point.transpose();
    case InitialSpec::Kind::kGaussian:
      return mu.cov + mu.mean * mu.mean.transpose();
    case InitialSpec::Kind::kTwoPoint:
      return mu.p_a * mu.a * mu.a.transpose() + (1.0 - mu.p_a) * mu.b * mu.b.transpose();
    case InitialSpec::Kind::kUniform: {
      const Vec m = 0.5 * (mu.lo + mu.hi);
      Mat s = m * m.transpose();
      for (int i = 0; i < m.size(); ++i) {
        const double w = mu.hi[i] - mu.lo[i];
        s(i, i) += w * w / 12.0;
      }
      return s;
    }
  }
  throw InputError("second_moment_of: unknown initial spec");
}

LinearContext make_linear_context(const LinearDrift& model, const InitialSpec& mu, double s,
                                  double t) {
  if (t < s) throw InputError("closed form: t must be >= s");
  const double tau = t - s;
  LinearContext ctx;
  ctx.a = expm(tau * model.B1());
  ctx.theta = expm(tau * (model.B1() + model.B2()));
  ctx.delta = ctx.theta - ctx.a;
  ctx.cov = integrate_exp_sandwich(model.B1(), Mat::Identity(model.dim(), model.dim()),
                                   model.B1().transpose(), tau);
  ctx.mu_mean = mu.mean_of();
  ctx.mu_second = second_moment_of(mu);
  return ctx;
}

// E[cos(a x + phase)] and E[sin(a x + phase)] under a one-dimensional mu.
struct TrigMoments {
  double c = 0.0;
  double sn = 0.0;
};

TrigMoments trig_under_mu(const InitialSpec& mu, double a, double phase) {
  TrigMoments out;
  switch (mu.kind) {
    case InitialSpec::Kind::kDirac:
      out.c = std::cos(a * mu.point[0] + phase);
      out.sn = std::sin(a * mu.point[0] + phase);
      return out;
    case InitialSpec::Kind::kTwoPoint:
      out.c = mu.p_a * std::cos(a * mu.a[0] + phase) +
              (1.0 - mu.p_a) * std::cos(a * mu.b[0] + phase);
      out.sn = mu.p_a * std::sin(a * mu.a[0] + phase) +
               (1.0 - mu.p_a) * std::sin(a * mu.b[0] + phase);
      return out;
    case InitialSpec::Kind::kGaussian: {
      const double amp = std::exp(-0.5 * a * a * mu.cov(0, 0));
      out.c = amp * std::cos(a * mu.mean[0] + phase);
      out.sn = amp * std::sin(a * mu.mean[0] + phase);
      return out;
    }
    case InitialSpec::Kind::kUniform: {
      const double lo = a * mu.lo[0] + phase, hi = a * mu.hi[0] + phase;
      const double width = hi - lo;
      if (std::fabs(width) < 1e-14) {
        out.c = std::cos(lo);
        out.sn = std::sin(lo);
      } else {
        out.c = (std::sin(hi) - std::sin(lo)) / width;
        out.sn = (std::cos(lo) - std::cos(hi)) / width;
      }
      return out;
    }
  }
  throw InputError("trig_under_mu: unknown initial spec");
}

DerivativeEstimate closed_form_first(const LinearDrift& model, const InitialSpec& mu, double s,
                                     double t, NamedFn f, const Vec& y) {
  const LinearContext ctx = make_linear_context(model, mu, s, t);
  const Vec w = y - ctx.mu_mean;
  DerivativeEstimate est;
  est.route = "closed_form";
  switch (f) {
    case NamedFn::kId:
      est.value = ctx.theta * w;
      break;
    case NamedFn::kSquare: {
      const Mat ata = ctx.a.transpose() * ctx.a;
      const double v = (ata * (y * y.transpose() - ctx.mu_second)).trace() +
                       2.0 * w.dot(ctx.delta.transpose() * ctx.a * ctx.mu_mean) +
                       2.0 * w.dot(ctx.a.transpose() * ctx.delta * ctx.mu_mean) +
                       2.0 * w.dot(ctx.delta.transpose() * ctx.delta * ctx.mu_mean);
      est.value = Vec::Constant(1, v);
      break;
    }
    case NamedFn::kCos: {
      if (model.dim() != 1) throw CapabilityError("closed form: cos requires d = 1");
      const double a = ctx.a(0, 0), delta = ctx.delta(0, 0), varg = ctx.cov(0, 0);
      const double phase = delta * ctx.mu_mean[0];
      const TrigMoments tm = trig_under_mu(mu, a, phase);
      const double cy = std::cos(a * y[0] + phase);
      const double v = std::exp(-0.5 * varg) * (cy - tm.c - delta * w[0] * tm.sn);
      est.value = Vec::Constant(1, v);
      break;
    }
    case NamedFn::kSigmoid:
      throw CapabilityError("closed form: sigmoid has no closed form");
  }
  est.std_error = Vec::Zero(est.value.size());
  return est;
}

DerivativeEstimate closed_form_second(const LinearDrift& model, const InitialSpec& mu, double s,
                                      double t, NamedFn f, const Vec& y, const Vec& z) {
  const LinearContext ctx = make_linear_context(model, mu, s, t);
  const Vec wy = y - ctx.mu_mean;
  const Vec wz = z - ctx.mu_mean;
  DerivativeEstimate est;
  est.route = "closed_form";
  switch (f) {
    case NamedFn::kId:
      est.value = Vec::Zero(model.dim());
      break;
    case NamedFn::kSquare: {
      const Mat m = ctx.a.transpose() * ctx.delta + ctx.delta.transpose() * ctx.a +
                    ctx.delta.transpose() * ctx.delta;
      est.value = Vec::Constant(1, 2.0 * wy.dot(m * wz));
      break;
    }
    case NamedFn::kCos: {
      if (model.dim() != 1) throw CapabilityError("closed form: cos requires d = 1");
      const double a = ctx.a(0, 0), delta = ctx.delta(0, 0), varg = ctx.cov(0, 0);
      const double phase = delta * ctx.mu_mean[0];
      const TrigMoments tm = trig_under_mu(mu, a, phase);
      const double sy = std::sin(a * y[0] + phase);
      const double sz = std::sin(a * z[0] + phase);
      const double v = std::exp(-0.5 * varg) *
                       (delta * wz[0] * (tm.sn - sy) + delta * wy[0] * (tm.sn - sz) -
                        tm.c * delta * delta * wy[0] * wz[0]);
      est.value = Vec::Constant(1, v);
      break;
    }
    case NamedFn::kSigmoid:
      throw CapabilityError("closed form: sigmoid has no closed form");
  }
  est.std_error = Vec::Zero(est.value.size());
  return est;
}

// ---------------------------------------------------------------------------
// Semigroup-quadrature route.

// Proxy law stored per step: means always, full clouds only when derivative
// averages genuinely need the measure.
struct LawReplay {
  const DriftModel* model = nullptr;
  TimeGrid grid;
  bool mean_only = true;
  int cloud_m = 0;
  int b1_atoms = 128;
  std::vector<Vec> means;                   // n_steps + 1
  std::vector<std::vector<double>> clouds;  // per step when !mean_only
  std::vector<double> node_atoms;           // J x K x d samples at node steps

  void drift(int step, const double* x, double* out) const {
    if (mean_only) {
      model->eval_drift_mean(grid.time_at(step), x, means[static_cast<size_t>(step)].data(), out);
    } else {
      model->mean_field_drift(grid.time_at(step), x, clouds[static_cast<size_t>(step)], {}, out);
    }
  }
  Mat b1(int step, const Vec& x) const {
    if (mean_only) return model->b1(grid.time_at(step), x, means[static_cast<size_t>(step)]);
    const auto& cloud = clouds[static_cast<size_t>(step)];
    const int d = model->dim();
    const int m = std::min(cloud_m, b1_atoms);
    return model->b1_mean(grid.time_at(step), x,
                          std::span<const double>(cloud.data(), static_cast<size_t>(m) * d), {});
  }
};

LawReplay build_law_replay(const ModelPtr& model, const InitialSpec& mu, const TimeGrid& grid,
                           const DerivParams& params, std::uint64_t seed,
                           const std::vector<int>& node_steps) {
  LawReplay replay;
  replay.model = model.get();
  replay.grid = grid;
  replay.mean_only = model->has_mean_closure() && model->interaction_curvature_constant();
  replay.cloud_m = std::max(params.m_proxy, params.law_atoms);
  replay.b1_atoms = params.b1_atoms;
  const int d = model->dim();
  const int steps = grid.n_steps();
  const int k_atoms = params.law_atoms;
  replay.node_atoms.resize(node_steps.size() * static_cast<size_t>(k_atoms) * d);

  StreamKey init_key{split_seed(seed, seed_domain::kProxy), 0, 0, 0};
  ParticleEnsemble cloud = sample_initial(mu, replay.cloud_m, d, init_key);
  cloud.t = grid.s;
  replay.means.reserve(static_cast<size_t>(steps) + 1);
  if (!replay.mean_only) replay.clouds.reserve(static_cast<size_t>(steps) + 1);

  size_t next_node = 0;
  for (int k = 0; k <= steps; ++k) {
    replay.means.push_back(cloud.mean());
    if (!replay.mean_only) replay.clouds.push_back(cloud.positions);
    while (next_node < node_steps.size() && node_steps[next_node] == k) {
      double* dst = replay.node_atoms.data() + next_node * static_cast<size_t>(k_atoms) * d;
      std::copy(cloud.positions.begin(), cloud.positions.begin() + static_cast<size_t>(k_atoms) * d,
                dst);
      ++next_node;
    }
    if (k == steps) break;
    StreamKey key{split_seed(seed, seed_domain::kProxy), 1, 0, static_cast<std::uint32_t>(k)};
    cloud = em_step(cloud, *model, grid.dt, key);
  }
  return replay;
}

// One batch of the kernel-expansion estimate of D(f) at each evaluation
// point, sharing the transport pieces across points.
std::vector<double> semigroup_batch(const ModelPtr& model, const InitialSpec& mu, double s,
                                    double t, NamedFn f, const std::vector<Vec>& eval_points,
                                    const DerivParams& params, std::uint64_t seed) {
  const int d = model->dim();
  TimeGrid grid{s, t, params.dt, {}};
  const int steps = grid.n_steps();
  const int J = std::max(2, params.nodes);
  const int K = params.law_atoms;
  const int R = params.mc_paths;
  const int E = static_cast<int>(eval_points.size());

  std::vector<int> node_steps(static_cast<size_t>(J));
  std::vector<double> node_times(static_cast<size_t>(J));
  for (int j = 0; j < J; ++j) {
    node_steps[static_cast<size_t>(j)] =
        static_cast<int>(std::llround(static_cast<double>(j) * steps / (J - 1)));
    node_times[static_cast<size_t>(j)] = grid.time_at(node_steps[static_cast<size_t>(j)]);
  }
  const double h = (t - s) / (J - 1);

  const LawReplay law = build_law_replay(model, mu, grid, params, seed, node_steps);
  const auto y_atom = [&](int j, int k) -> Vec {
    return Eigen::Map<const Vec>(
        law.node_atoms.data() + (static_cast<size_t>(j) * K + k) * d, d);
  };

  const bool const_coeffs = model->constant_first_derivatives();
  const Mat b1_const = const_coeffs ? model->b1(s, eval_points[0], eval_points[0]) : Mat();
  const Mat prop_const =
      const_coeffs ? Mat(Mat::Identity(d, d) + grid.dt * b1_const) : Mat();
  const Mat b2_const = const_coeffs ? model->b2(s, eval_points[0], eval_points[0]) : Mat();

  // Inner simulations: for every (node j0, atom k, path r), a driven path
  // from the atom to the horizon with its tangent, snapshotted at later nodes.
  const size_t n_sims = static_cast<size_t>(J) * K * R;
  const size_t snap_stride = static_cast<size_t>(J) * (d + d * d);
  std::vector<double> snaps(n_sims * snap_stride, 0.0);
  std::vector<double> phat(static_cast<size_t>(J) * K * d, 0.0);

  const std::uint64_t sim_seed = split_seed(seed, 101);
  for (int j0 = 0; j0 < J; ++j0) {
    const int start_step = node_steps[static_cast<size_t>(j0)];
    for (int k = 0; k < K; ++k) {
      Vec phat_acc = Vec::Zero(d);
      for (int r = 0; r < R; ++r) {
        const size_t sim = (static_cast<size_t>(j0) * K + k) * R + r;
        Vec x = y_atom(j0, k);
        Mat jac = Mat::Identity(d, d);
        int node_cursor = j0;
        Vec drift(d);
        for (int step = start_step; step <= steps; ++step) {
          while (node_cursor < J && node_steps[static_cast<size_t>(node_cursor)] == step) {
            double* dst = snaps.data() + sim * snap_stride +
                          static_cast<size_t>(node_cursor) * (d + d * d);
            for (int i = 0; i < d; ++i) dst[i] = x[i];
            for (int a = 0; a < d; ++a)
              for (int b = 0; b < d; ++b) dst[d + a * d + b] = jac(a, b);
            ++node_cursor;
          }
          if (step == steps) break;
          if (const_coeffs) {
            jac = jac * prop_const;
          } else {
            jac = jac * (Mat::Identity(d, d) + grid.dt * law.b1(step, x));
          }
          law.drift(step, x.data(), drift.data());
          NoiseStream ns(StreamKey{sim_seed, static_cast<std::uint32_t>(sim), 0,
                                   static_cast<std::uint32_t>(step)});
          const double sqdt = std::sqrt(grid.dt);
          for (int i = 0; i < d; ++i) x[i] += drift[i] * grid.dt + sqdt * ns.gaussian();
        }
        phat_acc += jac * eval_fn_gradient(f, x);
      }
      for (int i = 0; i < d; ++i)
        phat[(static_cast<size_t>(j0) * K + k) * d + i] = phat_acc[i] / R;
    }
  }

  const auto snap_state = [&](size_t sim, int j) -> Vec {
    const double* src = snaps.data() + sim * snap_stride + static_cast<size_t>(j) * (d + d * d);
    return Eigen::Map<const Vec>(src, d);
  };
  const auto snap_jac = [&](size_t sim, int j) -> Mat {
    const double* src =
        snaps.data() + sim * snap_stride + static_cast<size_t>(j) * (d + d * d) + d;
    Mat jac(d, d);
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) jac(a, b) = src[a * d + b];
    return jac;
  };

  // Transport matrices between nodes: average of tangent times b2. With
  // constant coefficients the average tangent suffices.
  std::vector<Mat> bmat(static_cast<size_t>(J) * J * K);
  for (int v = 0; v < J; ++v)
    for (int k = 0; k < K; ++k)
      for (int j = v; j < J; ++j) {
        Mat acc = Mat::Zero(d, d);
        for (int r = 0; r < R; ++r) {
          const size_t sim = (static_cast<size_t>(v) * K + k) * R + r;
          if (const_coeffs) {
            acc += snap_jac(sim, j);
          } else {
            acc += snap_jac(sim, j) /* times per-target b2 below */;
          }
        }
        acc /= R;
        bmat[(static_cast<size_t>(v) * J + j) * K + k] = const_coeffs ? Mat(acc * b2_const) : acc;
      }

  // Driven paths from the evaluation points, with shared noise keys.
  const std::uint64_t x_seed = split_seed(seed, 102);
  std::vector<double> x_states(static_cast<size_t>(E) * params.x_paths * J * d);
  std::vector<double> p_term(static_cast<size_t>(E), 0.0);
  for (int e = 0; e < E; ++e) {
    double facc = 0.0;
    for (int r = 0; r < params.x_paths; ++r) {
      Vec x = eval_points[static_cast<size_t>(e)];
      int node_cursor = 0;
      Vec drift(d);
      for (int step = 0; step <= steps; ++step) {
        while (node_cursor < J && node_steps[static_cast<size_t>(node_cursor)] == step) {
          double* dst = x_states.data() +
                        ((static_cast<size_t>(e) * params.x_paths + r) * J + node_cursor) * d;
          for (int i = 0; i < d; ++i) dst[i] = x[i];
          ++node_cursor;
        }
        if (step == steps) break;
        law.drift(step, x.data(), drift.data());
        NoiseStream ns(StreamKey{x_seed, static_cast<std::uint32_t>(r), 0,
                                 static_cast<std::uint32_t>(step)});
        const double sqdt = std::sqrt(grid.dt);
        for (int i = 0; i < d; ++i) x[i] += drift[i] * grid.dt + sqdt * ns.gaussian();
      }
      facc += eval_fn(f, x);
    }
    p_term[static_cast<size_t>(e)] = facc / params.x_paths;
  }

  // Kernel recursion and the outer integral, per evaluation point.
  std::vector<double> values(static_cast<size_t>(E), 0.0);
  for (int e = 0; e < E; ++e) {
    // b-averages against the e-th path set.
    std::vector<Vec> b0(static_cast<size_t>(J) * K, Vec::Zero(d));
    std::vector<double> tmp(static_cast<size_t>(d));
    for (int j = 0; j < J; ++j)
      for (int k = 0; k < K; ++k) {
        const Vec yk = y_atom(j, k);
        Vec acc = Vec::Zero(d);
        for (int r = 0; r < params.x_paths; ++r) {
          const double* xr =
              x_states.data() + ((static_cast<size_t>(e) * params.x_paths + r) * J + j) * d;
          model->eval_b(node_times[static_cast<size_t>(j)], yk.data(), xr, tmp.data());
          for (int i = 0; i < d; ++i) acc[i] += tmp[static_cast<size_t>(i)];
        }
        b0[static_cast<size_t>(j) * K + k] = acc / params.x_paths;
      }

    std::vector<Vec> p_prev = b0;
    std::vector<Vec> p_cur = b0;
    for (int depth = 1; depth <= params.chamber_depth; ++depth) {
      for (int j = 0; j < J; ++j) {
        for (int k = 0; k < K; ++k) {
          Vec acc = b0[static_cast<size_t>(j) * K + k];
          for (int v = 0; v <= j; ++v) {
            const double wv = (v == 0 || v == j) ? 0.5 * h : h;
            if (j == 0) break;
            Vec inner = Vec::Zero(d);
            for (int kp = 0; kp < K; ++kp) {
              const Mat& bm = bmat[(static_cast<size_t>(v) * J + j) * K + kp];
              if (const_coeffs) {
                inner += bm.transpose() * p_prev[static_cast<size_t>(v) * K + kp];
              } else {
                // Average of tangent was stored; apply the per-target b2.
                Mat acc_b = Mat::Zero(d, d);
                for (int r = 0; r < R; ++r) {
                  const size_t sim = (static_cast<size_t>(v) * K + kp) * R + r;
                  acc_b += snap_jac(sim, j) *
                           model->b2(node_times[static_cast<size_t>(j)], y_atom(j, k),
                                     snap_state(sim, j));
                }
                acc_b /= R;
                inner += acc_b.transpose() * p_prev[static_cast<size_t>(v) * K + kp];
              }
            }
            acc += wv * inner / K;
          }
          p_cur[static_cast<size_t>(j) * K + k] = acc;
        }
      }
      if (depth < params.chamber_depth) p_prev = p_cur;
    }

    double q = 0.0;
    for (int j = 0; j < J; ++j) {
      const double wj = (j == 0 || j == J - 1) ? 0.5 * h : h;
      double inner = 0.0;
      for (int k = 0; k < K; ++k)
        inner += p_cur[static_cast<size_t>(j) * K + k].dot(
            Eigen::Map<const Vec>(phat.data() + (static_cast<size_t>(j) * K + k) * d, d));
      q += wj * inner / K;
    }
    values[static_cast<size_t>(e)] = p_term[static_cast<size_t>(e)] + q;
  }
  return values;
}

// Atoms representing mu for the centering average.
std::vector<std::pair<double, Vec>> centering_atoms(const InitialSpec& mu, int n_samples,
                                                    std::uint64_t seed) {
  std::vector<std::pair<double, Vec>> out;
  switch (mu.kind) {
    case InitialSpec::Kind::kDirac:
      out.emplace_back(1.0, mu.point);
      return out;
    case InitialSpec::Kind::kTwoPoint:
      out.emplace_back(mu.p_a, mu.a);
      out.emplace_back(1.0 - mu.p_a, mu.b);
      return out;
    default: {
      const int d = mu.dim();
      StreamKey key{split_seed(seed, 103), 0, 0, 0};
      ParticleEnsemble ens = sample_initial(mu, n_samples, d, key);
      for (int i = 0; i < ens.n; ++i) out.emplace_back(1.0 / n_samples, ens.point(i));
      return out;
    }
  }
}

DerivativeEstimate semigroup_route(const ModelPtr& model, const InitialSpec& mu, double s,
                                   double t, NamedFn f, const Vec& y, const DerivParams& params,
                                   std::uint64_t seed) {
  std::vector<Vec> eval_points{y};
  const auto centers = centering_atoms(mu, params.center_atoms, seed);
  for (const auto& [w, a] : centers) eval_points.push_back(a);

  const int B = std::max(2, params.batches);
  std::vector<double> batch_vals(static_cast<size_t>(B), 0.0);
  parallel_for(B, params.threads, [&](int b) {
    DerivParams p = params;
    p.threads = 1;
    const auto vals =
        semigroup_batch(model, mu, s, t, f, eval_points, p, split_seed(seed, 7000 + b));
    double centered = vals[0];
    for (size_t i = 0; i < centers.size(); ++i) centered -= centers[i].first * vals[i + 1];
    batch_vals[static_cast<size_t>(b)] = centered;
  });

  DerivativeEstimate est;
  est.route = "semigroup_quadrature";
  est.samples = B;
  const double mean = pairwise_sum(batch_vals) / B;
  double ss = 0.0;
  for (double v : batch_vals) ss += (v - mean) * (v - mean);
  est.value = Vec::Constant(1, mean);
  est.std_error = Vec::Constant(1, std::sqrt(ss / (B - 1.0) / B));
  est.meta["nodes"] = params.nodes;
  est.meta["law_atoms"] = params.law_atoms;
  est.meta["mc_paths"] = params.mc_paths;
  est.meta["chamber_depth"] = params.chamber_depth;
  return est;
}

}  // namespace

// ---------------------------------------------------------------------------
// Weighted-cloud functional and the measure-FD routes.

double weighted_flow_functional(const ModelPtr& model, const InitialSpec& mu,
                                const std::vector<Vec>& extra_atoms,
                                const std::vector<double>& extra_weights, double base_weight,
                                NamedFn f, const TimeGrid& grid, std::uint64_t seed,
                                std::uint32_t replica, int m_cloud, int threads) {
  if (extra_atoms.size() != extra_weights.size())
    throw InputError("weighted_flow_functional: atom/weight count mismatch");
  grid.validate();
  const int d = model->dim();
  const int n = m_cloud + static_cast<int>(extra_atoms.size());

  StreamKey init_key{split_seed(seed, seed_domain::kInit), replica, 0, 0};
  ParticleEnsemble ens = sample_initial(mu, m_cloud, d, init_key);
  ens.t = grid.s;
  ens.n = n;
  ens.positions.resize(static_cast<size_t>(n) * d);
  for (size_t i = 0; i < extra_atoms.size(); ++i)
    for (int j = 0; j < d; ++j)
      ens.positions[(static_cast<size_t>(m_cloud) + i) * d + j] = extra_atoms[i][j];

  std::vector<double> weights(static_cast<size_t>(n), base_weight / m_cloud);
  for (size_t i = 0; i < extra_weights.size(); ++i)
    weights[static_cast<size_t>(m_cloud) + i] = extra_weights[i];

  EmOptions opts;
  opts.threads = threads;
  const int steps = grid.n_steps();
  for (int k = 0; k < steps; ++k) {
    StreamKey key{split_seed(seed, seed_domain::kStep), replica, 0, static_cast<std::uint32_t>(k)};
    ens = em_step_weighted(ens, weights, *model, grid.dt, key, opts);
  }

  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += weights[static_cast<size_t>(i)] * eval_fn(f, ens.point(i));
  return acc;
}

namespace {

DerivativeEstimate measure_fd_first(const ModelPtr& model, const InitialSpec& mu, double s,
                                    double t, NamedFn f, const Vec& y, const DerivParams& params,
                                    std::uint64_t seed) {
  const double eps = params.fd_eps;
  TimeGrid grid{s, t, params.dt, {}};
  const int reps = std::max(2, params.fd_replicas);
  std::vector<double> vals(static_cast<size_t>(reps));
  parallel_for(reps, params.threads, [&](int r) {
    const auto rep = static_cast<std::uint32_t>(r);
    const double plus = weighted_flow_functional(model, mu, {y}, {eps}, 1.0 - eps, f, grid, seed,
                                                 rep, params.fd_cloud);
    const double minus = weighted_flow_functional(model, mu, {y}, {-eps}, 1.0 + eps, f, grid, seed,
                                                  rep, params.fd_cloud);
    vals[static_cast<size_t>(r)] = (plus - minus) / (2.0 * eps);
  });
  DerivativeEstimate est;
  est.route = "measure_fd";
  est.samples = reps;
  const double mean = pairwise_sum(vals) / reps;
  double ss = 0.0;
  for (double v : vals) ss += (v - mean) * (v - mean);
  est.value = Vec::Constant(1, mean);
  est.std_error = Vec::Constant(1, std::sqrt(ss / (reps - 1.0) / reps));
  est.meta["eps"] = eps;
  est.meta["cloud"] = params.fd_cloud;
  return est;
}

DerivativeEstimate measure_fd_second(const ModelPtr& model, const InitialSpec& mu, double s,
                                     double t, NamedFn f, const Vec& y, const Vec& z,
                                     const DerivParams& params, std::uint64_t seed) {
  const double eps = params.fd_eps2;
  TimeGrid grid{s, t, params.dt, {}};
  const int reps = std::max(2, params.fd_replicas);
  std::vector<double> vals(static_cast<size_t>(reps));
  parallel_for(reps, params.threads, [&](int r) {
    const auto rep = static_cast<std::uint32_t>(r);
    const auto g = [&](double e1, double e2) {
      return weighted_flow_functional(model, mu, {y, z}, {e1, e2}, 1.0 - e1 - e2, f, grid, seed,
                                      rep, params.fd_cloud);
    };
    vals[static_cast<size_t>(r)] =
        (g(eps, eps) - g(eps, -eps) - g(-eps, eps) + g(-eps, -eps)) / (4.0 * eps * eps);
  });
  DerivativeEstimate est;
  est.route = "double_measure_fd";
  est.samples = reps;
  const double mean = pairwise_sum(vals) / reps;
  double ss = 0.0;
  for (double v : vals) ss += (v - mean) * (v - mean);
  est.value = Vec::Constant(1, mean);
  est.std_error = Vec::Constant(1, std::sqrt(ss / (reps - 1.0) / reps));
  est.meta["eps"] = eps;
  return est;
}

// Tensor-square composition for the second derivative, linear drift: the
// cross terms of the two-point coupling integrated over the inner time.
DerivativeEstimate quadrature_second(const LinearDrift& model, const InitialSpec& mu, double s,
                                     double t, NamedFn f, const Vec& y, const Vec& z) {
  DerivativeEstimate est;
  est.route = "quadrature";
  if (f == NamedFn::kId) {
    est.value = Vec::Zero(model.dim());
    est.std_error = Vec::Zero(model.dim());
    return est;
  }
  if (f != NamedFn::kSquare)
    throw CapabilityError("quadrature second-order route supports f in {id, square}");
  const Vec mu_mean = mu.mean_of();
  const Vec wy = y - mu_mean;
  const Vec wz = z - mu_mean;
  const Mat theta = model.B1() + model.B2();
  const Quadrature q = gauss_legendre(64, s, t);
  double acc = 0.0;
  for (size_t i = 0; i < q.nodes.size(); ++i) {
    const double u = q.nodes[i];
    const Vec vy = expm((u - s) * theta) * wy;
    const Vec vz = expm((u - s) * theta) * wz;
    const Mat eb = expm((t - u) * model.B1());
    const Mat gu = 2.0 * eb.transpose() * eb;
    const Mat m = model.B2().transpose() * gu;
    acc += q.weights[i] * (vz.dot(m * vy) + vy.dot(m * vz));
  }
  est.value = Vec::Constant(1, acc);
  est.std_error = Vec::Zero(1);
  return est;
}

}  // namespace

DerivativeEstimate first_order_derivative(const ModelPtr& model, const InitialSpec& mu, double s,
                                          double t, NamedFn f, const Vec& y,
                                          FirstOrderRoute route, const DerivParams& params,
                                          std::uint64_t seed) {
  if (t < s) throw InputError("first_order_derivative: t must be >= s");
  switch (route) {
    case FirstOrderRoute::kClosedForm: {
      const auto lin = std::dynamic_pointer_cast<const LinearDrift>(model);
      if (!lin) throw CapabilityError("closed_form route requires a linear drift");
      return closed_form_first(*lin, mu, s, t, f, y);
    }
    case FirstOrderRoute::kSemigroupQuadrature:
      return semigroup_route(model, mu, s, t, f, y, params, seed);
    case FirstOrderRoute::kMeasureFd:
      return measure_fd_first(model, mu, s, t, f, y, params, seed);
  }
  throw InputError("first_order_derivative: unknown route");
}

DerivativeEstimate second_order_derivative(const ModelPtr& model, const InitialSpec& mu, double s,
                                           double t, NamedFn f, const Vec& y, const Vec& z,
                                           SecondOrderRoute route, const DerivParams& params,
                                           std::uint64_t seed) {
  if (t < s) throw InputError("second_order_derivative: t must be >= s");
  switch (route) {
    case SecondOrderRoute::kClosedForm: {
      const auto lin = std::dynamic_pointer_cast<const LinearDrift>(model);
      if (!lin) throw CapabilityError("closed_form route requires a linear drift");
      return closed_form_second(*lin, mu, s, t, f, y, z);
    }
    case SecondOrderRoute::kQuadrature: {
      const auto lin = std::dynamic_pointer_cast<const LinearDrift>(model);
      if (!lin) throw CapabilityError("quadrature route requires a linear drift");
      return quadrature_second(*lin, mu, s, t, f, y, z);
    }
    case SecondOrderRoute::kDoubleMeasureFd:
      return measure_fd_second(model, mu, s, t, f, y, z, params, seed);
  }
  throw InputError("second_order_derivative: unknown route");
}

double gamma_operator(const std::function<Vec(const Vec&)>& grad_f,
                      const std::function<Vec(const Vec&)>& grad_g, const Vec& x) {
  return grad_f(x).dot(grad_g(x));
}

BackwardCheckReport backward_difference_decomposition(const ModelPtr& model,
                                                      const InitialSpec& mu0,
                                                      const InitialSpec& mu1, double s, double t,
                                                      const Vec& x, std::uint64_t seed,
                                                      const DerivParams& params) {
  TimeGrid grid{s, t, params.dt, {}};
  grid.validate();
  const int d = model->dim();
  const int steps = grid.n_steps();
  const int J = std::max(2, std::min(params.nodes, steps + 1));

  // Clouds built from the same seed share noise keys, so the two laws and the
  // two driven states are coupled pathwise.
  auto law0 = make_law(model, mu0, params.m_proxy, grid, seed, params.mode);
  auto law1 = make_law(model, mu1, params.m_proxy, grid, seed, params.mode);

  std::vector<int> node_steps(static_cast<size_t>(J));
  for (int j = 0; j < J; ++j)
    node_steps[static_cast<size_t>(j)] =
        static_cast<int>(std::llround(static_cast<double>(j) * steps / (J - 1)));
  const double h = (t - s) / (J - 1);

  // One auxiliary mu0-flow restarted at each quadrature node from the current
  // mu1-driven state, all advanced in the same sweep with the same noise.
  struct Aux {
    Vec z;
    Mat jac;
    Vec delta_b;
  };
  std::vector<Aux> aux;
  aux.reserve(static_cast<size_t>(J));

  Vec x1 = x, x0 = x;
  const std::uint64_t w_seed = split_seed(seed, seed_domain::kSample);
  const double sqdt = std::sqrt(grid.dt);
  Vec drift0(d), drift1(d), dw(d);
  size_t next_node = 0;
  for (int k = 0; k <= steps; ++k) {
    while (next_node < node_steps.size() && node_steps[next_node] == k) {
      Aux a;
      a.z = x1;
      a.jac = Mat::Identity(d, d);
      law1->drift(x1.data(), drift1.data());
      law0->drift(x1.data(), drift0.data());
      a.delta_b = drift1 - drift0;  // [phi1 - phi0](b(x1_u, .)), linear in the measure
      aux.push_back(std::move(a));
      ++next_node;
    }
    if (k == steps) break;

    NoiseStream ns(StreamKey{w_seed, 0, 0, static_cast<std::uint32_t>(k)});
    for (int i = 0; i < d; ++i) dw[i] = sqdt * ns.gaussian();

    law1->drift(x1.data(), drift1.data());
    x1 += grid.dt * drift1 + dw;
    law0->drift(x0.data(), drift0.data());
    x0 += grid.dt * drift0 + dw;
    for (Aux& a : aux) {
      a.jac = a.jac * (Mat::Identity(d, d) + grid.dt * law0->b1_now(a.z));
      law0->drift(a.z.data(), drift0.data());
      a.z += grid.dt * drift0 + dw;
    }
    law0->advance(static_cast<std::uint32_t>(k));
    law1->advance(static_cast<std::uint32_t>(k));
  }

  BackwardCheckReport report;
  report.lhs = x1 - x0;
  report.rhs = Vec::Zero(d);
  for (int j = 0; j < J; ++j) {
    const double w = (j == 0 || j == J - 1) ? 0.5 * h : h;
    report.rhs += w * (aux[static_cast<size_t>(j)].jac.transpose() *
                       aux[static_cast<size_t>(j)].delta_b);
  }
  report.discrepancy = (report.lhs - report.rhs).norm();
  const double scale = report.lhs.norm();
  report.rel_discrepancy = scale > 1e-14 ? report.discrepancy / scale : report.discrepancy;
  return report;
}

}  // namespace mvlab
