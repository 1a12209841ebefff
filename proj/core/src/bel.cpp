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

#include "mvlab/bel.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

#include "mvlab/errors.hpp"

namespace mvlab {

using nlohmann::json;

json estimate_to_json(const DerivativeEstimate& est) {
  json j;
  j["route"] = est.route;
  j["m"] = est.samples;
  if (est.value.size() == 1) {
    j["value"] = est.value[0];
    j["stderr"] = est.std_error[0];
  } else {
    j["value"] = std::vector<double>(est.value.data(), est.value.data() + est.value.size());
    j["stderr"] =
        std::vector<double>(est.std_error.data(), est.std_error.data() + est.std_error.size());
  }
  json params = json::object();
  for (const auto& [k, v] : est.meta) params[k] = v;
  j["params"] = params;
  return j;
}

double BelWeight::phi(double v) const {
  if (epsilon <= 0.0 || epsilon >= 1.0) throw InputError("BelWeight: epsilon must be in (0,1)");
  if (v <= 1.0 - epsilon) return 0.0;
  if (v >= 1.0) return 1.0;
  return 1.0 + std::cos((1.0 + (1.0 - v) / epsilon) * M_PI / 2.0);
}

double BelWeight::phi_derivative(double v) const {
  if (epsilon <= 0.0 || epsilon >= 1.0) throw InputError("BelWeight: epsilon must be in (0,1)");
  if (v <= 1.0 - epsilon || v > 1.0) return 0.0;
  return (M_PI / (2.0 * epsilon)) * std::sin((1.0 + (1.0 - v) / epsilon) * M_PI / 2.0);
}

namespace {

// View onto the law at one step; either a precomputed mean (closure models)
// or a live evolver.
struct LawView {
  const DriftModel* model = nullptr;
  const Vec* mean = nullptr;
  const LawEvolver* law = nullptr;
  double t = 0.0;

  void drift(const double* x, double* out) const {
    if (mean) {
      model->eval_drift_mean(t, x, mean->data(), out);
    } else {
      law->drift(x, out);
    }
  }
  Mat b1(const Vec& x) const {
    if (mean) return model->b1(t, x, *mean);
    return law->b1_now(x);
  }
  Tensor3 b11(const Vec& x) const {
    if (mean) return model->b11(t, x, *mean);
    return law->b11_now(x);
  }
};

// Runs m driven samples over the grid. Closure models walk each sample
// start-to-finish against the stored mean path (parallel over samples);
// otherwise samples advance in lockstep with a live proxy cloud.
template <typename State, typename InitFn, typename StepFn, typename FinishFn>
void sweep_samples(const ModelPtr& model, const InitialSpec& mu, const TimeGrid& grid,
                   std::uint64_t seed, const EstimatorOptions& opts, long m, InitFn init,
                   StepFn step, FinishFn finish) {
  grid.validate();
  const int steps = grid.n_steps();
  const auto means = try_mean_path(model, mu, opts.m_proxy, grid, seed, opts.mode);
  const std::uint64_t sample_seed = split_seed(seed, seed_domain::kSample);
  const double sqdt = std::sqrt(grid.dt);
  const int d = model->dim();

  if (means) {
    parallel_for(static_cast<int>(m), opts.threads, [&](int i) {
      State st;
      init(i, st);
      Vec drift(d);
      for (int k = 0; k < steps; ++k) {
        LawView view{model.get(), &means->means[static_cast<size_t>(k)], nullptr,
                     grid.time_at(k)};
        NoiseStream ns(StreamKey{sample_seed, static_cast<std::uint32_t>(i), 0,
                                 static_cast<std::uint32_t>(k)});
        Vec dw(d);
        for (int j = 0; j < d; ++j) dw[j] = sqdt * ns.gaussian();
        step(i, st, k, view, dw, drift);
      }
      finish(i, st);
    });
    return;
  }

  auto law = make_law(model, mu, opts.m_proxy, grid, seed, opts.mode);
  std::vector<State> states(static_cast<size_t>(m));
  for (long i = 0; i < m; ++i) init(static_cast<int>(i), states[static_cast<size_t>(i)]);
  for (int k = 0; k < steps; ++k) {
    LawView view{model.get(), nullptr, law.get(), grid.time_at(k)};
    parallel_for(static_cast<int>(m), opts.threads, [&](int i) {
      NoiseStream ns(StreamKey{sample_seed, static_cast<std::uint32_t>(i), 0,
                               static_cast<std::uint32_t>(k)});
      Vec dw(d);
      for (int j = 0; j < d; ++j) dw[j] = sqdt * ns.gaussian();
      Vec drift(d);
      step(i, states[static_cast<size_t>(i)], k, view, dw, drift);
    });
    law->advance(static_cast<std::uint32_t>(k));
  }
  for (long i = 0; i < m; ++i) finish(static_cast<int>(i), states[static_cast<size_t>(i)]);
}

void mean_and_stderr(const std::vector<double>& slots, long m, int width, Vec* mean, Vec* se) {
  mean->resize(width);
  se->resize(width);
  std::vector<double> col(static_cast<size_t>(m));
  for (int j = 0; j < width; ++j) {
    for (long i = 0; i < m; ++i) col[static_cast<size_t>(i)] = slots[static_cast<size_t>(i) * width + j];
    const double mu = pairwise_sum(col) / static_cast<double>(m);
    double ss = 0.0;
    for (long i = 0; i < m; ++i) {
      const double dvi = col[static_cast<size_t>(i)] - mu;
      ss += dvi * dvi;
    }
    (*mean)[j] = mu;
    (*se)[j] = m > 1 ? std::sqrt(ss / (static_cast<double>(m) - 1.0) / static_cast<double>(m)) : 0.0;
  }
}

}  // namespace

DerivativeEstimate bel_gradient(const ModelPtr& model, const InitialSpec& mu, double s, double t,
                                const Vec& x, const ScalarFn& f, long m, const BelWeight& weight,
                                std::uint64_t seed, const EstimatorOptions& opts) {
  if (!(t > s)) throw InputError("bel_gradient: requires t > s");
  if (m < 2) throw InputError("bel_gradient: need at least two samples");
  const int d = model->dim();
  TimeGrid grid{s, t, opts.dt, {}};
  const int steps = grid.n_steps();
  const double tau_len = t - s;

  std::vector<double> w(static_cast<size_t>(steps));
  for (int k = 0; k < steps; ++k)
    w[static_cast<size_t>(k)] = weight.phi_derivative((grid.time_at(k) - s) / tau_len) / tau_len;

  const bool const_b1 = model->constant_first_derivatives();
  const Mat b1_const = const_b1 ? model->b1(s, x, x) : Mat();
  const double f_at_start = f(x);

  struct State {
    Vec x;
    Mat jac;
    Vec tau;
  };
  std::vector<double> slots(static_cast<size_t>(m) * d);

  sweep_samples<State>(
      model, mu, grid, seed, opts, m,
      [&](int, State& st) {
        st.x = x;
        st.jac = Mat::Identity(d, d);
        st.tau = Vec::Zero(d);
      },
      [&](int, State& st, int k, const LawView& view, const Vec& dw, Vec& drift) {
        const double wk = w[static_cast<size_t>(k)];
        if (wk != 0.0) st.tau.noalias() += wk * (st.jac * dw);
        if (const_b1) {
          st.jac = st.jac * (Mat::Identity(d, d) + grid.dt * b1_const);
        } else {
          st.jac = st.jac * (Mat::Identity(d, d) + grid.dt * view.b1(st.x));
        }
        view.drift(st.x.data(), drift.data());
        st.x += grid.dt * drift + dw;
      },
      [&](int i, State& st) {
        const double fv = f(st.x) - f_at_start;  // constant shifts do not bias
        for (int j = 0; j < d; ++j) slots[static_cast<size_t>(i) * d + j] = fv * st.tau[j];
      });

  DerivativeEstimate est;
  est.route = "bel";
  est.samples = m;
  mean_and_stderr(slots, m, d, &est.value, &est.std_error);
  est.meta["epsilon"] = weight.epsilon;
  est.meta["dt"] = opts.dt;
  return est;
}

MatrixEstimate bel_hessian(const ModelPtr& model, const InitialSpec& mu, double s, double t,
                           const Vec& x, const ScalarFn& f, long m, const BelWeight& weight,
                           double split_eps, std::uint64_t seed, const EstimatorOptions& opts) {
  if (!(t > s)) throw InputError("bel_hessian: requires t > s");
  if (!(split_eps > 0.0 && split_eps < 1.0))
    throw InputError("bel_hessian: split_eps must be in (0,1)");
  const int d = model->dim();
  TimeGrid grid{s, t, opts.dt, {}};
  const int steps = grid.n_steps();
  const double u = s + (1.0 - split_eps) * (t - s);
  const int ku = std::clamp(grid.step_of(u), 1, steps - 1);
  const double len_a = grid.time_at(ku) - s;
  const double len_b = t - grid.time_at(ku);

  std::vector<double> wa(static_cast<size_t>(steps), 0.0), wb(static_cast<size_t>(steps), 0.0);
  for (int k = 0; k < ku; ++k)
    wa[static_cast<size_t>(k)] = weight.phi_derivative((grid.time_at(k) - s) / len_a) / len_a;
  for (int k = ku; k < steps; ++k)
    wb[static_cast<size_t>(k)] =
        weight.phi_derivative((grid.time_at(k) - grid.time_at(ku)) / len_b) / len_b;

  const bool needs_second = model->has_second_derivatives();
  if (!needs_second)
    throw CapabilityError("bel_hessian: model lacks second derivatives of the drift");
  const bool const_b1 = model->constant_first_derivatives();
  const Mat b1_const = const_b1 ? model->b1(s, x, x) : Mat();
  const double f_at_start = f(x);

  struct State {
    Vec x;
    Mat jac;       // from s
    Tensor3 hess;  // from s, tracked on [s, u]
    Mat jac_u;     // jac frozen at the split
    Mat jac2;      // restarted at the split
    Vec tau_a, tau_b;
    Mat tau2;
  };
  std::vector<double> slots(static_cast<size_t>(m) * d * d);

  sweep_samples<State>(
      model, mu, grid, seed, opts, m,
      [&](int, State& st) {
        st.x = x;
        st.jac = Mat::Identity(d, d);
        st.hess = Tensor3(d);
        st.jac2 = Mat::Identity(d, d);
        st.tau_a = Vec::Zero(d);
        st.tau_b = Vec::Zero(d);
        st.tau2 = Mat::Zero(d, d);
      },
      [&](int, State& st, int k, const LawView& view, const Vec& dw, Vec& drift) {
        if (k == ku) st.jac_u = st.jac;
        const double wak = wa[static_cast<size_t>(k)];
        const double wbk = wb[static_cast<size_t>(k)];
        if (wak != 0.0) {
          st.tau_a.noalias() += wak * (st.jac * dw);
          for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
              double acc = 0.0;
              for (int l = 0; l < d; ++l) acc += st.hess(i, j, l) * dw[l];
              st.tau2(i, j) += wak * acc;
            }
        }
        if (wbk != 0.0) st.tau_b.noalias() += wbk * (st.jac2 * dw);

        const Mat b1k = const_b1 ? b1_const : view.b1(st.x);
        const Mat prop = Mat::Identity(d, d) + grid.dt * b1k;
        if (k < ku) {
          const Tensor3 h11 = view.b11(st.x);
          Tensor3 next(d);
          for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
              for (int kk = 0; kk < d; ++kk) {
                double acc = 0.0;
                for (int l = 0; l < d; ++l) acc += st.hess(i, j, l) * prop(l, kk);
                for (int l = 0; l < d; ++l)
                  for (int mm = 0; mm < d; ++mm)
                    acc += grid.dt * st.jac(i, l) * st.jac(j, mm) * h11(l, mm, kk);
                next(i, j, kk) = acc;
              }
          st.hess = next;
        }
        st.jac = st.jac * prop;
        if (k >= ku) st.jac2 = st.jac2 * prop;
        view.drift(st.x.data(), drift.data());
        st.x += grid.dt * drift + dw;
      },
      [&](int i, State& st) {
        const double fv = f(st.x) - f_at_start;
        const Vec jb = st.jac_u * st.tau_b;
        for (int r = 0; r < d; ++r)
          for (int c = 0; c < d; ++c) {
            const double cross = 0.5 * (st.tau_a[r] * jb[c] + st.tau_a[c] * jb[r]);
            const double t2 = 0.5 * (st.tau2(r, c) + st.tau2(c, r));
            slots[(static_cast<size_t>(i) * d + r) * d + c] = fv * (t2 + cross);
          }
      });

  MatrixEstimate est;
  est.samples = m;
  Vec mean, se;
  mean_and_stderr(slots, m, d * d, &mean, &se);
  est.value = Eigen::Map<Mat>(mean.data(), d, d).transpose();
  est.std_error = Eigen::Map<Mat>(se.data(), d, d).transpose();
  return est;
}

DerivativeEstimate fd_semigroup_gradient(const ModelPtr& model, const InitialSpec& mu, double s,
                                         double t, const Vec& x, const ScalarFn& f, double bump,
                                         long m, std::uint64_t seed, const EstimatorOptions& opts) {
  if (!(t > s)) throw InputError("fd_semigroup_gradient: requires t > s");
  if (!(bump > 0.0)) throw InputError("fd_semigroup_gradient: bump must be positive");
  const int d = model->dim();
  TimeGrid grid{s, t, opts.dt, {}};

  struct State {
    std::vector<Vec> plus, minus;  // one pair per coordinate
  };
  std::vector<double> slots(static_cast<size_t>(m) * d);

  sweep_samples<State>(
      model, mu, grid, seed, opts, m,
      [&](int, State& st) {
        st.plus.assign(static_cast<size_t>(d), x);
        st.minus.assign(static_cast<size_t>(d), x);
        for (int k = 0; k < d; ++k) {
          st.plus[static_cast<size_t>(k)][k] += bump;
          st.minus[static_cast<size_t>(k)][k] -= bump;
        }
      },
      [&](int, State& st, int, const LawView& view, const Vec& dw, Vec& drift) {
        for (int k = 0; k < d; ++k) {
          view.drift(st.plus[static_cast<size_t>(k)].data(), drift.data());
          st.plus[static_cast<size_t>(k)] += grid.dt * drift + dw;
          view.drift(st.minus[static_cast<size_t>(k)].data(), drift.data());
          st.minus[static_cast<size_t>(k)] += grid.dt * drift + dw;
        }
      },
      [&](int i, State& st) {
        for (int k = 0; k < d; ++k)
          slots[static_cast<size_t>(i) * d + k] =
              (f(st.plus[static_cast<size_t>(k)]) - f(st.minus[static_cast<size_t>(k)])) /
              (2.0 * bump);
      });

  DerivativeEstimate est;
  est.route = "crn_fd";
  est.samples = m;
  mean_and_stderr(slots, m, d, &est.value, &est.std_error);
  est.meta["bump"] = bump;
  return est;
}

BBKernel estimate_BB(const ModelPtr& model, const InitialSpec& mu, double s, double t,
                     const Vec& x0, const Vec& x1, long m, std::uint64_t seed,
                     const EstimatorOptions& opts) {
  if (t < s) throw InputError("estimate_BB: requires t >= s");
  const int d = model->dim();
  if (t == s) {
    BBKernel k;
    k.value = model->b2(s, x1, x0);
    k.std_error = Mat::Zero(d, d);
    k.m_samples = 0;
    return k;
  }
  TimeGrid grid{s, t, opts.dt, {}};
  const bool const_b1 = model->constant_first_derivatives();
  const Mat b1_const = const_b1 ? model->b1(s, x0, x0) : Mat();

  struct State {
    Vec x;
    Mat jac;
  };
  std::vector<double> slots(static_cast<size_t>(m) * d * d);

  sweep_samples<State>(
      model, mu, grid, seed, opts, m,
      [&](int, State& st) {
        st.x = x0;
        st.jac = Mat::Identity(d, d);
      },
      [&](int, State& st, int, const LawView& view, const Vec& dw, Vec& drift) {
        if (const_b1) {
          st.jac = st.jac * (Mat::Identity(d, d) + grid.dt * b1_const);
        } else {
          st.jac = st.jac * (Mat::Identity(d, d) + grid.dt * view.b1(st.x));
        }
        view.drift(st.x.data(), drift.data());
        st.x += grid.dt * drift + dw;
      },
      [&](int i, State& st) {
        const Mat value = st.jac * model->b2(t, x1, st.x);
        for (int r = 0; r < d; ++r)
          for (int c = 0; c < d; ++c)
            slots[(static_cast<size_t>(i) * d + r) * d + c] = value(r, c);
      });

  BBKernel out;
  out.m_samples = m;
  Vec mean, se;
  mean_and_stderr(slots, m, d * d, &mean, &se);
  out.value = Eigen::Map<Mat>(mean.data(), d, d).transpose();
  out.std_error = Eigen::Map<Mat>(se.data(), d, d).transpose();
  return out;
}

}  // namespace mvlab
