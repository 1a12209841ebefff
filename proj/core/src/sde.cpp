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

#include "mvlab/sde.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <string>

#include "mvlab/errors.hpp"
#include "mvlab/linear_flow.hpp"

namespace mvlab {

using nlohmann::json;

void TimeGrid::validate() const {
  if (!(dt > 0.0)) throw InputError("TimeGrid: dt must be positive");
  if (t_end < s) throw InputError("TimeGrid: t_end must be >= s");
  double prev = s;
  for (double c : checkpoints) {
    if (c < s - 1e-12 || c > t_end + 1e-12)
      throw InputError("TimeGrid: checkpoint outside [s, t_end]");
    if (c < prev - 1e-12) throw InputError("TimeGrid: checkpoints must be sorted");
    prev = c;
  }
}

int TimeGrid::n_steps() const {
  return static_cast<int>(std::llround((t_end - s) / dt));
}

int TimeGrid::step_of(double time) const {
  const int k = static_cast<int>(std::llround((time - s) / dt));
  return std::clamp(k, 0, n_steps());
}

void ParticleEnsemble::check_finite() const {
  for (size_t i = 0; i < positions.size(); ++i)
    if (!std::isfinite(positions[i]))
      throw NumericError("ensemble: non-finite coordinate at particle " +
                         std::to_string(i / static_cast<size_t>(d)));
}

// ---------------------------------------------------------------------------
// InitialSpec

InitialSpec InitialSpec::dirac(const Vec& x) {
  InitialSpec s;
  s.kind = Kind::kDirac;
  s.point = x;
  return s;
}

InitialSpec InitialSpec::dirac1(double x) { return dirac(Vec::Constant(1, x)); }

InitialSpec InitialSpec::gaussian(const Vec& mean, const Mat& cov) {
  InitialSpec s;
  s.kind = Kind::kGaussian;
  s.mean = mean;
  s.cov = cov;
  return s;
}

InitialSpec InitialSpec::gaussian1(double mean, double var) {
  return gaussian(Vec::Constant(1, mean), Mat::Constant(1, 1, var));
}

InitialSpec InitialSpec::uniform(const Vec& lo, const Vec& hi) {
  InitialSpec s;
  s.kind = Kind::kUniform;
  s.lo = lo;
  s.hi = hi;
  return s;
}

InitialSpec InitialSpec::two_point(const Vec& a, const Vec& b, double p_a) {
  InitialSpec s;
  s.kind = Kind::kTwoPoint;
  s.a = a;
  s.b = b;
  s.p_a = p_a;
  return s;
}

int InitialSpec::dim() const {
  switch (kind) {
    case Kind::kDirac: return static_cast<int>(point.size());
    case Kind::kGaussian: return static_cast<int>(mean.size());
    case Kind::kUniform: return static_cast<int>(lo.size());
    case Kind::kTwoPoint: return static_cast<int>(a.size());
  }
  return 0;
}

Vec InitialSpec::mean_of() const {
  switch (kind) {
    case Kind::kDirac: return point;
    case Kind::kGaussian: return mean;
    case Kind::kUniform: return 0.5 * (lo + hi);
    case Kind::kTwoPoint: return p_a * a + (1.0 - p_a) * b;
  }
  throw InputError("InitialSpec: unknown kind");
}

namespace {
Vec vec_from_json(const json& j) {
  if (j.is_number()) return Vec::Constant(1, j.get<double>());
  Vec v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v[static_cast<int>(i)] = j[i].get<double>();
  return v;
}
json vec_to_json(const Vec& v) {
  json j = json::array();
  for (int i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}
}  // namespace

InitialSpec InitialSpec::from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("kind"))
    throw InputError("initial spec must be an object with a 'kind' field");
  const std::string kind = doc.at("kind").get<std::string>();
  if (kind == "dirac") return dirac(vec_from_json(doc.at("point")));
  if (kind == "gaussian") {
    const Vec m = vec_from_json(doc.at("mean"));
    Mat cov;
    const auto& c = doc.at("cov");
    if (c.is_number()) {
      cov = Mat::Identity(m.size(), m.size()) * c.get<double>();
    } else {
      cov = Mat(m.size(), m.size());
      for (int i = 0; i < m.size(); ++i)
        for (int k = 0; k < m.size(); ++k) cov(i, k) = c[static_cast<size_t>(i)][static_cast<size_t>(k)].get<double>();
    }
    return gaussian(m, cov);
  }
  if (kind == "uniform") return uniform(vec_from_json(doc.at("lo")), vec_from_json(doc.at("hi")));
  if (kind == "two_point")
    return two_point(vec_from_json(doc.at("a")), vec_from_json(doc.at("b")), doc.value("p", 0.5));
  throw InputError("initial spec: unknown kind '" + kind + "'");
}

json InitialSpec::to_json() const {
  json j;
  switch (kind) {
    case Kind::kDirac:
      j["kind"] = "dirac";
      j["point"] = vec_to_json(point);
      break;
    case Kind::kGaussian: {
      j["kind"] = "gaussian";
      j["mean"] = vec_to_json(mean);
      json c = json::array();
      for (int i = 0; i < cov.rows(); ++i) {
        json row = json::array();
        for (int k = 0; k < cov.cols(); ++k) row.push_back(cov(i, k));
        c.push_back(row);
      }
      j["cov"] = c;
      break;
    }
    case Kind::kUniform:
      j["kind"] = "uniform";
      j["lo"] = vec_to_json(lo);
      j["hi"] = vec_to_json(hi);
      break;
    case Kind::kTwoPoint:
      j["kind"] = "two_point";
      j["a"] = vec_to_json(a);
      j["b"] = vec_to_json(b);
      j["p"] = p_a;
      break;
  }
  return j;
}

namespace {
constexpr std::uint32_t kInitStep = 0xFFFFFFFFu;
}

ParticleEnsemble sample_initial(const InitialSpec& spec, int n, int d, const StreamKey& key) {
  if (n < 1) throw InputError("sample_initial: need n >= 1");
  if (spec.dim() != d) throw InputError("sample_initial: spec dimension mismatch");
  ParticleEnsemble ens;
  ens.n = n;
  ens.d = d;
  ens.t = 0.0;
  ens.positions.resize(static_cast<size_t>(n) * d);

  Mat chol;
  if (spec.kind == InitialSpec::Kind::kGaussian) {
    Eigen::LLT<Mat> llt(spec.cov);
    if (llt.info() != Eigen::Success) {
      // Semi-definite covariances (e.g. exactly zero) are allowed.
      Eigen::SelfAdjointEigenSolver<Mat> es(spec.cov);
      if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() < -1e-12)
        throw InputError("sample_initial: covariance is not positive semi-definite");
      chol = es.eigenvectors() *
             es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    } else {
      chol = llt.matrixL();
    }
  }

  for (int i = 0; i < n; ++i) {
    StreamKey k = key;
    k.particle = static_cast<std::uint32_t>(i);
    k.step = kInitStep;
    NoiseStream ns(k);
    double* row = ens.row(i);
    switch (spec.kind) {
      case InitialSpec::Kind::kDirac:
        for (int j = 0; j < d; ++j) row[j] = spec.point[j];
        break;
      case InitialSpec::Kind::kGaussian: {
        Vec z(d);
        for (int j = 0; j < d; ++j) z[j] = ns.gaussian();
        const Vec x = spec.mean + chol * z;
        for (int j = 0; j < d; ++j) row[j] = x[j];
        break;
      }
      case InitialSpec::Kind::kUniform:
        for (int j = 0; j < d; ++j) row[j] = spec.lo[j] + (spec.hi[j] - spec.lo[j]) * ns.uniform();
        break;
      case InitialSpec::Kind::kTwoPoint: {
        const bool take_a = ns.uniform() < spec.p_a;
        const Vec& v = take_a ? spec.a : spec.b;
        for (int j = 0; j < d; ++j) row[j] = v[j];
        break;
      }
    }
  }
  return ens;
}

namespace {

ParticleEnsemble em_step_impl(const ParticleEnsemble& ens, std::span<const double> weights,
                              const DriftModel& model, double dt, const StreamKey& key,
                              const EmOptions& opts) {
  if (!(dt > 0.0)) throw InputError("em_step: dt must be positive");
  if (ens.d != model.dim()) throw ModelError("em_step: dimension mismatch");
  const int n = ens.n;
  const int d = ens.d;
  ParticleEnsemble out;
  out.n = n;
  out.d = d;
  out.t = ens.t + dt;
  out.positions.resize(static_cast<size_t>(n) * d);

  const double sqdt = std::sqrt(dt) * opts.noise_scale;
  const bool closure = model.has_mean_closure();
  Vec mean;
  if (closure) {
    if (weights.empty()) {
      mean = ens.mean();
    } else {
      mean = Vec::Zero(d);
      for (int i = 0; i < n; ++i)
        mean += weights[static_cast<size_t>(i)] * Eigen::Map<const Vec>(ens.row(i), d);
    }
  }

  const auto body = [&](int i) {
    double* dst = out.row(i);
    const double* src = ens.row(i);
    double drift[16];
    std::vector<double> drift_dyn;
    double* b = drift;
    if (d > 16) {
      drift_dyn.resize(static_cast<size_t>(d));
      b = drift_dyn.data();
    }
    if (closure) {
      model.eval_drift_mean(ens.t, src, mean.data(), b);
    } else {
      model.mean_field_drift(ens.t, src, ens.positions, weights, b);
    }
    StreamKey k = key;
    k.particle = static_cast<std::uint32_t>(i);
    NoiseStream ns(k);
    for (int j = 0; j < d; ++j) {
      const double z = opts.noise_scale == 0.0 ? 0.0 : ns.gaussian();
      dst[j] = src[j] + b[j] * dt + sqdt * z;
      if (!std::isfinite(dst[j]))
        throw NumericError("em_step: non-finite state for particle " + std::to_string(i));
    }
  };
  parallel_for(n, opts.threads, body);
  return out;
}

}  // namespace

ParticleEnsemble em_step(const ParticleEnsemble& ens, const DriftModel& model, double dt,
                         const StreamKey& key, const EmOptions& opts) {
  return em_step_impl(ens, {}, model, dt, key, opts);
}

ParticleEnsemble em_step_weighted(const ParticleEnsemble& ens, std::span<const double> weights,
                                  const DriftModel& model, double dt, const StreamKey& key,
                                  const EmOptions& opts) {
  if (weights.size() != static_cast<size_t>(ens.n))
    throw InputError("em_step_weighted: weight count mismatch");
  return em_step_impl(ens, weights, model, dt, key, opts);
}

std::vector<ParticleEnsemble> simulate_mean_field(const DriftModel& model, const InitialSpec& init,
                                                  int n, const TimeGrid& grid, std::uint64_t seed,
                                                  const SimOptions& opts) {
  grid.validate();
  StreamKey init_key{split_seed(seed, seed_domain::kInit), opts.replica, 0, 0};
  ParticleEnsemble ens = sample_initial(init, n, model.dim(), init_key);
  ens.t = grid.s;

  std::vector<int> snap_steps;
  snap_steps.reserve(grid.checkpoints.size());
  for (double c : grid.checkpoints) snap_steps.push_back(grid.step_of(c));

  std::vector<ParticleEnsemble> out;
  out.reserve(snap_steps.size());
  size_t next_snap = 0;
  const int steps = grid.n_steps();
  EmOptions eo;
  eo.noise_scale = opts.noise_scale;
  eo.threads = opts.threads;
  for (int k = 0; k <= steps; ++k) {
    while (next_snap < snap_steps.size() && snap_steps[next_snap] == k) {
      out.push_back(ens);
      ++next_snap;
    }
    if (k == steps) break;
    StreamKey key{split_seed(seed, seed_domain::kStep), opts.replica, 0,
                  static_cast<std::uint32_t>(k)};
    ens = em_step(ens, model, grid.dt, key, eo);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Law evolvers

namespace {

class ExactLinearLaw final : public LawEvolver {
 public:
  ExactLinearLaw(std::shared_ptr<const LinearDrift> model, const InitialSpec& mu0,
                 const TimeGrid& grid)
      : model_(std::move(model)),
        step_prop_(expm(grid.dt * (model_->B1() + model_->B2()))),
        mean_(mu0.mean_of()),
        t_(grid.s) ,
        dt_(grid.dt) {}

  int dim() const override { return model_->dim(); }
  double time() const override { return t_; }

  void drift(const double* x, double* out) const override {
    model_->eval_drift_mean(t_, x, mean_.data(), out);
  }
  Mat b1_now(const Vec&) const override { return model_->B1().transpose(); }
  Tensor3 b11_now(const Vec&) const override { return Tensor3(model_->dim()); }
  Vec mean_now() const override { return mean_; }
  ParticleEnsemble snapshot_now(int) const override {
    ParticleEnsemble e;
    e.n = 1;
    e.d = dim();
    e.t = t_;
    e.positions.assign(mean_.data(), mean_.data() + mean_.size());
    return e;
  }
  void advance(std::uint32_t) override {
    mean_ = step_prop_ * mean_;
    t_ += dt_;
  }
  std::unique_ptr<LawEvolver> clone() const override {
    return std::make_unique<ExactLinearLaw>(*this);
  }

 private:
  std::shared_ptr<const LinearDrift> model_;
  Mat step_prop_;
  Vec mean_;
  double t_;
  double dt_;
};

class CloudLaw final : public LawEvolver {
 public:
  CloudLaw(ModelPtr model, const InitialSpec& mu0, int m_proxy, const TimeGrid& grid,
           std::uint64_t seed, const EmOptions& opts)
      : model_(std::move(model)), seed_(seed), opts_(opts), dt_(grid.dt) {
    if (m_proxy < 1) throw InputError("cloud law: m_proxy must be >= 1");
    StreamKey init_key{split_seed(seed_, seed_domain::kProxy), 0, 0, 0};
    cloud_ = sample_initial(mu0, m_proxy, model_->dim(), init_key);
    cloud_.t = grid.s;
  }

  int dim() const override { return model_->dim(); }
  double time() const override { return cloud_.t; }

  void drift(const double* x, double* out) const override {
    if (model_->has_mean_closure()) {
      model_->eval_drift_mean(cloud_.t, x, mean_.data(), out);
    } else {
      model_->mean_field_drift(cloud_.t, x, cloud_.positions, {}, out);
    }
  }
  Mat b1_now(const Vec& x) const override {
    return model_->b1_mean(cloud_.t, x, cloud_.positions, {});
  }
  Tensor3 b11_now(const Vec& x) const override {
    return model_->b11_mean(cloud_.t, x, cloud_.positions, {});
  }
  Vec mean_now() const override { return mean_.size() ? mean_ : cloud_.mean(); }
  ParticleEnsemble snapshot_now(int max_atoms) const override {
    if (max_atoms <= 0 || max_atoms >= cloud_.n) return cloud_;
    ParticleEnsemble e;
    e.n = max_atoms;
    e.d = cloud_.d;
    e.t = cloud_.t;
    e.positions.assign(cloud_.positions.begin(),
                       cloud_.positions.begin() + static_cast<size_t>(max_atoms) * cloud_.d);
    return e;
  }
  void advance(std::uint32_t step_index) override {
    StreamKey key{split_seed(seed_, seed_domain::kProxy), 1, 0, step_index};
    cloud_ = em_step(cloud_, *model_, dt_, key, opts_);
    refresh();
  }
  std::unique_ptr<LawEvolver> clone() const override { return std::make_unique<CloudLaw>(*this); }

  void refresh() {
    if (model_->has_mean_closure()) mean_ = cloud_.mean();
  }

 private:
  ModelPtr model_;
  std::uint64_t seed_;
  EmOptions opts_;
  double dt_;
  ParticleEnsemble cloud_;
  Vec mean_;
};

}  // namespace

std::unique_ptr<LawEvolver> make_exact_law(const std::shared_ptr<const LinearDrift>& model,
                                           const InitialSpec& mu0, const TimeGrid& grid) {
  return std::make_unique<ExactLinearLaw>(model, mu0, grid);
}

std::unique_ptr<LawEvolver> make_cloud_law(const ModelPtr& model, const InitialSpec& mu0,
                                           int m_proxy, const TimeGrid& grid, std::uint64_t seed,
                                           const EmOptions& opts) {
  auto law = std::make_unique<CloudLaw>(model, mu0, m_proxy, grid, seed, opts);
  law->refresh();
  return law;
}

std::unique_ptr<LawEvolver> make_law(const ModelPtr& model, const InitialSpec& mu0, int m_proxy,
                                     const TimeGrid& grid, std::uint64_t seed, LawMode mode,
                                     const EmOptions& opts) {
  if (mode != LawMode::kParticle) {
    if (auto lin = std::dynamic_pointer_cast<const LinearDrift>(model))
      return make_exact_law(lin, mu0, grid);
    if (mode == LawMode::kExact)
      throw CapabilityError("exact law mode requires a linear drift model");
  }
  return make_cloud_law(model, mu0, m_proxy, grid, seed, opts);
}

std::optional<LawMeanPath> try_mean_path(const ModelPtr& model, const InitialSpec& mu0,
                                         int m_proxy, const TimeGrid& grid, std::uint64_t seed,
                                         LawMode mode) {
  if (!model->has_mean_closure() || !model->interaction_curvature_constant()) return std::nullopt;
  auto law = make_law(model, mu0, m_proxy, grid, seed, mode);
  LawMeanPath path;
  path.grid = grid;
  const int steps = grid.n_steps();
  path.means.reserve(static_cast<size_t>(steps) + 1);
  for (int k = 0; k <= steps; ++k) {
    path.means.push_back(law->mean_now());
    if (k < steps) law->advance(static_cast<std::uint32_t>(k));
  }
  return path;
}

// ---------------------------------------------------------------------------
// Nonlinear flow

Vec FlowRecord::state(int step) const {
  return Eigen::Map<const Vec>(states.data() + static_cast<size_t>(step) * d, d);
}

Mat FlowRecord::jac(int step) const {
  return Eigen::Map<const Mat>(jac1.data() + static_cast<size_t>(step) * d * d, d, d);
}

Tensor3 FlowRecord::hess(int step) const {
  Tensor3 t(d);
  const double* src = hess11.data() + static_cast<size_t>(step) * d * d * d;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k) t(i, j, k) = src[(static_cast<size_t>(i) * d + j) * d + k];
  return t;
}

std::vector<FlowSample> simulate_nonlinear_flow(const ModelPtr& model, const InitialSpec& mu0,
                                                int m_proxy, const std::vector<Vec>& xs,
                                                const TimeGrid& grid, std::uint64_t seed,
                                                const FlowOptions& opts) {
  grid.validate();
  if (xs.empty()) throw InputError("simulate_nonlinear_flow: no start points");
  const int d = model->dim();
  const int steps = grid.n_steps();
  auto law = make_law(model, mu0, m_proxy, grid, seed, opts.mode);

  const bool want_hess = opts.record_tangent_data && model->has_second_derivatives();
  std::vector<FlowSample> out(xs.size());
  for (size_t f = 0; f < xs.size(); ++f) {
    out[f].start_point = xs[f];
    out[f].grid = grid;
    out[f].record.d = d;
    out[f].record.n_steps = steps;
    out[f].record.states.resize(static_cast<size_t>(steps + 1) * d);
    if (opts.record_increments) out[f].record.increments.resize(static_cast<size_t>(steps) * d);
    if (opts.record_tangent_data) out[f].record.jac1.resize(static_cast<size_t>(steps) * d * d);
    if (want_hess) out[f].record.hess11.resize(static_cast<size_t>(steps) * d * d * d);
    for (int j = 0; j < d; ++j) out[f].record.states[static_cast<size_t>(j)] = xs[f][j];
  }

  std::vector<int> snap_steps;
  for (double c : grid.checkpoints) snap_steps.push_back(grid.step_of(c));

  std::vector<Vec> state(xs.size());
  for (size_t f = 0; f < xs.size(); ++f) state[f] = xs[f];

  const std::uint64_t flow_seed = split_seed(seed, seed_domain::kSample);
  size_t next_snap = 0;
  for (int k = 0; k <= steps; ++k) {
    while (next_snap < snap_steps.size() && snap_steps[next_snap] == k) {
      for (size_t f = 0; f < xs.size(); ++f) {
        ParticleEnsemble e;
        e.n = 1;
        e.d = d;
        e.t = grid.time_at(k);
        e.positions.assign(state[f].data(), state[f].data() + d);
        out[f].path.push_back(e);
        out[f].law_proxy.push_back(law->snapshot_now(opts.law_snapshot_atoms));
      }
      ++next_snap;
    }
    if (k == steps) break;

    const double sqdt = std::sqrt(grid.dt);
    for (size_t f = 0; f < xs.size(); ++f) {
      FlowRecord& rec = out[f].record;
      if (opts.record_tangent_data) {
        const Mat j1 = law->b1_now(state[f]);
        Eigen::Map<Mat>(rec.jac1.data() + static_cast<size_t>(k) * d * d, d, d) = j1;
        if (want_hess) {
          const Tensor3 h = law->b11_now(state[f]);
          double* dst = rec.hess11.data() + static_cast<size_t>(k) * d * d * d;
          for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
              for (int l = 0; l < d; ++l) dst[(static_cast<size_t>(i) * d + j) * d + l] = h(i, j, l);
        }
      }
      Vec drift(d);
      law->drift(state[f].data(), drift.data());
      StreamKey key{flow_seed, static_cast<std::uint32_t>(f), 0, static_cast<std::uint32_t>(k)};
      NoiseStream ns(key);
      for (int j = 0; j < d; ++j) {
        const double dw = opts.noise_scale == 0.0 ? 0.0 : sqdt * opts.noise_scale * ns.gaussian();
        if (opts.record_increments) rec.increments[static_cast<size_t>(k) * d + j] = dw;
        state[f][j] += drift[j] * grid.dt + dw;
        if (!std::isfinite(state[f][j]))
          throw NumericError("simulate_nonlinear_flow: non-finite state");
      }
      for (int j = 0; j < d; ++j)
        rec.states[(static_cast<size_t>(k) + 1) * d + j] = state[f][j];
    }
    law->advance(static_cast<std::uint32_t>(k));
  }
  return out;
}

}  // namespace mvlab
