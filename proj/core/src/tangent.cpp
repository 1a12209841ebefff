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

#include "mvlab/tangent.hpp"

#include <cmath>

#include "mvlab/errors.hpp"

namespace mvlab {

namespace {

// second <- second (I + dt b1) + dt (first x first) b11
Tensor3 advance_second(const Tensor3& second, const Mat& first, const Mat& prop,
                       const Tensor3& h11, double dt) {
  const int d = first.rows();
  Tensor3 out(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k) {
        double acc = 0.0;
        for (int l = 0; l < d; ++l) acc += second(i, j, l) * prop(l, k);
        for (int l = 0; l < d; ++l)
          for (int m = 0; m < d; ++m) acc += dt * first(i, l) * first(j, m) * h11(l, m, k);
        out(i, j, k) = acc;
      }
  return out;
}

}  // namespace

TangentFlow tangent_flow(const DriftModel& model, const FlowSample& flow) {
  const FlowRecord& rec = flow.record;
  if (rec.jac1.empty() && rec.n_steps > 0)
    throw InputError("tangent_flow: flow was recorded without tangent data");
  const int d = rec.d;
  const double dt = flow.grid.dt;

  TangentFlow out;
  out.grid = flow.grid;
  out.has_second = rec.has_hessians() && model.has_second_derivatives();

  Mat first = Mat::Identity(d, d);
  Tensor3 second(d);

  std::vector<int> snap_steps;
  for (double c : flow.grid.checkpoints) snap_steps.push_back(flow.grid.step_of(c));
  size_t next_snap = 0;

  for (int k = 0; k <= rec.n_steps; ++k) {
    while (next_snap < snap_steps.size() && snap_steps[next_snap] == k) {
      out.first.push_back(first);
      if (out.has_second) out.second.push_back(second);
      ++next_snap;
    }
    if (k == rec.n_steps) break;
    const Mat prop = Mat::Identity(d, d) + dt * rec.jac(k);
    if (out.has_second) second = advance_second(second, first, prop, rec.hess(k), dt);
    first = first * prop;
  }
  out.first_final = first;
  out.second_final = out.has_second ? second : Tensor3(d);
  return out;
}

FdGradientReport fd_gradient_check(const ModelPtr& model, const InitialSpec& mu0, int m_proxy,
                                   const Vec& x, double bump, const TimeGrid& grid,
                                   std::uint64_t seed, const FlowOptions& opts) {
  if (!(bump > 0.0)) throw InputError("fd_gradient_check: bump must be positive");
  const int d = model->dim();

  // Simulating each start point in its own call replays identical noise and
  // law keys, which is the common-noise coupling the comparison needs.
  const auto run_one = [&](const Vec& start) {
    FlowOptions o = opts;
    o.record_increments = false;
    return simulate_nonlinear_flow(model, mu0, m_proxy, {start}, grid, seed, o)[0];
  };

  const FlowSample base = run_one(x);
  const TangentFlow tangent = tangent_flow(*model, base);

  Mat fd(d, d);
  for (int k = 0; k < d; ++k) {
    Vec e = Vec::Zero(d);
    e[k] = bump;
    FlowOptions o = opts;
    o.record_tangent_data = false;
    o.record_increments = false;
    const FlowSample plus = simulate_nonlinear_flow(model, mu0, m_proxy, {x + e}, grid, seed, o)[0];
    const FlowSample minus = simulate_nonlinear_flow(model, mu0, m_proxy, {x - e}, grid, seed, o)[0];
    const Vec diff =
        (plus.record.state(plus.record.n_steps) - minus.record.state(minus.record.n_steps)) /
        (2.0 * bump);
    fd.row(k) = diff.transpose();
  }

  FdGradientReport report;
  report.tangent = tangent.first_final;
  report.finite_difference = fd;
  const double scale = std::max(1.0, tangent.first_final.cwiseAbs().maxCoeff());
  report.max_rel_error = (fd - tangent.first_final).cwiseAbs().maxCoeff() / scale;
  return report;
}

}  // namespace mvlab
