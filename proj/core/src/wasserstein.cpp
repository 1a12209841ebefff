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

#include "mvlab/wasserstein.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "mvlab/errors.hpp"

namespace mvlab {

namespace {

void check_pair(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  if (mu.dim() != nu.dim()) throw InputError("wasserstein: dimension mismatch");
}

double quantile_coupling_cost(std::vector<std::pair<double, double>> a,
                              std::vector<std::pair<double, double>> b, int p) {
  // Pairs are (position, weight); walk both CDFs over their common refinement.
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  size_t i = 0, j = 0;
  double ra = a[0].second, rb = b[0].second;
  double cost = 0.0;
  while (i < a.size() && j < b.size()) {
    const double m = std::min(ra, rb);
    const double gap = std::fabs(a[i].first - b[j].first);
    cost += m * (p == 1 ? gap : gap * gap);
    ra -= m;
    rb -= m;
    if (ra <= 1e-15 && ++i < a.size()) ra = a[i].second;
    if (rb <= 1e-15 && ++j < b.size()) rb = b[j].second;
  }
  return cost;
}

}  // namespace

double wasserstein_1d(int p, const EmpiricalMeasure& mu, const EmpiricalMeasure& nu) {
  check_pair(mu, nu);
  if (mu.dim() != 1) throw InputError("wasserstein_1d: measures must be one-dimensional");
  if (p != 1 && p != 2) throw InputError("wasserstein_1d: order must be 1 or 2");

  const bool uniform_equal =
      mu.size() == nu.size() &&
      std::all_of(mu.weights().begin(), mu.weights().end(),
                  [&](double w) { return std::fabs(w - 1.0 / mu.size()) < 1e-12; }) &&
      std::all_of(nu.weights().begin(), nu.weights().end(),
                  [&](double w) { return std::fabs(w - 1.0 / nu.size()) < 1e-12; });
  if (uniform_equal) {
    std::vector<double> xs(mu.atoms().begin(), mu.atoms().end());
    std::vector<double> ys(nu.atoms().begin(), nu.atoms().end());
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    double cost = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
      const double gap = std::fabs(xs[i] - ys[i]);
      cost += (p == 1 ? gap : gap * gap);
    }
    cost /= static_cast<double>(xs.size());
    return p == 1 ? cost : std::sqrt(cost);
  }

  std::vector<std::pair<double, double>> a(static_cast<size_t>(mu.size()));
  std::vector<std::pair<double, double>> b(static_cast<size_t>(nu.size()));
  for (int i = 0; i < mu.size(); ++i) a[static_cast<size_t>(i)] = {mu.atoms()[static_cast<size_t>(i)], mu.weight(i)};
  for (int i = 0; i < nu.size(); ++i) b[static_cast<size_t>(i)] = {nu.atoms()[static_cast<size_t>(i)], nu.weight(i)};
  const double cost = quantile_coupling_cost(std::move(a), std::move(b), p);
  return p == 1 ? cost : std::sqrt(cost);
}

double solve_assignment(const Mat& cost) {
  // Jonker-Volgenant style shortest augmenting path with dual potentials.
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw InputError("solve_assignment: cost matrix must be square");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<size_t>(n) + 1, 0.0), v(static_cast<size_t>(n) + 1, 0.0);
  std::vector<int> match(static_cast<size_t>(n) + 1, 0);  // column -> row (1-based)
  std::vector<int> path(static_cast<size_t>(n) + 1, 0);

  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<size_t>(n) + 1, inf);
    std::vector<char> used(static_cast<size_t>(n) + 1, false);
    do {
      used[static_cast<size_t>(j0)] = true;
      const int i0 = match[static_cast<size_t>(j0)];
      double delta = inf;
      int j1 = -1;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<size_t>(i0)] - v[static_cast<size_t>(j)];
        if (cur < minv[static_cast<size_t>(j)]) {
          minv[static_cast<size_t>(j)] = cur;
          path[static_cast<size_t>(j)] = j0;
        }
        if (minv[static_cast<size_t>(j)] < delta) {
          delta = minv[static_cast<size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) {
          u[static_cast<size_t>(match[static_cast<size_t>(j)])] += delta;
          v[static_cast<size_t>(j)] -= delta;
        } else {
          minv[static_cast<size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<size_t>(j0)] != 0);
    do {
      const int j1 = path[static_cast<size_t>(j0)];
      match[static_cast<size_t>(j0)] = match[static_cast<size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }

  double total = 0.0;
  for (int j = 1; j <= n; ++j) total += cost(match[static_cast<size_t>(j)] - 1, j - 1);
  return total;
}

double wasserstein_exact(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, int p, int cap) {
  check_pair(mu, nu);
  if (p != 1 && p != 2) throw InputError("wasserstein_exact: order must be 1 or 2");
  if (mu.size() != nu.size())
    throw InputError("wasserstein_exact: measures must have equal atom counts");
  const int n = mu.size();
  if (n > cap)
    throw InputError("wasserstein_exact: N exceeds the exact-assignment cap; use the sliced variant");
  for (int i = 0; i < n; ++i)
    if (std::fabs(mu.weight(i) - 1.0 / n) > 1e-12 || std::fabs(nu.weight(i) - 1.0 / n) > 1e-12)
      throw InputError("wasserstein_exact: equal weights required");

  Mat cost(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double dist = (mu.atom(i) - nu.atom(j)).norm();
      cost(i, j) = p == 1 ? dist : dist * dist;
    }
  const double total = solve_assignment(cost) / n;
  return p == 1 ? total : std::sqrt(total);
}

double sliced_wasserstein(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, int p,
                          int n_proj, const StreamKey& key) {
  check_pair(mu, nu);
  if (n_proj < 1) throw InputError("sliced_wasserstein: need n_proj >= 1");
  const int d = mu.dim();
  StreamKey k = key;
  k.seed = split_seed(key.seed, seed_domain::kProjection);
  NoiseStream ns(k);
  double acc = 0.0;
  std::vector<double> pa(static_cast<size_t>(mu.size()));
  std::vector<double> pb(static_cast<size_t>(nu.size()));
  for (int r = 0; r < n_proj; ++r) {
    Vec dir(d);
    double norm = 0.0;
    do {
      for (int i = 0; i < d; ++i) dir[i] = ns.gaussian();
      norm = dir.norm();
    } while (norm < 1e-12);
    dir /= norm;
    for (int i = 0; i < mu.size(); ++i) pa[static_cast<size_t>(i)] = dir.dot(mu.atom(i));
    for (int i = 0; i < nu.size(); ++i) pb[static_cast<size_t>(i)] = dir.dot(nu.atom(i));
    EmpiricalMeasure ma(pa, std::vector<double>(mu.weights().begin(), mu.weights().end()), 1);
    EmpiricalMeasure mb(pb, std::vector<double>(nu.weights().begin(), nu.weights().end()), 1);
    acc += wasserstein_1d(p, ma, mb);
  }
  return acc / n_proj;
}

}  // namespace mvlab
