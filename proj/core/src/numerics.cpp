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

#include "mvlab/numerics.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <cstdlib>
#include <thread>

#include "mvlab/errors.hpp"

namespace mvlab {

Mat expm(const Mat& a) { return a.exp(); }

Quadrature gauss_legendre(int n, double a, double b) {
  if (n < 1) throw InputError("gauss_legendre: need at least one node");
  Quadrature q;
  q.nodes.resize(n);
  q.weights.resize(n);
  // Newton iteration on Legendre polynomials, exploiting root symmetry.
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      pp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / pp;
      x -= dx;
      if (std::fabs(dx) < 1e-15) break;
    }
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    q.nodes[i] = mid - half * x;
    q.nodes[n - 1 - i] = mid + half * x;
    const double w = 2.0 * half / ((1.0 - x * x) * pp * pp);
    q.weights[i] = w;
    q.weights[n - 1 - i] = w;
  }
  return q;
}

Mat integrate_exp_sandwich(const Mat& a, const Mat& c, const Mat& b, double tau) {
  const int d = static_cast<int>(c.rows());
  Mat acc = Mat::Zero(d, c.cols());
  if (tau == 0.0) return acc;
  const Quadrature q = gauss_legendre(64, 0.0, tau);
  for (size_t i = 0; i < q.nodes.size(); ++i) {
    const double u = q.nodes[i];
    acc.noalias() += q.weights[i] * (expm(a * u) * c * expm(b * u));
  }
  return acc;
}

Mat integrate_exp_transport(const Mat& a, const Mat& c, const Mat& b, double tau) {
  const int d = static_cast<int>(c.rows());
  Mat acc = Mat::Zero(d, c.cols());
  if (tau == 0.0) return acc;
  const Quadrature q = gauss_legendre(64, 0.0, tau);
  for (size_t i = 0; i < q.nodes.size(); ++i) {
    const double u = q.nodes[i];
    acc.noalias() += q.weights[i] * (expm(a * (tau - u)) * c * expm(b * u));
  }
  return acc;
}

double pairwise_sum(std::span<const double> xs) {
  const size_t n = xs.size();
  if (n == 0) return 0.0;
  if (n <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const size_t half = n / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

Vec column_mean(std::span<const double> xs, int n, int d) {
  if (n <= 0) throw InputError("column_mean: empty array");
  Vec out(d);
  std::vector<double> col(static_cast<size_t>(n));
  for (int j = 0; j < d; ++j) {
    for (int i = 0; i < n; ++i) col[static_cast<size_t>(i)] = xs[static_cast<size_t>(i) * d + j];
    out[j] = pairwise_sum(col) / n;
  }
  return out;
}

double spectral_norm(const Mat& a) {
  return a.jacobiSvd().singularValues()(0);
}

double max_eig_sym(const Mat& a) {
  const Mat s = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(s, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericError("max_eig_sym: eigensolver failed");
  return es.eigenvalues().maxCoeff();
}

void parallel_for(int count, int threads, const std::function<void(int)>& body) {
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (int i = t; i < count; i += threads) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("MVLAB_THREADS")) {
    const int k = std::atoi(env);
    if (k > 0) return k;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace mvlab
