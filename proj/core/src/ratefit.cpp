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

#include "mvlab/ratefit.hpp"

#include <cmath>

#include "mvlab/errors.hpp"

namespace mvlab {

namespace {

struct LineFit {
  double slope = 0.0;
  double slope_se = 0.0;
  double r2 = 1.0;
};

LineFit least_squares(const std::vector<std::pair<double, double>>& xy) {
  const size_t n = xy.size();
  double sx = 0.0, sy = 0.0;
  for (const auto& [x, y] : xy) {
    sx += x;
    sy += y;
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& [x, y] : xy) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
    syy += (y - my) * (y - my);
  }
  if (sxx <= 0.0) throw InputError("rate fit: degenerate abscissae");
  LineFit fit;
  fit.slope = sxy / sxx;
  double ss_res = 0.0;
  const double intercept = my - fit.slope * mx;
  for (const auto& [x, y] : xy) {
    const double r = y - (intercept + fit.slope * x);
    ss_res += r * r;
  }
  fit.r2 = syy > 0.0 ? std::max(0.0, 1.0 - ss_res / syy) : 1.0;
  fit.slope_se = n > 2 ? std::sqrt(ss_res / (n - 2.0) / sxx) : 0.0;
  return fit;
}

std::vector<std::pair<double, double>> to_log_space(
    const std::vector<std::pair<double, double>>& points, bool log_x) {
  if (points.size() < 3) throw InputError("rate fit: need at least 3 points");
  std::vector<std::pair<double, double>> xy;
  xy.reserve(points.size());
  for (const auto& [x, v] : points) {
    if (!(v > 0.0)) throw InputError("rate fit: values must be positive");
    if (log_x && !(x > 0.0)) throw InputError("rate fit: abscissae must be positive");
    xy.emplace_back(log_x ? std::log(x) : x, std::log(v));
  }
  return xy;
}

}  // namespace

RateFit fit_exponential_rate(const std::vector<std::pair<double, double>>& points) {
  const auto xy = to_log_space(points, false);
  const LineFit lf = least_squares(xy);
  RateFit out;
  out.estimate = -lf.slope;
  out.ci_lo = out.estimate - 1.96 * lf.slope_se;
  out.ci_hi = out.estimate + 1.96 * lf.slope_se;
  out.r2 = lf.r2;
  out.points = xy;
  return out;
}

RateFit fit_loglog_slope(const std::vector<std::pair<double, double>>& points) {
  const auto xy = to_log_space(points, true);
  const LineFit lf = least_squares(xy);
  RateFit out;
  out.estimate = lf.slope;
  out.ci_lo = lf.slope - 1.96 * lf.slope_se;
  out.ci_hi = lf.slope + 1.96 * lf.slope_se;
  out.r2 = lf.r2;
  out.points = xy;
  return out;
}

}  // namespace mvlab
