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

#ifndef MVLAB_RATEFIT_HPP
#define MVLAB_RATEFIT_HPP

#include <utility>
#include <vector>

namespace mvlab {

struct RateFit {
  double estimate = 0.0;
  double ci_lo = 0.0;   // 95% interval
  double ci_hi = 0.0;
  double r2 = 0.0;
  std::vector<std::pair<double, double>> points;  // regression-space (x, y)
};

// Least squares of log v on t; estimate is the decay rate (minus the slope).
// Needs at least 3 points with v > 0.
RateFit fit_exponential_rate(const std::vector<std::pair<double, double>>& points);

// Least squares of log v on log n; estimate is the slope.
RateFit fit_loglog_slope(const std::vector<std::pair<double, double>>& points);

}  // namespace mvlab

#endif  // MVLAB_RATEFIT_HPP
