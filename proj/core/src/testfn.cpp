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

#include "mvlab/testfn.hpp"

#include <cmath>

#include "mvlab/errors.hpp"

namespace mvlab {

NamedFn parse_named_fn(const std::string& name) {
  if (name == "id") return NamedFn::kId;
  if (name == "square") return NamedFn::kSquare;
  if (name == "cos") return NamedFn::kCos;
  if (name == "sigmoid") return NamedFn::kSigmoid;
  throw InputError("unknown test function '" + name + "'");
}

std::string named_fn_label(NamedFn f) {
  switch (f) {
    case NamedFn::kId: return "id";
    case NamedFn::kSquare: return "square";
    case NamedFn::kCos: return "cos";
    case NamedFn::kSigmoid: return "sigmoid";
  }
  return "?";
}

double eval_fn(NamedFn f, const Vec& x) {
  switch (f) {
    case NamedFn::kId: return x[0];
    case NamedFn::kSquare: return x.squaredNorm();
    case NamedFn::kCos: return std::cos(x[0]);
    case NamedFn::kSigmoid: return 1.0 / (1.0 + std::exp(-x[0]));
  }
  throw InputError("eval_fn: unknown function");
}

Vec eval_fn_gradient(NamedFn f, const Vec& x) {
  Vec g = Vec::Zero(x.size());
  switch (f) {
    case NamedFn::kId:
      g[0] = 1.0;
      return g;
    case NamedFn::kSquare:
      return 2.0 * x;
    case NamedFn::kCos:
      g[0] = -std::sin(x[0]);
      return g;
    case NamedFn::kSigmoid: {
      const double s = 1.0 / (1.0 + std::exp(-x[0]));
      g[0] = s * (1.0 - s);
      return g;
    }
  }
  throw InputError("eval_fn_gradient: unknown function");
}

bool fn_is_bounded(NamedFn f) { return f == NamedFn::kCos || f == NamedFn::kSigmoid; }

double gaussian_expectation(NamedFn f, const Vec& mean, const Mat& cov) {
  switch (f) {
    case NamedFn::kId:
      return mean[0];
    case NamedFn::kSquare:
      return mean.squaredNorm() + cov.trace();
    case NamedFn::kCos:
      if (mean.size() != 1) throw CapabilityError("gaussian_expectation: cos needs d = 1");
      return std::exp(-0.5 * cov(0, 0)) * std::cos(mean[0]);
    case NamedFn::kSigmoid:
      throw CapabilityError("gaussian_expectation: sigmoid has no closed form");
  }
  throw InputError("gaussian_expectation: unknown function");
}

}  // namespace mvlab
