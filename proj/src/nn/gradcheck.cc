// Copyright 2026 The reftrack Authors
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

#include "reftrack/nn/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace reftrack::nn {

std::vector<double> CentralDifferences(const std::function<double()>& loss,
                                       std::span<double> x, double step) {
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + step;
    const double up = loss();
    x[i] = saved - step;
    const double down = loss();
    x[i] = saved;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

double RelativeError(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), kRelativeErrorFloor});
  return std::abs(a - b) / scale;
}

double MaxRelativeError(std::span<const double> analytic,
                        std::span<const double> numeric) {
  if (analytic.size() != numeric.size()) {
    throw std::invalid_argument("MaxRelativeError: length mismatch");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    worst = std::max(worst, RelativeError(analytic[i], numeric[i]));
  }
  return worst;
}

}  // namespace reftrack::nn
