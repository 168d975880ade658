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

// Central finite differences, the reference against which tape gradients
// are checked. Nothing here touches the tape.

#ifndef REFTRACK_NN_GRADCHECK_H_
#define REFTRACK_NN_GRADCHECK_H_

#include <functional>
#include <span>
#include <vector>

namespace reftrack::nn {

inline constexpr double kFiniteDifferenceStep = 1e-4;
// Gradients smaller than this are compared on an absolute scale.
inline constexpr double kRelativeErrorFloor = 1e-6;

// d loss / d x[i] by (f(x + s e_i) - f(x - s e_i)) / 2s. Entries of `x` are
// perturbed in place and restored exactly.
std::vector<double> CentralDifferences(const std::function<double()>& loss,
                                       std::span<double> x,
                                       double step = kFiniteDifferenceStep);

// |a - b| / max(|a|, |b|, kRelativeErrorFloor)
double RelativeError(double a, double b);

// Maximum RelativeError over paired entries.
double MaxRelativeError(std::span<const double> analytic,
                        std::span<const double> numeric);

}  // namespace reftrack::nn

#endif  // REFTRACK_NN_GRADCHECK_H_
