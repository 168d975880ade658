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

// Built-in checks: tape gradients against central differences, and the
// tracking metrics against a naive reimplementation and hand values.

#ifndef REFTRACK_SELFTEST_H_
#define REFTRACK_SELFTEST_H_

#include <string>
#include <vector>

namespace reftrack {

inline constexpr double kSelftestGradTolerance = 1e-4;
inline constexpr double kSelftestMetricTolerance = 1e-12;

struct SelftestCheck {
  std::string name;
  // Max relative error for gradient checks, max absolute difference for
  // metric checks.
  double error = 0.0;
  double tolerance = 0.0;
  bool gradient = false;
  bool passed() const { return error < tolerance; }
};

struct SelftestReport {
  std::vector<SelftestCheck> checks;
  double seconds = 0.0;

  bool passed() const;
  double MaxGradientError() const;
};

// Deterministic for a given seed.
SelftestReport RunSelftest(unsigned seed = 1);

// One line per check, then a summary line with the max gradient error.
std::string FormatSelftest(const SelftestReport& report);

}  // namespace reftrack

#endif  // REFTRACK_SELFTEST_H_
