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

// Synthetic truck-loading cycles: position the bucket, load, swing over,
// dump, and return. Keypoints and phase durations are jittered per cycle.

#ifndef REFTRACK_REFGEN_H_
#define REFTRACK_REFGEN_H_

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "reftrack/core.h"

namespace reftrack {

struct CycleSpec {
  // start, dig, lift-transfer, dump; the cycle returns to start.
  std::array<JointVector, 4> keypoints;
  // Duration of each of the four moves, seconds.
  std::array<double, 4> durations{4.0, 5.0, 6.0, 5.0};
  // Uniform jitter half-width applied to every keypoint component, radians.
  double keypoint_jitter = 0.1;
  // Relative uniform jitter on each duration.
  double duration_jitter = 0.15;
  // Largest allowed change between consecutive samples; phases that would
  // exceed it are stretched.
  double max_step = 0.05;
  double dt = kControlPeriod;

  static CycleSpec Default();
};

// `n` cycles, deterministic in `seed`. Each phase is a cubic Hermite segment
// with zero velocity at both keypoints. Throws std::invalid_argument if a
// keypoint plus jitter can leave [lo, hi].
std::vector<Trajectory> GenerateCycles(const CycleSpec& spec, int n, std::uint64_t seed,
                                       const JointVector& lo, const JointVector& hi);

// Deterministic shuffled split into (train, test).
std::pair<std::vector<Trajectory>, std::vector<Trajectory>> SplitTrajectories(
    const std::vector<Trajectory>& trajs, int n_train, int n_test, std::uint64_t seed);

}  // namespace reftrack

#endif  // REFTRACK_REFGEN_H_
