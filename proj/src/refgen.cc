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

#include "reftrack/refgen.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace reftrack {

namespace {

const char* const kKeypointNames[] = {"start", "dig", "lift-transfer", "dump"};

// Relative jitter on the whole cycle length, as a fraction of the per-phase
// duration jitter.
constexpr double kTotalJitterFraction = 1.0 / 6.0;

// Hermite basis with zero end tangents.
double Blend(double s) { return s * s * (3.0 - 2.0 * s); }

std::string CycleId(int k) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "cycle-%03d", k);
  return buf;
}

}  // namespace

CycleSpec CycleSpec::Default() {
  CycleSpec spec;
  spec.keypoints[0] << 0.0, -0.4, 0.6, 0.3;
  spec.keypoints[1] << 0.0, -0.7, 1.2, 1.1;
  spec.keypoints[2] << 1.2, -0.2, 0.8, 1.0;
  spec.keypoints[3] << 1.4, -0.1, 0.5, -0.5;
  return spec;
}

std::vector<Trajectory> GenerateCycles(const CycleSpec& spec, int n, std::uint64_t seed,
                                       const JointVector& lo, const JointVector& hi) {
  if (n < 1) throw std::invalid_argument("GenerateCycles: n must be >= 1");
  if (!(spec.dt > 0.0) || !(spec.max_step > 0.0)) {
    throw std::invalid_argument("GenerateCycles: dt and max_step must be positive");
  }
  for (std::size_t k = 0; k < spec.keypoints.size(); ++k) {
    for (int j = 0; j < kNumJoints; ++j) {
      const double v = spec.keypoints[k][j];
      if (v - spec.keypoint_jitter < lo[j] || v + spec.keypoint_jitter > hi[j]) {
        throw std::invalid_argument(std::string("GenerateCycles: keypoint '") +
                                    kKeypointNames[k] + "' joint " + std::to_string(j) +
                                    " leaves the position limits");
      }
    }
  }
  for (double d : spec.durations) {
    if (!(d > 0.0)) throw std::invalid_argument("GenerateCycles: durations must be > 0");
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<Trajectory> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int c = 0; c < n; ++c) {
    std::array<JointVector, 5> keys;
    for (int k = 0; k < 4; ++k) {
      for (int j = 0; j < kNumJoints; ++j) {
        keys[k][j] = spec.keypoints[k][j] + spec.keypoint_jitter * unit(rng);
      }
    }
    keys[4] = keys[0];

    // Phase durations jitter independently; the cycle as a whole stays
    // within a narrower band around its nominal length.
    std::array<double, 4> durations;
    double nominal = 0.0, jittered = 0.0;
    for (int phase = 0; phase < 4; ++phase) {
      durations[phase] = spec.durations[phase] * (1.0 + spec.duration_jitter * unit(rng));
      nominal += spec.durations[phase];
      jittered += durations[phase];
    }
    const double total = nominal * (1.0 + kTotalJitterFraction * spec.duration_jitter * unit(rng));
    for (double& d : durations) d *= total / jittered;

    Trajectory traj;
    traj.dt = spec.dt;
    traj.id = CycleId(c);
    traj.points.push_back(keys[0]);
    for (int phase = 0; phase < 4; ++phase) {
      const double duration = durations[phase];
      const JointVector delta = keys[phase + 1] - keys[phase];
      // Peak per-sample change of the blend is 1.5 * |delta| * dt / duration.
      int samples = std::max(1, static_cast<int>(std::lround(duration / spec.dt)));
      const double peak = 1.5 * delta.cwiseAbs().maxCoeff() / samples;
      if (peak > spec.max_step) {
        samples = static_cast<int>(std::ceil(1.5 * delta.cwiseAbs().maxCoeff() / spec.max_step));
      }
      for (int s = 1; s < samples; ++s) {
        const double b = Blend(static_cast<double>(s) / samples);
        traj.points.push_back(keys[phase] + b * delta);
      }
      traj.points.push_back(keys[phase + 1]);
    }
    traj.Validate(spec.max_step);
    out.push_back(std::move(traj));
  }
  return out;
}

std::pair<std::vector<Trajectory>, std::vector<Trajectory>> SplitTrajectories(
    const std::vector<Trajectory>& trajs, int n_train, int n_test, std::uint64_t seed) {
  if (n_train < 0 || n_test < 0 ||
      static_cast<std::size_t>(n_train + n_test) != trajs.size()) {
    throw std::invalid_argument("SplitTrajectories: n_train + n_test must equal " +
                                std::to_string(trajs.size()));
  }
  std::vector<std::size_t> order(trajs.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::pair<std::vector<Trajectory>, std::vector<Trajectory>> split;
  for (std::size_t k = 0; k < order.size(); ++k) {
    auto& dst = k < static_cast<std::size_t>(n_train) ? split.first : split.second;
    dst.push_back(trajs[order[k]]);
  }
  return split;
}

}  // namespace reftrack
