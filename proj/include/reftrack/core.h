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

// Domain types shared by every stage of the tracking pipeline: joint
// vectors, observations, sampled trajectories and the fixed-length history
// windows that condition both networks.

#ifndef REFTRACK_CORE_H_
#define REFTRACK_CORE_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace reftrack {

inline constexpr int kNumJoints = 4;
inline constexpr int kObsDim = 2 * kNumJoints;
// 20 Hz control and sampling period, seconds.
inline constexpr double kControlPeriod = 0.05;

// Joint order is fixed throughout: swing, boom, arm, bucket.
enum Joint : int { kSwing = 0, kBoom = 1, kArm = 2, kBucket = 3 };

// Angles in radians. Also used for reference positions, policy actions
// (radians) and valve commands (normalized duty in [-1, 1]).
using JointVector = Eigen::Vector4d;
using ObsVector = Eigen::Matrix<double, kObsDim, 1>;

struct Observation {
  JointVector q = JointVector::Zero();
  JointVector qdot = JointVector::Zero();

  // (q1..q4, qdot1..qdot4)
  ObsVector Flat() const;
  static Observation FromFlat(const ObsVector& flat);
  bool AllFinite() const;

  friend bool operator==(const Observation& a, const Observation& b) {
    return a.q == b.q && a.qdot == b.qdot;
  }
};

struct Trajectory {
  double dt = kControlPeriod;
  std::vector<JointVector> points;
  std::string id;

  // Number of control steps T; points run q*_0 .. q*_T.
  int steps() const { return static_cast<int>(points.size()) - 1; }

  // Throws std::invalid_argument when length < 2, dt <= 0, a point is
  // non-finite, or consecutive points differ by more than max_step.
  void Validate(double max_step = 0.05) const;
};

// Left-pads `prefix` with copies of its first element to exactly h + 1
// entries. Longer prefixes keep only their last h + 1 entries.
template <typename T>
std::vector<T> PadHistory(std::span<const T> prefix, int h) {
  if (prefix.empty()) throw std::invalid_argument("PadHistory: empty prefix");
  if (h < 1) throw std::invalid_argument("PadHistory: h must be >= 1");
  const std::size_t n = static_cast<std::size_t>(h) + 1;
  std::vector<T> out;
  out.reserve(n);
  if (prefix.size() >= n) {
    out.assign(prefix.end() - n, prefix.end());
  } else {
    out.assign(n - prefix.size(), prefix.front());
    out.insert(out.end(), prefix.begin(), prefix.end());
  }
  return out;
}

// Observation and reference histories o_{t-h}..o_t and q^r_{t-h}..q^r_t.
class HistoryWindow {
 public:
  // Builds a window from (possibly short) prefixes, padding per PadHistory.
  static HistoryWindow FromPrefix(std::span<const Observation> obs,
                                  std::span<const JointVector> refs, int h);

  int h() const { return static_cast<int>(obs_.size()) - 1; }
  const std::vector<Observation>& obs() const { return obs_; }
  const std::vector<JointVector>& refs() const { return refs_; }

  // Drops the oldest entry of each sequence and appends the new one.
  HistoryWindow Shifted(const Observation& new_obs,
                        const JointVector& new_ref) const;

  friend bool operator==(const HistoryWindow&, const HistoryWindow&) = default;

 private:
  HistoryWindow(std::vector<Observation> obs, std::vector<JointVector> refs)
      : obs_(std::move(obs)), refs_(std::move(refs)) {}

  std::vector<Observation> obs_;
  std::vector<JointVector> refs_;
};

// Network input layout: all of o_H (8 values each, oldest first), then all of
// q^r_H (4 each), then `extra` in order.
Eigen::VectorXd FlattenInputs(const HistoryWindow& window,
                              std::span<const JointVector> extra);

// Input lengths implied by the layout above.
constexpr int ModelInputDim(int h) { return 12 * h + 16; }
constexpr int PolicyInputDim(int h) { return 16 * h + 12; }

// Independent stream seed for (base, a, b) via SplitMix64 finalization, so
// per-item random streams do not depend on processing order.
std::uint64_t DeriveSeed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

}  // namespace reftrack

#endif  // REFTRACK_CORE_H_
