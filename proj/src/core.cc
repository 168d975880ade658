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

#include "reftrack/core.h"

#include <cmath>
#include <string>

namespace reftrack {

ObsVector Observation::Flat() const {
  ObsVector flat;
  flat << q, qdot;
  return flat;
}

Observation Observation::FromFlat(const ObsVector& flat) {
  Observation o;
  o.q = flat.head<kNumJoints>();
  o.qdot = flat.tail<kNumJoints>();
  return o;
}

bool Observation::AllFinite() const {
  return q.allFinite() && qdot.allFinite();
}

void Trajectory::Validate(double max_step) const {
  if (points.size() < 2) {
    throw std::invalid_argument("trajectory " + id + ": fewer than 2 points");
  }
  if (!(dt > 0.0)) {
    throw std::invalid_argument("trajectory " + id + ": dt must be positive");
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!points[i].allFinite()) {
      throw std::invalid_argument("trajectory " + id + ": point " +
                                  std::to_string(i) + " is not finite");
    }
    if (i > 0) {
      const double step = (points[i] - points[i - 1]).cwiseAbs().maxCoeff();
      if (step > max_step) {
        throw std::invalid_argument(
            "trajectory " + id + ": step " + std::to_string(i) + " moves " +
            std::to_string(step) + " rad, above the limit " +
            std::to_string(max_step));
      }
    }
  }
}

HistoryWindow HistoryWindow::FromPrefix(std::span<const Observation> obs,
                                        std::span<const JointVector> refs,
                                        int h) {
  return HistoryWindow(PadHistory(obs, h), PadHistory(refs, h));
}

HistoryWindow HistoryWindow::Shifted(const Observation& new_obs,
                                     const JointVector& new_ref) const {
  std::vector<Observation> obs(obs_.begin() + 1, obs_.end());
  obs.push_back(new_obs);
  std::vector<JointVector> refs(refs_.begin() + 1, refs_.end());
  refs.push_back(new_ref);
  return HistoryWindow(std::move(obs), std::move(refs));
}

Eigen::VectorXd FlattenInputs(const HistoryWindow& window,
                              std::span<const JointVector> extra) {
  const auto n = static_cast<Eigen::Index>(window.obs().size());
  Eigen::VectorXd flat(kObsDim * n + kNumJoints * n +
                       kNumJoints * static_cast<Eigen::Index>(extra.size()));
  Eigen::Index k = 0;
  for (const Observation& o : window.obs()) {
    flat.segment<kObsDim>(k) = o.Flat();
    k += kObsDim;
  }
  for (const JointVector& r : window.refs()) {
    flat.segment<kNumJoints>(k) = r;
    k += kNumJoints;
  }
  for (const JointVector& e : extra) {
    flat.segment<kNumJoints>(k) = e;
    k += kNumJoints;
  }
  return flat;
}

namespace {

std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t DeriveSeed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  return SplitMix64(SplitMix64(SplitMix64(base) ^ a) ^ b);
}

}  // namespace reftrack
