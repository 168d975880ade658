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


// Closed-loop data collection: drive the plant through reference
// trajectories under the PD controller, with the reference perturbed by
// clipped Gaussian noise or adjusted by a policy, and record transitions.

#ifndef REFTRACK_COLLECT_H_
#define REFTRACK_COLLECT_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "reftrack/core.h"
#include "reftrack/nn/params.h"
#include "reftrack/plant.h"

namespace reftrack {

// One control step: o_t, the reference actually sent (q^r_{t+1}), the
// desired position (q*_{t+1}), the valve command u_t and the done flag.
struct Transition {
  int t = 0;
  Observation o;
  JointVector qr_next = JointVector::Zero();
  JointVector qstar_next = JointVector::Zero();
  JointVector u = JointVector::Zero();
  bool done = false;

  friend bool operator==(const Transition&, const Transition&) = default;
};

// All transitions from one pass over one reference trajectory.
struct Episode {
  std::string traj_id;
  int pass = 0;
  double sigma = 0.0;
  bool noisy = false;
  std::uint64_t seed = 0;
  std::vector<Transition> steps;

  int size() const { return static_cast<int>(steps.size()); }
  // q^r_t for t in [0, size()]; q^r_0 is the reset position.
  JointVector Ref(int t) const { return t == 0 ? steps[0].o.q : steps[t - 1].qr_next; }
  // q*_t for t in [1, size()], and q*_0 = q^r_0.
  JointVector Desired(int t) const { return t == 0 ? steps[0].o.q : steps[t - 1].qstar_next; }

  friend bool operator==(const Episode&, const Episode&) = default;
};

struct NoiseRatio {
  int noisy = 9;
  int clean = 2;

  int passes() const { return noisy + clean; }
  friend bool operator==(const NoiseRatio&, const NoiseRatio&) = default;
};

struct Dataset {
  std::string config_hash;
  std::uint64_t seed = 0;
  double sigma_max = 0.0;
  NoiseRatio ratio;
  // Canonical order: trajectory by trajectory, passes in order.
  std::vector<Episode> episodes;

  std::size_t NumTransitions() const;
  // Throws std::invalid_argument on broken structure: empty episodes,
  // non-contiguous t, done anywhere but the last step, non-finite values,
  // sigma outside [0, sigma_max].
  void Validate() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct EpisodeOptions {
  // Standard deviation of the reference noise; draws are clipped to
  // [-sigma, sigma] independently per joint and step.
  double sigma = 0.0;
  std::uint64_t seed = 0;
  // When set, q^r_{t+1} = q*_{t+1} + policy(o_H, q^r_H, q*_F) (+ noise).
  const nn::NetworkParams* policy = nullptr;
  int h = 0;
};

// One closed-loop pass over `traj`. Histories start as copies of o_0 and
// q^r_0 = q*_0; the desired-future window is padded with the final point.
Episode RunEpisode(const PlantConfig& plant, const PdGains& gains, const Trajectory& traj,
                   const EpisodeOptions& options);

Episode CollectTrajectory(const PlantConfig& plant, const PdGains& gains,
                          const Trajectory& traj, double sigma, std::uint64_t seed);

// ratio.noisy passes per trajectory with sigma ~ U(0, sigma_max], then
// ratio.clean passes with sigma = 0.
Dataset CollectDataset(const PlantConfig& plant, const PdGains& gains,
                       const std::vector<Trajectory>& trajs, double sigma_max,
                       NoiseRatio ratio, std::uint64_t seed, int threads = 1);

// One noise-free pass per trajectory with references adjusted by `policy`.
Dataset CollectWithPolicy(const PlantConfig& plant, const PdGains& gains,
                          const std::vector<Trajectory>& trajs,
                          const nn::NetworkParams& policy, int h, std::uint64_t seed,
                          int threads = 1);

// Re-simulates every episode from its first observation with the recorded
// commands and requires bit-identical observations. Throws
// std::runtime_error naming the first mismatch.
void ReplayCheck(const PlantConfig& plant, const Dataset& dataset);

}  // namespace reftrack

#endif  // REFTRACK_COLLECT_H_
