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

// Synthetic four-joint excavator driven by valve commands, and the PD
// position controller that closes the loop around it.
//
// Each joint is a first-order velocity actuator behind a transport delay and
// a velocity-dependent dead zone, with cross-command bleed between valves,
// gravity sag on boom and arm, and swing inertia growing with reach. None of
// the numbers here describe a particular machine.

#ifndef REFTRACK_PLANT_H_
#define REFTRACK_PLANT_H_

#include <array>
#include <cstdint>
#include <deque>
#include <random>
#include <vector>

#include "reftrack/core.h"

namespace reftrack {

struct JointParams {
  double gain = 1.0;            // rad/s per unit command
  double time_constant = 0.3;   // s
  double dead_zone = 0.0;       // unit command, half width at rest
  int delay = 0;                // control ticks
  double velocity_limit = 1.0;  // rad/s
  double position_min = -3.0;   // rad
  double position_max = 3.0;    // rad
};

// Boom pivot offset and link lengths, meters.
struct LinkGeometry {
  double boom = 3.7;
  double arm = 1.8;
  double bucket = 0.9;
  double pivot_x = 0.2;
  double pivot_z = 1.0;
};

struct PlantConfig {
  std::array<JointParams, kNumJoints> joints;
  double gravity_sag = 0.15;    // rad/s^2
  double swing_inertia = 0.5;   // swing slowdown at full reach
  double cross_bleed = 0.05;    // fraction of other valves' command leaking in
  int substeps = 5;
  double command_noise = 0.0;   // std of additive command noise; 0 disables
  LinkGeometry geometry;

  static PlantConfig Default();
  // Throws std::invalid_argument naming the offending field.
  void Validate() const;

  JointVector PositionMin() const;
  JointVector PositionMax() const;
};

struct PdGains {
  JointVector kp = JointVector::Zero();
  JointVector kd = JointVector::Zero();

  static PdGains Default();
  void Validate() const;
};

// u_i = clamp(kp (qr_next - q) + kd ((qr_next - qr) - (q - q_prev)) / dt, -1, 1)
JointVector PdControl(const PdGains& gains, const JointVector& q,
                      const JointVector& q_prev, const JointVector& qr_next,
                      const JointVector& qr, double dt = kControlPeriod);

// Velocity-dependent dead zone on one valve command:
// sign(c) * max(|c| - half_width * (1 + 0.5 |qdot| / velocity_limit), 0).
double DeadZone(double command, double half_width, double qdot, double velocity_limit);

struct Point3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

// Bucket tip position. The boom/arm/bucket chain lies in a vertical plane
// rotated about the vertical axis by the swing angle.
Point3 ForwardKinematics(const JointVector& q, const LinkGeometry& geometry);

class Excavator {
 public:
  explicit Excavator(PlantConfig config);

  // Rest state at q0 with empty (zero) command delay lines. done is reported
  // once `episode_steps` steps have been taken; 0 means never.
  Observation Reset(const JointVector& q0, int episode_steps = 0,
                    std::uint64_t noise_seed = 0);

  // Applies one control period of command u (components in [-1, 1]).
  // Returns true when the episode length has been reached.
  bool Step(const JointVector& u);

  Observation GetObservation() const { return obs_; }
  int tick() const { return tick_; }
  const PlantConfig& config() const { return config_; }

 private:
  double Reach(const JointVector& q) const;

  PlantConfig config_;
  Observation obs_;
  std::array<std::deque<double>, kNumJoints> delay_lines_;
  int tick_ = 0;
  int episode_steps_ = 0;
  std::mt19937_64 noise_rng_;
};

// Open-loop response of one joint to a constant command from rest, one
// observation per tick starting with the reset state. Other joints get zero
// command.
std::vector<Observation> StepResponse(const PlantConfig& config, int joint,
                                      double command, int ticks,
                                      const JointVector& q0);

}  // namespace reftrack

#endif  // REFTRACK_PLANT_H_
