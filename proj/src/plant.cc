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

#include "reftrack/plant.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace reftrack {

namespace {

const char* const kJointNames[kNumJoints] = {"swing", "boom", "arm", "bucket"};

double Sign(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace

PlantConfig PlantConfig::Default() {
  PlantConfig c;
  const double gain[] = {0.8, 0.6, 0.8, 1.0};
  const double tau[] = {0.3, 0.4, 0.35, 0.25};
  const double dead[] = {0.05, 0.08, 0.08, 0.06};
  const int delay[] = {4, 3, 3, 2};
  const double vmax[] = {0.6, 0.5, 0.7, 0.9};
  const double lo[] = {-std::numbers::pi, -1.2, -0.2, -1.5};
  const double hi[] = {std::numbers::pi, 1.0, 2.5, 2.0};
  for (int i = 0; i < kNumJoints; ++i) {
    c.joints[i] = JointParams{gain[i], tau[i], dead[i], delay[i], vmax[i], lo[i], hi[i]};
  }
  return c;
}

void PlantConfig::Validate() const {
  for (int i = 0; i < kNumJoints; ++i) {
    const JointParams& j = joints[i];
    const std::string name = kJointNames[i];
    if (!(j.time_constant > 0.0)) throw std::invalid_argument(name + ": time_constant must be > 0");
    if (!(j.dead_zone >= 0.0)) throw std::invalid_argument(name + ": dead_zone must be >= 0");
    if (j.delay < 0) throw std::invalid_argument(name + ": delay must be >= 0");
    if (!(j.velocity_limit > 0.0)) throw std::invalid_argument(name + ": velocity_limit must be > 0");
    if (!(j.position_min < j.position_max)) {
      throw std::invalid_argument(name + ": position limits must be ordered");
    }
    if (!std::isfinite(j.gain)) throw std::invalid_argument(name + ": gain must be finite");
  }
  if (substeps < 1) throw std::invalid_argument("substeps must be >= 1");
  if (!(command_noise >= 0.0)) throw std::invalid_argument("command_noise must be >= 0");
}

JointVector PlantConfig::PositionMin() const {
  JointVector v;
  for (int i = 0; i < kNumJoints; ++i) v[i] = joints[i].position_min;
  return v;
}

JointVector PlantConfig::PositionMax() const {
  JointVector v;
  for (int i = 0; i < kNumJoints; ++i) v[i] = joints[i].position_max;
  return v;
}

PdGains PdGains::Default() {
  PdGains g;
  g.kp << 4.5, 7.5, 5.0, 4.0;
  g.kd << 0.5, 0.8, 0.6, 0.4;
  return g;
}

void PdGains::Validate() const {
  if ((kp.array() < 0.0).any() || (kd.array() < 0.0).any() || !kp.allFinite() ||
      !kd.allFinite()) {
    throw std::invalid_argument("PD gains must be finite and non-negative");
  }
}

JointVector PdControl(const PdGains& gains, const JointVector& q,
                      const JointVector& q_prev, const JointVector& qr_next,
                      const JointVector& qr, double dt) {
  const JointVector error = qr_next - q;
  const JointVector error_rate = ((qr_next - qr) - (q - q_prev)) / dt;
  const JointVector raw = gains.kp.cwiseProduct(error) + gains.kd.cwiseProduct(error_rate);
  return raw.cwiseMax(-1.0).cwiseMin(1.0);
}

double DeadZone(double command, double half_width, double qdot, double velocity_limit) {
  const double width = half_width * (1.0 + 0.5 * std::abs(qdot) / velocity_limit);
  return Sign(command) * std::max(std::abs(command) - width, 0.0);
}

Point3 ForwardKinematics(const JointVector& q, const LinkGeometry& g) {
  const double a1 = q[kBoom];
  const double a2 = a1 + q[kArm];
  const double a3 = a2 + q[kBucket];
  const double r = g.pivot_x + g.boom * std::cos(a1) + g.arm * std::cos(a2) +
                   g.bucket * std::cos(a3);
  const double z = g.pivot_z + g.boom * std::sin(a1) + g.arm * std::sin(a2) +
                   g.bucket * std::sin(a3);
  return Point3{std::cos(q[kSwing]) * r, std::sin(q[kSwing]) * r, z};
}

Excavator::Excavator(PlantConfig config) : config_(std::move(config)) {
  config_.Validate();
}

Observation Excavator::Reset(const JointVector& q0, int episode_steps,
                             std::uint64_t noise_seed) {
  if (!q0.allFinite()) throw std::invalid_argument("Reset: q0 not finite");
  for (int i = 0; i < kNumJoints; ++i) {
    const JointParams& j = config_.joints[i];
    if (q0[i] < j.position_min || q0[i] > j.position_max) {
      throw std::invalid_argument(std::string("Reset: ") + kJointNames[i] +
                                  " angle outside position limits");
    }
    delay_lines_[i].assign(static_cast<std::size_t>(j.delay), 0.0);
  }
  obs_.q = q0;
  obs_.qdot.setZero();
  tick_ = 0;
  episode_steps_ = episode_steps;
  noise_rng_.seed(noise_seed);
  return obs_;
}

double Excavator::Reach(const JointVector& q) const {
  const LinkGeometry& g = config_.geometry;
  const double full = g.pivot_x + g.boom + g.arm + g.bucket;
  const double a1 = q[kBoom];
  const double a2 = a1 + q[kArm];
  const double a3 = a2 + q[kBucket];
  const double r = g.pivot_x + g.boom * std::cos(a1) + g.arm * std::cos(a2) +
                   g.bucket * std::cos(a3);
  return std::clamp(r / full, 0.0, 1.0);
}

bool Excavator::Step(const JointVector& u) {
  if (!u.allFinite()) throw std::invalid_argument("Step: command not finite");
  if ((u.array().abs() > 1.0).any()) {
    throw std::invalid_argument("Step: command outside [-1, 1]");
  }
  JointVector command = u;
  if (config_.command_noise > 0.0) {
    std::normal_distribution<double> noise(0.0, config_.command_noise);
    for (int i = 0; i < kNumJoints; ++i) command[i] += noise(noise_rng_);
  }

  // Transport delay, then the velocity-dependent dead zone.
  JointVector effective;
  for (int i = 0; i < kNumJoints; ++i) {
    const JointParams& j = config_.joints[i];
    double c = command[i];
    if (j.delay > 0) {
      delay_lines_[i].push_back(c);
      c = delay_lines_[i].front();
      delay_lines_[i].pop_front();
    }
    effective[i] = DeadZone(c, j.dead_zone, obs_.qdot[i], j.velocity_limit);
  }
  // Valve cross-talk.
  const double total = effective.sum();
  JointVector coupled;
  for (int i = 0; i < kNumJoints; ++i) {
    coupled[i] = effective[i] + config_.cross_bleed * (total - effective[i]);
  }

  const double h = kControlPeriod / config_.substeps;
  JointVector& q = obs_.q;
  JointVector& qdot = obs_.qdot;
  for (int s = 0; s < config_.substeps; ++s) {
    JointVector qddot;
    for (int i = 0; i < kNumJoints; ++i) {
      const JointParams& j = config_.joints[i];
      qddot[i] = (j.gain * coupled[i] - qdot[i]) / j.time_constant;
    }
    qddot[kBoom] -= config_.gravity_sag * std::cos(q[kBoom]);
    qddot[kArm] -= 0.5 * config_.gravity_sag * std::cos(q[kBoom] + q[kArm]);
    qddot[kSwing] /= 1.0 + config_.swing_inertia * Reach(q);

    // Semi-implicit Euler: velocity first, then position with the new velocity.
    for (int i = 0; i < kNumJoints; ++i) {
      const JointParams& j = config_.joints[i];
      qdot[i] = std::clamp(qdot[i] + h * qddot[i], -j.velocity_limit, j.velocity_limit);
      q[i] += h * qdot[i];
      if (q[i] <= j.position_min) {
        q[i] = j.position_min;
        qdot[i] = 0.0;
      } else if (q[i] >= j.position_max) {
        q[i] = j.position_max;
        qdot[i] = 0.0;
      }
    }
  }
  ++tick_;
  return episode_steps_ > 0 && tick_ >= episode_steps_;
}

std::vector<Observation> StepResponse(const PlantConfig& config, int joint,
                                      double command, int ticks,
                                      const JointVector& q0) {
  if (joint < 0 || joint >= kNumJoints) throw std::invalid_argument("StepResponse: bad joint");
  Excavator plant(config);
  std::vector<Observation> out;
  out.push_back(plant.Reset(q0));
  JointVector u = JointVector::Zero();
  u[joint] = command;
  for (int t = 0; t < ticks; ++t) {
    plant.Step(u);
    out.push_back(plant.GetObservation());
  }
  return out;
}

}  // namespace reftrack
