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

// Policy deployment, tracking metrics, and the experiment drivers built on
// top of them: PD vs learned comparison, continual rounds and ablations.

#ifndef REFTRACK_EVAL_H_
#define REFTRACK_EVAL_H_

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "reftrack/collect.h"
#include "reftrack/config.h"
#include "reftrack/nn/params.h"
#include "reftrack/plant.h"
#include "reftrack/train.h"

namespace reftrack {

// Runs every trajectory once without exploration noise. With a policy,
// q^r_{t+1} = q*_{t+1} + policy(o_H, q^r_H, q*_F); without one, the PD
// controller follows q* directly. Episode k is seeded DeriveSeed(seed, k).
Dataset ImplementPolicy(const PlantConfig& plant, const PdGains& gains,
                        const std::vector<Trajectory>& trajs,
                        const nn::NetworkParams* policy, int h, std::uint64_t seed,
                        int threads = 1);

// Report units: degrees for angles, centimeters for bucket-tip distances.
struct TrajectoryMetrics {
  std::string traj_id;
  double mae = 0.0;
  double rmse = 0.0;
  double fmae = 0.0;
  double etd_mae = 0.0;
  double etd_fmae = 0.0;
  double smt1 = 0.0;
  double smt2 = 0.0;
};

struct MetricsReport {
  std::vector<TrajectoryMetrics> trajectories;
  // Field-wise mean over trajectories; traj_id is "mean".
  TrajectoryMetrics mean;
};

// Metrics of one measured sequence q_1..q_T against q*_1..q*_T (radians).
// MAE, RMSE pool all steps and joints; FMAE uses the last step;
// 1stoSMT = sqrt(1/T sum_{i>=2} |q_i - q_{i-1}|^2),
// 2ndoSMT = sqrt(1/(T-1) sum_{i>=3} |q_i - 2 q_{i-1} + q_{i-2}|^2).
TrajectoryMetrics SequenceMetrics(std::span<const JointVector> q,
                                  std::span<const JointVector> qstar,
                                  const LinkGeometry& geometry);

// Pairs the recorded o_t with q*_t for t = 0..T-1 of each episode. The
// record must hold one episode per trajectory, in order, whose desired
// positions equal the trajectory's; throws std::invalid_argument otherwise.
MetricsReport ComputeMetrics(const Dataset& record, const std::vector<Trajectory>& trajs,
                             const LinkGeometry& geometry);

inline constexpr double kRadToDeg = 57.29577951308232;
// Interaction time in hours for a number of control steps.
double InteractionHours(long steps, double dt = kControlPeriod);

// Everything one full pipeline produces.
struct PipelineRun {
  std::vector<Trajectory> train_trajs;
  std::vector<Trajectory> test_trajs;
  Dataset dataset;
  TrainResult model;
  TrainResult policy;
};

// Reference cycles, split, data collection, model then policy training.
// Pass `ratio` to override the configured noise mix.
PipelineRun RunPipeline(const RunConfig& config, int threads = 1,
                        std::optional<NoiseRatio> ratio = std::nullopt);
// The same, stopping after model training (policy left empty).
PipelineRun RunModelStage(const RunConfig& config, int threads = 1,
                          std::optional<NoiseRatio> ratio = std::nullopt);

struct ComparisonRow {
  std::string name;
  MetricsReport metrics;
  // Training interaction steps; absent for the hand-tuned controller.
  std::optional<long> interaction_steps;
};
struct ComparisonTable {
  std::string config_hash;
  std::vector<ComparisonRow> rows;
};

// PD-only and learned policy on the test trajectories.
ComparisonTable RunComparison(const RunConfig& config, const PipelineRun& run,
                              int threads = 1);

struct RoundResult {
  int round = 1;
  MetricsReport metrics;
  // Transitions collected in this round and in total so far.
  long new_steps = 0;
  long total_steps = 0;
  // Parameters the round started from and ended with.
  nn::NetworkParams model_initial, model_final;
  nn::NetworkParams policy_initial, policy_final;
};
struct RoundsResult {
  std::string config_hash;
  std::vector<RoundResult> rounds;
};

// Round 1 is `first` (a finished pipeline). Each later round runs the
// previous policy once over the training trajectories without noise, then
// retrains model and policy on that data alone, warm-started from the
// previous round, with fresh optimizer state and the config's fine-tuning
// schedule (finetune_epochs, lr * finetune_lr_scale).
RoundsResult RunRounds(const RunConfig& config, const PipelineRun& first, int n_rounds,
                       int threads = 1);

struct NoiseArm {
  std::string name;
  NoiseRatio ratio;
  long transitions = 0;
  // Model h-step position MAE (degrees) on training windows and on the
  // arm's own policy deployment over the test trajectories.
  double tr_mpe = 0.0;
  double te_mpe = 0.0;
  MetricsReport metrics;
};
struct SmoothArm {
  double k_smooth = 0.0;
  // Held-out model-predicted tracking MAE after training (degrees).
  double po_mae = 0.0;
  MetricsReport metrics;
};
struct AblationResult {
  std::string config_hash;
  std::vector<NoiseArm> noise;
  std::vector<SmoothArm> smooth;
};

// The three noise arms at equal volume (ratio.passes() passes each):
// no-noise, only-noise, and the configured mix.
std::vector<NoiseRatio> NoiseArmRatios(const NoiseRatio& mix);

// Fills one noise arm from a finished pipeline trained with `ratio`.
NoiseArm EvaluateNoiseArm(const RunConfig& config, const PipelineRun& run, const NoiseRatio& ratio,
                          const std::string& name, int threads = 1);

// Noise arms train from scratch; `mixed`, when given, is reused as the
// configured-mix arm. Smooth arms train policies on `base`'s model and data,
// reusing base's policy for the configured k_smooth.
AblationResult RunNoiseAblation(const RunConfig& config, const PipelineRun* mixed,
                                int threads = 1);
AblationResult RunSmoothAblation(const RunConfig& config, const PipelineRun& base,
                                 int threads = 1);

// Aligned plain-text tables and comma-separated rows (header first). Every
// output starts with a "# config <hash>" line.
std::string FormatMetrics(const MetricsReport& report, const std::string& config_hash);
std::string MetricsCsv(const MetricsReport& report, const std::string& config_hash);
std::string FormatComparison(const ComparisonTable& table);
std::string ComparisonCsv(const ComparisonTable& table);
std::string FormatRounds(const RoundsResult& rounds);
std::string RoundsCsv(const RoundsResult& rounds);
std::string FormatAblation(const AblationResult& ablation);
std::string AblationCsv(const AblationResult& ablation);

// One line per step: t, then q and q* per joint (degrees).
std::string TrackingSeries(const Episode& episode);

}  // namespace reftrack

#endif  // REFTRACK_EVAL_H_
