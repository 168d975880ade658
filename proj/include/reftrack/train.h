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


// Model and policy training: window sampling, multi-step rollouts through
// the learned closed-loop model, the two losses, and the optimization loops.

#ifndef REFTRACK_TRAIN_H_
#define REFTRACK_TRAIN_H_

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "reftrack/collect.h"
#include "reftrack/core.h"
#include "reftrack/nn/mlp.h"
#include "reftrack/nn/params.h"
#include "reftrack/nn/tape.h"

namespace reftrack {

struct TrainConfig {
  int h = 20;
  int epochs = 2000;
  int batch_size = 2048;
  double lr = 1e-5;
  // Cosine decay of the step size to lr * lr_final over the run; 1 keeps it
  // constant.
  double lr_final = 1.0;
  double weight_decay = 0.003;
  double gamma = 0.98;
  double k_smooth = 1.0;
  std::uint64_t seed = 0;
  int hidden_layers = 6;
  int hidden_width = 512;
  // Windows drawn per epoch after shuffling; 0 uses every valid window.
  int windows_per_epoch = 0;
  // Gradients are computed per chunk of this many windows and summed in
  // chunk order, so results do not depend on the thread count.
  int chunk_size = 32;
  // Held-out windows scored after each epoch; 0 scores all of them.
  int eval_windows = 256;

  // Throws std::invalid_argument naming the bad field.
  void Validate() const;
};

// Output ranges: 0.1 rad per step for position changes, 0.5 rad/s for
// velocity changes, 0.1 rad for policy actions.
nn::MlpSpec ModelSpec(int h, int hidden_layers, int hidden_width);
nn::MlpSpec PolicySpec(int h, int hidden_layers, int hidden_width);

// Per-quantity input statistics of a dataset, tiled over the history slots
// of the network input layout.
struct InputStats {
  ObsVector obs_mean, obs_std;
  JointVector ref_mean, ref_std;
  JointVector desired_mean, desired_std;
};
InputStats ComputeInputStats(const Dataset& dataset);
void ApplyModelStats(const InputStats& stats, nn::NetworkParams& model);
void ApplyPolicyStats(const InputStats& stats, nn::NetworkParams& policy);

// A window start: episode index and step t within it.
struct WindowRef {
  int episode = 0;
  int t = 0;
  friend bool operator==(const WindowRef&, const WindowRef&) = default;
};

// Starts with recorded targets o_{t+1}..o_{t+h}: t + h <= T - 1.
std::vector<WindowRef> ModelWindowStarts(const Dataset& dataset, int h);
// Every step of every episode; desired positions past the end repeat q*_T.
std::vector<WindowRef> PolicyWindowStarts(const Dataset& dataset, int h);

// Column-batched windows. Histories are oldest first and padded with the
// first recorded entry of the episode.
struct ModelBatch {
  std::vector<nn::Matrix> obs_hist;  // h + 1 entries, 8 x B
  std::vector<nn::Matrix> ref_hist;  // h + 1 entries, 4 x B
  std::vector<nn::Matrix> refs;      // q^r_{t+1..t+h}, 4 x B
  std::vector<nn::Matrix> targets;   // o_{t+1..t+h}, 8 x B
  int batch() const { return static_cast<int>(obs_hist.front().cols()); }
};
struct PolicyBatch {
  std::vector<nn::Matrix> obs_hist;  // h + 1 entries, 8 x B
  std::vector<nn::Matrix> ref_hist;  // h + 1 entries, 4 x B
  std::vector<nn::Matrix> desired;   // q*_{t+1..t+2h}, 4 x B
  int batch() const { return static_cast<int>(obs_hist.front().cols()); }
};
ModelBatch GatherModelBatch(const Dataset& dataset, std::span<const WindowRef> windows, int h);
PolicyBatch GatherPolicyBatch(const Dataset& dataset, std::span<const WindowRef> windows, int h);

// o-hat_{i+1} = o-hat_i + g(o_H, q^r_H, q^r_{i+1}); histories shift to take
// in each prediction. Returns h predictions, 8 x B each.
std::vector<nn::Tape::Var> ModelRolloutOnTape(nn::Tape& tape, const nn::Binding& model,
                                              const ModelBatch& batch);

struct PolicyRolloutVars {
  std::vector<nn::Tape::Var> actions;      // a_t..a_{t+h-1}, 4 x B
  std::vector<nn::Tape::Var> predictions;  // o-hat_{t+1..t+h}, 8 x B
};
// a_i = pi(o_H, q^r_H, q*_F), q^r_{i+1} = q*_{i+1} + a_i, then one model step.
PolicyRolloutVars PolicyRolloutOnTape(nn::Tape& tape, const nn::Binding& policy,
                                      const nn::Binding& model, const PolicyBatch& batch);

// Untaped evaluation of the same rollouts.
std::vector<nn::Matrix> ModelRollout(const nn::NetworkParams& model, const ModelBatch& batch);
struct PolicyRolloutResult {
  std::vector<nn::Matrix> actions;
  std::vector<nn::Matrix> predictions;
};
PolicyRolloutResult PolicyRollout(const nn::NetworkParams& policy,
                                  const nn::NetworkParams& model, const PolicyBatch& batch);

// (1/h) sum_i |o-hat_i - o_i|^2 + w |theta|^2 for one window.
double ModelLoss(std::span<const ObsVector> predictions, std::span<const ObsVector> targets,
                 double theta_squared_norm, double w);

// (1/h) sum_i gamma^i |q-hat_i - q*_i|^2
//   + k_smooth / (h - 1) sum_{i>=2} |a_i - a_{i-1}|^2 for one window.
// The second term is dropped when h == 1.
struct PolicyLossParts {
  double track = 0.0;
  double reg = 0.0;
  double total() const { return track + reg; }
};
PolicyLossParts PolicyLoss(std::span<const JointVector> q_pred,
                           std::span<const JointVector> qstar,
                           std::span<const JointVector> actions, double gamma, double k_smooth);

// Batch-mean losses recorded on a tape. `scale` multiplies the per-window
// sums, typically 1 / (windows in the batch).
nn::Tape::Var ModelDataLossOnTape(nn::Tape& tape, std::span<const nn::Tape::Var> predictions,
                                  const ModelBatch& batch, double scale);
struct PolicyLossVars {
  nn::Tape::Var total, track, reg;
};
PolicyLossVars PolicyLossOnTape(nn::Tape& tape, const PolicyRolloutVars& rollout,
                                const PolicyBatch& batch, double gamma, double k_smooth,
                                double scale);

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;
  // Policy only: the two loss terms and the model-predicted tracking MAE
  // (radians) over the epoch's training windows.
  double track = 0.0;
  double reg = 0.0;
  double train_metric = 0.0;
  // Model: held-out h-step position MAE. Policy: held-out model-predicted
  // tracking MAE. Radians; NaN without held-out data.
  double heldout_metric = 0.0;
};

struct TrainResult {
  nn::NetworkParams params;
  // Parameters before the first update (after initialization or warm start).
  nn::NetworkParams initial;
  std::vector<EpochStats> curve;
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, nn::NetworkParams last_good, int epoch)
      : std::runtime_error(what), last_good_(std::move(last_good)), epoch_(epoch) {}
  const nn::NetworkParams& last_good() const { return last_good_; }
  int epoch() const { return epoch_; }

 private:
  nn::NetworkParams last_good_;
  int epoch_;
};

// Trains g. Without `warm_start` the network is initialized from
// config.seed and its input statistics come from `train`; with it, training
// continues from those parameters and statistics with a fresh optimizer.
// Throws TrainingDiverged, carrying the parameters before the failing
// update, if a loss or gradient turns non-finite.
TrainResult TrainModel(const Dataset& train, const Dataset* heldout, const TrainConfig& config,
                       const nn::NetworkParams* warm_start = nullptr, int threads = 1);

// Trains pi through the frozen model `model`.
TrainResult TrainPolicy(const Dataset& train, const Dataset* heldout,
                        const nn::NetworkParams& model, const TrainConfig& config,
                        const nn::NetworkParams* warm_start = nullptr, int threads = 1);

// h-step position prediction error over model windows (radians), from the
// learned model and from persistence (o-hat_{t+i} = o_t).
struct PredictionError {
  double model = 0.0;
  double persistence = 0.0;
  long windows = 0;
};
PredictionError ModelPredictionError(const nn::NetworkParams& model, const Dataset& dataset,
                                     int h, int threads = 1);
// The same, one entry per episode.
std::vector<PredictionError> ModelPredictionErrorPerEpisode(const nn::NetworkParams& model,
                                                            const Dataset& dataset, int h,
                                                            int threads = 1);

// Model-predicted tracking MAE |q-hat - q*| of `policy` over policy windows
// (radians).
double PolicyModelTrackingError(const nn::NetworkParams& policy,
                                const nn::NetworkParams& model, const Dataset& dataset, int h,
                                int threads = 1);

// Checks a model/policy pair against a horizon; throws std::invalid_argument.
void CheckCompatible(const nn::NetworkParams& model, const nn::NetworkParams& policy, int h);

}  // namespace reftrack

#endif  // REFTRACK_TRAIN_H_
