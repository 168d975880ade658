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


#include "reftrack/train.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include "reftrack/nn/adam.h"
#include "reftrack/parallel.h"

namespace reftrack {

namespace {

using nn::Matrix;
using nn::Tape;
using nn::Vector;

// Floor for per-quantity standard deviations. Keeps a quantity that is
// constant in the training data from being blown up at evaluation time.
constexpr double kStatsStdFloor = 1e-3;
// Windows per untaped evaluation chunk.
constexpr int kEvalChunk = 256;

int ModelHorizon(const nn::MlpSpec& spec) { return (spec.input_dim - 16) / 12; }
int PolicyHorizon(const nn::MlpSpec& spec) { return (spec.input_dim - 12) / 16; }

template <int N>
void MeanStd(const std::vector<Eigen::Matrix<double, N, 1>>& xs, Eigen::Matrix<double, N, 1>& mean,
             Eigen::Matrix<double, N, 1>& stddev) {
  mean.setZero();
  for (const auto& x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  stddev.setZero();
  for (const auto& x : xs) stddev += (x - mean).cwiseAbs2();
  stddev = (stddev / static_cast<double>(xs.size())).cwiseSqrt().cwiseMax(kStatsStdFloor);
}

void Tile(Vector& out, Eigen::Index& k, const Vector& v, int copies) {
  for (int c = 0; c < copies; ++c) {
    out.segment(k, v.size()) = v;
    k += v.size();
  }
}

// Accumulated per-chunk statistics. Loss terms are already scaled to batch
// means; error sums are raw.
struct ChunkStats {
  double loss = 0.0;
  double track = 0.0;
  double reg = 0.0;
  double err_sum = 0.0;
  double err_count = 0.0;
};

// Loss and gradient of one chunk at the given parameters; gradients go into
// the last argument.
using ChunkFn = std::function<ChunkStats(const nn::NetworkParams&, std::span<const WindowRef>,
                                         double, nn::ParamTensors&)>;
using HeldoutFn = std::function<double(const nn::NetworkParams&)>;

TrainResult RunTraining(nn::NetworkParams params, const std::vector<WindowRef>& windows,
                        const TrainConfig& config, int threads, double weight_decay,
                        const ChunkFn& chunk_fn, const HeldoutFn& heldout_fn) {
  if (windows.empty()) throw std::invalid_argument("training: dataset has no valid windows");
  TrainResult result;
  result.initial = params;
  nn::AdamOptions adam;
  adam.lr = config.lr;
  nn::AdamState state = nn::AdamState::For(params.tensors, adam);

  std::vector<WindowRef> order = windows;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const double progress =
        config.epochs > 1 ? static_cast<double>(epoch - 1) / (config.epochs - 1) : 0.0;
    state.options.lr =
        config.lr * (config.lr_final +
                     (1.0 - config.lr_final) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));
    order = windows;
    std::mt19937_64 rng(DeriveSeed(config.seed, 0x65706f6368ULL, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t used = order.size();
    if (config.windows_per_epoch > 0) {
      used = std::min(used, static_cast<std::size_t>(config.windows_per_epoch));
    }

    EpochStats stats;
    stats.epoch = epoch;
    double err_sum = 0.0, err_count = 0.0;
    int batches = 0;
    for (std::size_t begin = 0; begin < used; begin += config.batch_size) {
      const std::size_t end = std::min(used, begin + static_cast<std::size_t>(config.batch_size));
      const std::span<const WindowRef> batch(order.data() + begin, end - begin);
      const int chunks = static_cast<int>((batch.size() + config.chunk_size - 1) / config.chunk_size);
      const double scale = 1.0 / static_cast<double>(batch.size());
      std::vector<nn::ParamTensors> grads(static_cast<std::size_t>(chunks));
      std::vector<ChunkStats> chunk_stats(static_cast<std::size_t>(chunks));
      try {
        ParallelFor(chunks, threads, [&](int c) {
          const std::size_t lo = static_cast<std::size_t>(c) * config.chunk_size;
          const std::size_t n = std::min<std::size_t>(config.chunk_size, batch.size() - lo);
          grads[c] = params.tensors.ZerosLike();
          chunk_stats[c] = chunk_fn(params, batch.subspan(lo, n), scale, grads[c]);
        });
      } catch (const nn::NonFiniteError& e) {
        throw TrainingDiverged(std::string("training diverged: ") + e.what(), params, epoch);
      }
      nn::ParamTensors total = std::move(grads[0]);
      ChunkStats sum = chunk_stats[0];
      for (int c = 1; c < chunks; ++c) {
        total.AddScaled(grads[c], 1.0);
        sum.loss += chunk_stats[c].loss;
        sum.track += chunk_stats[c].track;
        sum.reg += chunk_stats[c].reg;
        sum.err_sum += chunk_stats[c].err_sum;
        sum.err_count += chunk_stats[c].err_count;
      }
      double loss = sum.loss;
      if (weight_decay > 0.0) {
        loss += weight_decay * params.tensors.SquaredNorm();
        total.AddScaled(params.tensors, 2.0 * weight_decay);
      }
      if (!std::isfinite(loss)) {
        throw TrainingDiverged("training diverged: non-finite loss at epoch " +
                                   std::to_string(epoch),
                               params, epoch);
      }
      try {
        nn::AdamStep(params.tensors, total, state);
      } catch (const std::runtime_error& e) {
        throw TrainingDiverged(std::string("training diverged: ") + e.what(), params, epoch);
      }
      stats.loss += loss;
      stats.track += sum.track;
      stats.reg += sum.reg;
      err_sum += sum.err_sum;
      err_count += sum.err_count;
      ++batches;
    }
    stats.loss /= batches;
    stats.track /= batches;
    stats.reg /= batches;
    stats.train_metric = err_count > 0 ? err_sum / err_count : 0.0;
    stats.heldout_metric =
        heldout_fn ? heldout_fn(params) : std::numeric_limits<double>::quiet_NaN();
    result.curve.push_back(stats);
  }
  result.params = std::move(params);
  return result;
}

// A deterministic subset of at most `limit` windows (all when limit == 0).
std::vector<WindowRef> Subsample(std::vector<WindowRef> windows, int limit, std::uint64_t seed) {
  if (limit > 0 && windows.size() > static_cast<std::size_t>(limit)) {
    std::mt19937_64 rng(seed);
    std::shuffle(windows.begin(), windows.end(), rng);
    windows.resize(static_cast<std::size_t>(limit));
    std::sort(windows.begin(), windows.end(), [](const WindowRef& a, const WindowRef& b) {
      return a.episode != b.episode ? a.episode < b.episode : a.t < b.t;
    });
  }
  return windows;
}

// Sum of |q-hat - q| over positions of all steps, for a model batch.
double PositionErrorSum(const std::vector<Matrix>& predictions, const std::vector<Matrix>& targets) {
  double s = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    s += (predictions[i].topRows(kNumJoints) - targets[i].topRows(kNumJoints)).cwiseAbs().sum();
  }
  return s;
}

double TrackingErrorSum(const std::vector<Matrix>& predictions, const PolicyBatch& batch) {
  double s = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    s += (predictions[i].topRows(kNumJoints) - batch.desired[i]).cwiseAbs().sum();
  }
  return s;
}

struct ErrorSums {
  double model = 0.0;
  double persistence = 0.0;
  double count = 0.0;
};

ErrorSums ModelErrorSums(const nn::NetworkParams& model, const Dataset& dataset,
                         const std::vector<WindowRef>& windows, int h, int threads) {
  const int chunks = static_cast<int>((windows.size() + kEvalChunk - 1) / kEvalChunk);
  std::vector<ErrorSums> parts(static_cast<std::size_t>(chunks));
  ParallelFor(chunks, threads, [&](int c) {
    const std::size_t lo = static_cast<std::size_t>(c) * kEvalChunk;
    const std::size_t n = std::min<std::size_t>(kEvalChunk, windows.size() - lo);
    const ModelBatch batch =
        GatherModelBatch(dataset, std::span(windows).subspan(lo, n), h);
    const std::vector<Matrix> pred = ModelRollout(model, batch);
    ErrorSums& e = parts[c];
    e.model = PositionErrorSum(pred, batch.targets);
    const Matrix& now = batch.obs_hist.back();
    for (int i = 0; i < h; ++i) {
      e.persistence +=
          (now.topRows(kNumJoints) - batch.targets[i].topRows(kNumJoints)).cwiseAbs().sum();
    }
    e.count = static_cast<double>(n) * h * kNumJoints;
  });
  ErrorSums total;
  for (const ErrorSums& e : parts) {
    total.model += e.model;
    total.persistence += e.persistence;
    total.count += e.count;
  }
  return total;
}

}  // namespace

void TrainConfig::Validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("train config: " + what); };
  if (h < 1) fail("h must be >= 1");
  if (epochs < 0) fail("epochs must be >= 0");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) fail("lr must be finite and >= 0");
  if (!(lr_final >= 0.0 && lr_final <= 1.0)) fail("lr_final must be in [0, 1]");
  if (!(weight_decay >= 0.0)) fail("weight_decay must be >= 0");
  if (!(gamma > 0.0 && gamma <= 1.0)) fail("gamma must be in (0, 1]");
  if (!(k_smooth >= 0.0)) fail("k_smooth must be >= 0");
  if (hidden_layers < 1) fail("hidden_layers must be >= 1");
  if (hidden_width < 1) fail("hidden_width must be >= 1");
  if (windows_per_epoch < 0) fail("windows_per_epoch must be >= 0");
  if (chunk_size < 1) fail("chunk_size must be >= 1");
  if (eval_windows < 0) fail("eval_windows must be >= 0");
}

nn::MlpSpec ModelSpec(int h, int hidden_layers, int hidden_width) {
  nn::MlpSpec s;
  s.input_dim = ModelInputDim(h);
  s.hidden_layers = hidden_layers;
  s.hidden_width = hidden_width;
  s.output_dim = kObsDim;
  s.output_scale.resize(kObsDim);
  s.output_scale << 0.1, 0.1, 0.1, 0.1, 0.5, 0.5, 0.5, 0.5;
  return s;
}

nn::MlpSpec PolicySpec(int h, int hidden_layers, int hidden_width) {
  nn::MlpSpec s;
  s.input_dim = PolicyInputDim(h);
  s.hidden_layers = hidden_layers;
  s.hidden_width = hidden_width;
  s.output_dim = kNumJoints;
  s.output_scale = Vector::Constant(kNumJoints, 0.1);
  return s;
}

InputStats ComputeInputStats(const Dataset& dataset) {
  std::vector<ObsVector> obs;
  std::vector<JointVector> refs, desired;
  for (const Episode& e : dataset.episodes) {
    for (const Transition& s : e.steps) {
      obs.push_back(s.o.Flat());
      refs.push_back(s.qr_next);
      desired.push_back(s.qstar_next);
    }
  }
  if (obs.empty()) throw std::invalid_argument("ComputeInputStats: empty dataset");
  InputStats st;
  MeanStd<kObsDim>(obs, st.obs_mean, st.obs_std);
  MeanStd<kNumJoints>(refs, st.ref_mean, st.ref_std);
  MeanStd<kNumJoints>(desired, st.desired_mean, st.desired_std);
  return st;
}

void ApplyModelStats(const InputStats& stats, nn::NetworkParams& model) {
  const int h = ModelHorizon(model.spec);
  Vector mean(model.spec.input_dim), stddev(model.spec.input_dim);
  Eigen::Index k = 0, k2 = 0;
  Tile(mean, k, stats.obs_mean, h + 1);
  Tile(mean, k, stats.ref_mean, h + 2);
  Tile(stddev, k2, stats.obs_std, h + 1);
  Tile(stddev, k2, stats.ref_std, h + 2);
  model.input_mean = mean;
  model.input_std = stddev;
  model.Validate();
}

void ApplyPolicyStats(const InputStats& stats, nn::NetworkParams& policy) {
  const int h = PolicyHorizon(policy.spec);
  Vector mean(policy.spec.input_dim), stddev(policy.spec.input_dim);
  Eigen::Index k = 0, k2 = 0;
  Tile(mean, k, stats.obs_mean, h + 1);
  Tile(mean, k, stats.ref_mean, h + 1);
  Tile(mean, k, stats.desired_mean, h);
  Tile(stddev, k2, stats.obs_std, h + 1);
  Tile(stddev, k2, stats.ref_std, h + 1);
  Tile(stddev, k2, stats.desired_std, h);
  policy.input_mean = mean;
  policy.input_std = stddev;
  policy.Validate();
}

std::vector<WindowRef> ModelWindowStarts(const Dataset& dataset, int h) {
  std::vector<WindowRef> out;
  for (int e = 0; e < static_cast<int>(dataset.episodes.size()); ++e) {
    const int T = dataset.episodes[e].size();
    for (int t = 0; t + h <= T - 1; ++t) out.push_back({e, t});
  }
  return out;
}

std::vector<WindowRef> PolicyWindowStarts(const Dataset& dataset, int h) {
  (void)h;
  std::vector<WindowRef> out;
  for (int e = 0; e < static_cast<int>(dataset.episodes.size()); ++e) {
    const int T = dataset.episodes[e].size();
    for (int t = 0; t < T; ++t) out.push_back({e, t});
  }
  return out;
}

namespace {

void GatherHistory(const Dataset& dataset, std::span<const WindowRef> windows, int h,
                   std::vector<Matrix>& obs_hist, std::vector<Matrix>& ref_hist) {
  const int n = static_cast<int>(windows.size());
  obs_hist.assign(static_cast<std::size_t>(h) + 1, Matrix(kObsDim, n));
  ref_hist.assign(static_cast<std::size_t>(h) + 1, Matrix(kNumJoints, n));
  for (int b = 0; b < n; ++b) {
    const Episode& ep = dataset.episodes.at(windows[b].episode);
    const int t = windows[b].t;
    for (int k = 0; k <= h; ++k) {
      const int tau = std::max(t - h + k, 0);
      obs_hist[k].col(b) = ep.steps[tau].o.Flat();
      ref_hist[k].col(b) = ep.Ref(tau);
    }
  }
}

}  // namespace

ModelBatch GatherModelBatch(const Dataset& dataset, std::span<const WindowRef> windows, int h) {
  if (windows.empty()) throw std::invalid_argument("GatherModelBatch: no windows");
  ModelBatch batch;
  GatherHistory(dataset, windows, h, batch.obs_hist, batch.ref_hist);
  const int n = static_cast<int>(windows.size());
  batch.refs.assign(static_cast<std::size_t>(h), Matrix(kNumJoints, n));
  batch.targets.assign(static_cast<std::size_t>(h), Matrix(kObsDim, n));
  for (int b = 0; b < n; ++b) {
    const Episode& ep = dataset.episodes[windows[b].episode];
    const int t = windows[b].t;
    if (t < 0 || t + h > ep.size() - 1) {
      throw std::out_of_range("GatherModelBatch: window exceeds its episode");
    }
    for (int i = 1; i <= h; ++i) {
      batch.refs[i - 1].col(b) = ep.Ref(t + i);
      batch.targets[i - 1].col(b) = ep.steps[t + i].o.Flat();
    }
  }
  return batch;
}

PolicyBatch GatherPolicyBatch(const Dataset& dataset, std::span<const WindowRef> windows, int h) {
  if (windows.empty()) throw std::invalid_argument("GatherPolicyBatch: no windows");
  PolicyBatch batch;
  GatherHistory(dataset, windows, h, batch.obs_hist, batch.ref_hist);
  const int n = static_cast<int>(windows.size());
  batch.desired.assign(2 * static_cast<std::size_t>(h), Matrix(kNumJoints, n));
  for (int b = 0; b < n; ++b) {
    const Episode& ep = dataset.episodes[windows[b].episode];
    const int t = windows[b].t;
    if (t < 0 || t > ep.size() - 1) {
      throw std::out_of_range("GatherPolicyBatch: window exceeds its episode");
    }
    for (int j = 1; j <= 2 * h; ++j) batch.desired[j - 1].col(b) = ep.Desired(std::min(t + j, ep.size()));
  }
  return batch;
}

namespace {

Tape::Var StepInput(Tape& tape, const std::vector<Tape::Var>& obs,
                    const std::vector<Tape::Var>& refs, std::span<const Tape::Var> extra) {
  std::vector<Tape::Var> parts;
  parts.reserve(obs.size() + refs.size() + extra.size());
  parts.insert(parts.end(), obs.begin(), obs.end());
  parts.insert(parts.end(), refs.begin(), refs.end());
  parts.insert(parts.end(), extra.begin(), extra.end());
  return tape.Concat(parts);
}

void Shift(std::vector<Tape::Var>& slots, Tape::Var v) {
  slots.erase(slots.begin());
  slots.push_back(v);
}

}  // namespace

std::vector<Tape::Var> ModelRolloutOnTape(Tape& tape, const nn::Binding& model,
                                          const ModelBatch& batch) {
  const int h = static_cast<int>(batch.refs.size());
  std::vector<Tape::Var> obs, refs, out;
  for (const Matrix& m : batch.obs_hist) obs.push_back(tape.Constant(m));
  for (const Matrix& m : batch.ref_hist) refs.push_back(tape.Constant(m));
  Tape::Var current = obs.back();
  for (int i = 0; i < h; ++i) {
    const Tape::Var qr_next = tape.Constant(batch.refs[i]);
    const Tape::Var delta = nn::ForwardOnTape(tape, model, StepInput(tape, obs, refs, {&qr_next, 1}));
    current = tape.Add(current, delta);
    out.push_back(current);
    Shift(obs, current);
    Shift(refs, qr_next);
  }
  return out;
}

PolicyRolloutVars PolicyRolloutOnTape(Tape& tape, const nn::Binding& policy,
                                      const nn::Binding& model, const PolicyBatch& batch) {
  const int h = static_cast<int>(batch.desired.size()) / 2;
  std::vector<Tape::Var> obs, refs, desired;
  for (const Matrix& m : batch.obs_hist) obs.push_back(tape.Constant(m));
  for (const Matrix& m : batch.ref_hist) refs.push_back(tape.Constant(m));
  for (const Matrix& m : batch.desired) desired.push_back(tape.Constant(m));
  PolicyRolloutVars out;
  Tape::Var current = obs.back();
  for (int i = 0; i < h; ++i) {
    const std::span<const Tape::Var> future(desired.data() + i, static_cast<std::size_t>(h));
    const Tape::Var a = nn::ForwardOnTape(tape, policy, StepInput(tape, obs, refs, future));
    const Tape::Var qr_next = tape.Add(desired[i], a);
    const Tape::Var delta =
        nn::ForwardOnTape(tape, model, StepInput(tape, obs, refs, {&qr_next, 1}));
    current = tape.Add(current, delta);
    out.actions.push_back(a);
    out.predictions.push_back(current);
    Shift(obs, current);
    Shift(refs, qr_next);
  }
  return out;
}

std::vector<Matrix> ModelRollout(const nn::NetworkParams& model, const ModelBatch& batch) {
  Tape tape;
  const auto vars = ModelRolloutOnTape(tape, nn::Binding{&model, nullptr, true}, batch);
  std::vector<Matrix> out;
  for (Tape::Var v : vars) out.push_back(tape.value(v));
  return out;
}

PolicyRolloutResult PolicyRollout(const nn::NetworkParams& policy, const nn::NetworkParams& model,
                                  const PolicyBatch& batch) {
  Tape tape;
  const PolicyRolloutVars vars = PolicyRolloutOnTape(
      tape, nn::Binding{&policy, nullptr, true}, nn::Binding{&model, nullptr, true}, batch);
  PolicyRolloutResult out;
  for (Tape::Var v : vars.actions) out.actions.push_back(tape.value(v));
  for (Tape::Var v : vars.predictions) out.predictions.push_back(tape.value(v));
  return out;
}

double ModelLoss(std::span<const ObsVector> predictions, std::span<const ObsVector> targets,
                 double theta_squared_norm, double w) {
  if (predictions.size() != targets.size() || predictions.empty()) {
    throw std::invalid_argument("ModelLoss: predictions and targets must have equal length h >= 1");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    sum += (predictions[i] - targets[i]).squaredNorm();
  }
  return sum / static_cast<double>(predictions.size()) + w * theta_squared_norm;
}

PolicyLossParts PolicyLoss(std::span<const JointVector> q_pred, std::span<const JointVector> qstar,
                           std::span<const JointVector> actions, double gamma, double k_smooth) {
  const std::size_t h = q_pred.size();
  if (h == 0 || qstar.size() != h || actions.size() != h) {
    throw std::invalid_argument("PolicyLoss: sequences must share length h >= 1");
  }
  PolicyLossParts parts;
  double discount = 1.0;
  for (std::size_t i = 0; i < h; ++i) {
    discount *= gamma;
    parts.track += discount * (q_pred[i] - qstar[i]).squaredNorm();
  }
  parts.track /= static_cast<double>(h);
  if (h >= 2) {
    for (std::size_t i = 1; i < h; ++i) parts.reg += (actions[i] - actions[i - 1]).squaredNorm();
    parts.reg *= k_smooth / static_cast<double>(h - 1);
  }
  return parts;
}

Tape::Var ModelDataLossOnTape(Tape& tape, std::span<const Tape::Var> predictions,
                              const ModelBatch& batch, double scale) {
  const int h = static_cast<int>(predictions.size());
  Tape::Var total{};
  for (int i = 0; i < h; ++i) {
    const Tape::Var err =
        tape.Sum(tape.Square(tape.Sub(predictions[i], tape.Constant(batch.targets[i]))));
    total = i == 0 ? err : tape.Add(total, err);
  }
  return tape.Scale(total, scale / h);
}

PolicyLossVars PolicyLossOnTape(Tape& tape, const PolicyRolloutVars& rollout,
                                const PolicyBatch& batch, double gamma, double k_smooth,
                                double scale) {
  const int h = static_cast<int>(rollout.predictions.size());
  Tape::Var track{};
  double discount = 1.0;
  for (int i = 0; i < h; ++i) {
    discount *= gamma;
    const Tape::Var q = tape.Slice(rollout.predictions[i], 0, kNumJoints);
    const Tape::Var err =
        tape.Scale(tape.Sum(tape.Square(tape.Sub(q, tape.Constant(batch.desired[i])))), discount);
    track = i == 0 ? err : tape.Add(track, err);
  }
  PolicyLossVars out;
  out.track = tape.Scale(track, scale / h);
  if (h >= 2) {
    Tape::Var reg{};
    for (int i = 1; i < h; ++i) {
      const Tape::Var d =
          tape.Sum(tape.Square(tape.Sub(rollout.actions[i], rollout.actions[i - 1])));
      reg = i == 1 ? d : tape.Add(reg, d);
    }
    out.reg = tape.Scale(reg, k_smooth * scale / (h - 1));
  } else {
    out.reg = tape.Constant(Matrix::Zero(1, 1));
  }
  out.total = tape.Add(out.track, out.reg);
  return out;
}

TrainResult TrainModel(const Dataset& train, const Dataset* heldout, const TrainConfig& config,
                       const nn::NetworkParams* warm_start, int threads) {
  config.Validate();
  const int h = config.h;
  nn::NetworkParams params;
  if (warm_start) {
    params = *warm_start;
    if (params.spec.input_dim != ModelInputDim(h) || params.spec.output_dim != kObsDim) {
      throw std::invalid_argument("TrainModel: warm-start model does not match h=" +
                                  std::to_string(h));
    }
  } else {
    params = nn::NetworkParams::Initialize(ModelSpec(h, config.hidden_layers, config.hidden_width),
                                           DeriveSeed(config.seed, 0x6d6f64656cULL));
    ApplyModelStats(ComputeInputStats(train), params);
  }

  const std::vector<WindowRef> windows = ModelWindowStarts(train, h);
  HeldoutFn heldout_fn;
  std::vector<WindowRef> eval;
  if (heldout) {
    eval = Subsample(ModelWindowStarts(*heldout, h), config.eval_windows, config.seed);
    if (!eval.empty()) {
      heldout_fn = [&](const nn::NetworkParams& p) {
        const ErrorSums e = ModelErrorSums(p, *heldout, eval, h, threads);
        return e.model / e.count;
      };
    }
  }
  ChunkFn chunk_fn = [&](const nn::NetworkParams& p, std::span<const WindowRef> chunk,
                         double scale, nn::ParamTensors& grads) {
    const ModelBatch batch = GatherModelBatch(train, chunk, h);
    Tape tape;
    const auto pred = ModelRolloutOnTape(tape, nn::Binding{&p, &grads, false}, batch);
    const Tape::Var loss = ModelDataLossOnTape(tape, pred, batch, scale);
    tape.Backward(loss);
    ChunkStats s;
    s.loss = tape.value(loss)(0, 0);
    std::vector<Matrix> values;
    for (Tape::Var v : pred) values.push_back(tape.value(v));
    s.err_sum = PositionErrorSum(values, batch.targets);
    s.err_count = static_cast<double>(chunk.size()) * h * kNumJoints;
    return s;
  };
  return RunTraining(std::move(params), windows, config, threads, config.weight_decay, chunk_fn,
                     heldout_fn);
}

void CheckCompatible(const nn::NetworkParams& model, const nn::NetworkParams& policy, int h) {
  if (model.spec.input_dim != ModelInputDim(h) || model.spec.output_dim != kObsDim) {
    throw std::invalid_argument("model network does not match horizon h=" + std::to_string(h));
  }
  if (policy.spec.input_dim != PolicyInputDim(h) || policy.spec.output_dim != kNumJoints) {
    throw std::invalid_argument("policy network does not match horizon h=" + std::to_string(h));
  }
}

TrainResult TrainPolicy(const Dataset& train, const Dataset* heldout,
                        const nn::NetworkParams& model, const TrainConfig& config,
                        const nn::NetworkParams* warm_start, int threads) {
  config.Validate();
  const int h = config.h;
  nn::NetworkParams params;
  if (warm_start) {
    params = *warm_start;
  } else {
    params = nn::NetworkParams::Initialize(
        PolicySpec(h, config.hidden_layers, config.hidden_width),
        DeriveSeed(config.seed, 0x706f6c696379ULL));
    ApplyPolicyStats(ComputeInputStats(train), params);
  }
  CheckCompatible(model, params, h);

  const std::vector<WindowRef> windows = PolicyWindowStarts(train, h);
  HeldoutFn heldout_fn;
  std::vector<WindowRef> eval;
  if (heldout) {
    eval = Subsample(PolicyWindowStarts(*heldout, h), config.eval_windows, config.seed);
    if (!eval.empty()) {
      heldout_fn = [&](const nn::NetworkParams& p) {
        const PolicyBatch batch = GatherPolicyBatch(*heldout, eval, h);
        const PolicyRolloutResult r = PolicyRollout(p, model, batch);
        return TrackingErrorSum(r.predictions, batch) /
               (static_cast<double>(eval.size()) * h * kNumJoints);
      };
    }
  }
  ChunkFn chunk_fn = [&](const nn::NetworkParams& p, std::span<const WindowRef> chunk,
                         double scale, nn::ParamTensors& grads) {
    const PolicyBatch batch = GatherPolicyBatch(train, chunk, h);
    Tape tape;
    // The model is frozen: gradients pass through it to the policy only.
    const PolicyRolloutVars rollout = PolicyRolloutOnTape(
        tape, nn::Binding{&p, &grads, false}, nn::Binding{&model, nullptr, true}, batch);
    const PolicyLossVars loss =
        PolicyLossOnTape(tape, rollout, batch, config.gamma, config.k_smooth, scale);
    tape.Backward(loss.total);
    ChunkStats s;
    s.loss = tape.value(loss.total)(0, 0);
    s.track = tape.value(loss.track)(0, 0);
    s.reg = tape.value(loss.reg)(0, 0);
    std::vector<Matrix> values;
    for (Tape::Var v : rollout.predictions) values.push_back(tape.value(v));
    s.err_sum = TrackingErrorSum(values, batch);
    s.err_count = static_cast<double>(chunk.size()) * h * kNumJoints;
    return s;
  };
  return RunTraining(std::move(params), windows, config, threads, 0.0, chunk_fn, heldout_fn);
}

PredictionError ModelPredictionError(const nn::NetworkParams& model, const Dataset& dataset, int h,
                                     int threads) {
  const std::vector<WindowRef> windows = ModelWindowStarts(dataset, h);
  PredictionError out;
  out.windows = static_cast<long>(windows.size());
  if (windows.empty()) return out;
  const ErrorSums e = ModelErrorSums(model, dataset, windows, h, threads);
  out.model = e.model / e.count;
  out.persistence = e.persistence / e.count;
  return out;
}

std::vector<PredictionError> ModelPredictionErrorPerEpisode(const nn::NetworkParams& model,
                                                            const Dataset& dataset, int h,
                                                            int threads) {
  std::vector<PredictionError> out;
  for (const Episode& e : dataset.episodes) {
    Dataset one;
    one.episodes = {e};
    out.push_back(ModelPredictionError(model, one, h, threads));
  }
  return out;
}

double PolicyModelTrackingError(const nn::NetworkParams& policy, const nn::NetworkParams& model,
                                const Dataset& dataset, int h, int threads) {
  CheckCompatible(model, policy, h);
  const std::vector<WindowRef> windows = PolicyWindowStarts(dataset, h);
  if (windows.empty()) return 0.0;
  const int chunks = static_cast<int>((windows.size() + kEvalChunk - 1) / kEvalChunk);
  std::vector<double> sums(static_cast<std::size_t>(chunks));
  ParallelFor(chunks, threads, [&](int c) {
    const std::size_t lo = static_cast<std::size_t>(c) * kEvalChunk;
    const std::size_t n = std::min<std::size_t>(kEvalChunk, windows.size() - lo);
    const PolicyBatch batch = GatherPolicyBatch(dataset, std::span(windows).subspan(lo, n), h);
    sums[c] = TrackingErrorSum(PolicyRollout(policy, model, batch).predictions, batch);
  });
  return std::accumulate(sums.begin(), sums.end(), 0.0) /
         (static_cast<double>(windows.size()) * h * kNumJoints);
}

}  // namespace reftrack
