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

#include "reftrack/eval.h"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

#include "reftrack/parallel.h"
#include "reftrack/refgen.h"

namespace reftrack {

namespace {

constexpr double kMetersToCm = 100.0;

double Distance(const Point3& a, const Point3& b) {
  return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) +
                   (a.z - b.z) * (a.z - b.z));
}

std::string Fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, v);
  return buf;
}

// Characters, not bytes: the dash used for empty cells is multi-byte UTF-8.
std::size_t Width(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80;
  return n;
}

std::string Row(const std::vector<std::string>& cells, const std::vector<std::size_t>& widths) {
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i > 0) line += "  ";
    const std::string fill(widths[i] - Width(cells[i]), ' ');
    // First column left-aligned, numbers right-aligned.
    line += i == 0 ? cells[i] + fill : fill + cells[i];
  }
  return line + "\n";
}

std::string Table(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths(rows.front().size(), 0);
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) widths[i] = std::max(widths[i], Width(r[i]));
  }
  std::string out;
  for (const auto& r : rows) out += Row(r, widths);
  return out;
}

std::string Csv(const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + r[i];
    out += "\n";
  }
  return out;
}

const std::vector<std::string> kMetricHeads = {"MAE(deg)",     "RMSE(deg)",   "FMAE(deg)",
                                               "ETD-MAE(cm)",  "ETD-FMAE(cm)", "1stoSMT(deg)",
                                               "2ndoSMT(deg)"};
const std::vector<std::string> kMetricCsvHeads = {"mae_deg",    "rmse_deg",    "fmae_deg",
                                                  "etd_mae_cm", "etd_fmae_cm", "smt1_deg",
                                                  "smt2_deg"};

std::vector<std::string> MetricCells(const TrajectoryMetrics& m, const char* format) {
  return {Fmt(format, m.mae),     Fmt(format, m.rmse),     Fmt(format, m.fmae),
          Fmt(format, m.etd_mae), Fmt(format, m.etd_fmae), Fmt(format, m.smt1),
          Fmt(format, m.smt2)};
}

std::vector<std::string> Concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::string Header(const std::string& hash) { return "# config " + hash + "\n"; }

constexpr const char* kTableFormat = "%.4f";
constexpr const char* kCsvFormat = "%.17g";

Dataset HeldOut(const RunConfig& config, const std::vector<Trajectory>& test, int threads) {
  return ImplementPolicy(config.plant, config.gains, test, nullptr, config.h, config.EvalSeed(),
                         threads);
}

}  // namespace

Dataset ImplementPolicy(const PlantConfig& plant, const PdGains& gains,
                        const std::vector<Trajectory>& trajs,
                        const nn::NetworkParams* policy, int h, std::uint64_t seed,
                        int threads) {
  if (trajs.empty()) throw std::invalid_argument("ImplementPolicy: no trajectories");
  for (const Trajectory& t : trajs) {
    if (t.points.size() < 2) {
      throw std::invalid_argument("ImplementPolicy: trajectory '" + t.id +
                                  "' is shorter than 2 points");
    }
  }
  Dataset ds;
  ds.seed = seed;
  ds.ratio = NoiseRatio{0, 1};
  ds.episodes.resize(trajs.size());
  ParallelFor(static_cast<int>(trajs.size()), threads, [&](int k) {
    EpisodeOptions options;
    options.seed = DeriveSeed(seed, static_cast<std::uint64_t>(k));
    options.policy = policy;
    options.h = policy != nullptr ? h : 0;
    ds.episodes[k] = RunEpisode(plant, gains, trajs[k], options);
  });
  return ds;
}

TrajectoryMetrics SequenceMetrics(std::span<const JointVector> q,
                                  std::span<const JointVector> qstar,
                                  const LinkGeometry& geometry) {
  if (q.empty() || q.size() != qstar.size()) {
    throw std::invalid_argument("SequenceMetrics: sequences must be non-empty and aligned");
  }
  const std::size_t T = q.size();
  TrajectoryMetrics m;
  double abs_sum = 0.0, sq_sum = 0.0, etd_sum = 0.0;
  for (std::size_t i = 0; i < T; ++i) {
    const JointVector e = q[i] - qstar[i];
    abs_sum += e.cwiseAbs().sum();
    sq_sum += e.squaredNorm();
    etd_sum += Distance(ForwardKinematics(q[i], geometry), ForwardKinematics(qstar[i], geometry));
  }
  const double n = static_cast<double>(T * kNumJoints);
  m.mae = abs_sum / n * kRadToDeg;
  m.rmse = std::sqrt(sq_sum / n) * kRadToDeg;
  m.fmae = (q[T - 1] - qstar[T - 1]).cwiseAbs().sum() / kNumJoints * kRadToDeg;
  m.etd_mae = etd_sum / static_cast<double>(T) * kMetersToCm;
  m.etd_fmae = Distance(ForwardKinematics(q[T - 1], geometry),
                        ForwardKinematics(qstar[T - 1], geometry)) *
               kMetersToCm;
  double d1 = 0.0, d2 = 0.0;
  for (std::size_t i = 1; i < T; ++i) d1 += (q[i] - q[i - 1]).squaredNorm();
  for (std::size_t i = 2; i < T; ++i) d2 += (q[i] - 2.0 * q[i - 1] + q[i - 2]).squaredNorm();
  m.smt1 = std::sqrt(d1 / static_cast<double>(T)) * kRadToDeg;
  m.smt2 = T > 1 ? std::sqrt(d2 / static_cast<double>(T - 1)) * kRadToDeg : 0.0;
  return m;
}

MetricsReport ComputeMetrics(const Dataset& record, const std::vector<Trajectory>& trajs,
                             const LinkGeometry& geometry) {
  if (record.episodes.size() != trajs.size() || trajs.empty()) {
    throw std::invalid_argument("ComputeMetrics: " + std::to_string(record.episodes.size()) +
                                " episodes for " + std::to_string(trajs.size()) +
                                " trajectories");
  }
  MetricsReport report;
  for (std::size_t k = 0; k < trajs.size(); ++k) {
    const Episode& ep = record.episodes[k];
    const Trajectory& traj = trajs[k];
    if (ep.traj_id != traj.id || ep.size() != traj.steps()) {
      throw std::invalid_argument("ComputeMetrics: episode " + std::to_string(k) + " ('" +
                                  ep.traj_id + "') does not match trajectory '" + traj.id + "'");
    }
    std::vector<JointVector> q(static_cast<std::size_t>(ep.size()));
    std::vector<JointVector> qstar(q.size());
    for (int t = 0; t < ep.size(); ++t) {
      if (ep.steps[t].qstar_next != traj.points[t + 1]) {
        throw std::invalid_argument("ComputeMetrics: desired position differs at episode " +
                                    std::to_string(k) + " t=" + std::to_string(t));
      }
      q[t] = ep.steps[t].o.q;
      qstar[t] = traj.points[t];
    }
    TrajectoryMetrics m = SequenceMetrics(q, qstar, geometry);
    m.traj_id = traj.id;
    report.trajectories.push_back(m);
  }
  TrajectoryMetrics& mean = report.mean;
  mean.traj_id = "mean";
  for (const TrajectoryMetrics& m : report.trajectories) {
    mean.mae += m.mae;
    mean.rmse += m.rmse;
    mean.fmae += m.fmae;
    mean.etd_mae += m.etd_mae;
    mean.etd_fmae += m.etd_fmae;
    mean.smt1 += m.smt1;
    mean.smt2 += m.smt2;
  }
  const double n = static_cast<double>(report.trajectories.size());
  for (double* f : {&mean.mae, &mean.rmse, &mean.fmae, &mean.etd_mae, &mean.etd_fmae,
                    &mean.smt1, &mean.smt2}) {
    *f /= n;
  }
  return report;
}

double InteractionHours(long steps, double dt) {
  return static_cast<double>(steps) * dt / 3600.0;
}

PipelineRun RunModelStage(const RunConfig& config, int threads, std::optional<NoiseRatio> ratio) {
  config.Validate();
  PipelineRun run;
  const std::vector<Trajectory> cycles =
      GenerateCycles(config.cycles, config.n_train + config.n_test, config.RefgenSeed(),
                     config.plant.PositionMin(), config.plant.PositionMax());
  std::tie(run.train_trajs, run.test_trajs) =
      SplitTrajectories(cycles, config.n_train, config.n_test, config.SplitSeed());
  run.dataset = CollectDataset(config.plant, config.gains, run.train_trajs, config.sigma_max,
                               ratio.value_or(config.ratio), config.CollectSeed(), threads);
  run.dataset.config_hash = ConfigHash(config);
  const Dataset held = HeldOut(config, run.test_trajs, threads);
  run.model = TrainModel(run.dataset, &held, config.ModelTrainConfig(), nullptr, threads);
  return run;
}

PipelineRun RunPipeline(const RunConfig& config, int threads, std::optional<NoiseRatio> ratio) {
  PipelineRun run = RunModelStage(config, threads, ratio);
  const Dataset held = HeldOut(config, run.test_trajs, threads);
  run.policy = TrainPolicy(run.dataset, &held, run.model.params, config.PolicyTrainConfig(),
                           nullptr, threads);
  return run;
}

ComparisonTable RunComparison(const RunConfig& config, const PipelineRun& run, int threads) {
  ComparisonTable table;
  table.config_hash = ConfigHash(config);
  const Dataset pd = HeldOut(config, run.test_trajs, threads);
  const Dataset learned = ImplementPolicy(config.plant, config.gains, run.test_trajs,
                                          &run.policy.params, config.h, config.EvalSeed(),
                                          threads);
  table.rows.push_back(
      {"PD", ComputeMetrics(pd, run.test_trajs, config.plant.geometry), std::nullopt});
  table.rows.push_back({"learned policy",
                        ComputeMetrics(learned, run.test_trajs, config.plant.geometry),
                        static_cast<long>(run.dataset.NumTransitions())});
  return table;
}

RoundsResult RunRounds(const RunConfig& config, const PipelineRun& first, int n_rounds,
                       int threads) {
  if (n_rounds < 1) throw std::invalid_argument("RunRounds: n_rounds must be >= 1");
  RoundsResult result;
  result.config_hash = ConfigHash(config);
  const Dataset held = HeldOut(config, first.test_trajs, threads);
  auto evaluate = [&](const nn::NetworkParams& policy) {
    const Dataset record = ImplementPolicy(config.plant, config.gains, first.test_trajs,
                                           &policy, config.h, config.EvalSeed(), threads);
    return ComputeMetrics(record, first.test_trajs, config.plant.geometry);
  };

  RoundResult r1;
  r1.round = 1;
  r1.metrics = evaluate(first.policy.params);
  r1.new_steps = static_cast<long>(first.dataset.NumTransitions());
  r1.total_steps = r1.new_steps;
  r1.model_initial = first.model.initial;
  r1.model_final = first.model.params;
  r1.policy_initial = first.policy.initial;
  r1.policy_final = first.policy.params;
  result.rounds.push_back(std::move(r1));

  for (int k = 2; k <= n_rounds; ++k) {
    const RoundResult& prev = result.rounds.back();
    Dataset data = ImplementPolicy(config.plant, config.gains, first.train_trajs,
                                   &prev.policy_final, config.h,
                                   DeriveSeed(config.CollectSeed(), static_cast<std::uint64_t>(k)),
                                   threads);
    data.config_hash = result.config_hash;
    TrainConfig mc = config.ModelTrainConfig();
    TrainConfig pc = config.PolicyTrainConfig();
    for (TrainConfig* t : {&mc, &pc}) {
      t->seed = DeriveSeed(t->seed, static_cast<std::uint64_t>(k));
      t->epochs = config.finetune_epochs;
      t->lr *= config.finetune_lr_scale;
    }
    const TrainResult model = TrainModel(data, &held, mc, &prev.model_final, threads);
    const TrainResult policy =
        TrainPolicy(data, &held, model.params, pc, &prev.policy_final, threads);

    RoundResult r;
    r.round = k;
    r.metrics = evaluate(policy.params);
    r.new_steps = static_cast<long>(data.NumTransitions());
    r.total_steps = prev.total_steps + r.new_steps;
    r.model_initial = model.initial;
    r.model_final = model.params;
    r.policy_initial = policy.initial;
    r.policy_final = policy.params;
    result.rounds.push_back(std::move(r));
  }
  return result;
}

std::vector<NoiseRatio> NoiseArmRatios(const NoiseRatio& mix) {
  const int passes = mix.passes();
  return {NoiseRatio{0, passes}, NoiseRatio{passes, 0}, mix};
}

NoiseArm EvaluateNoiseArm(const RunConfig& config, const PipelineRun& run, const NoiseRatio& ratio,
                          const std::string& name, int threads) {
  NoiseArm arm;
  arm.name = name + " " + std::to_string(ratio.noisy) + ":" + std::to_string(ratio.clean);
  arm.ratio = ratio;
  arm.transitions = static_cast<long>(run.dataset.NumTransitions());
  arm.tr_mpe =
      ModelPredictionError(run.model.params, run.dataset, config.h, threads).model * kRadToDeg;
  const Dataset record = ImplementPolicy(config.plant, config.gains, run.test_trajs,
                                         &run.policy.params, config.h, config.EvalSeed(), threads);
  arm.te_mpe = ModelPredictionError(run.model.params, record, config.h, threads).model * kRadToDeg;
  arm.metrics = ComputeMetrics(record, run.test_trajs, config.plant.geometry);
  return arm;
}

AblationResult RunNoiseAblation(const RunConfig& config, const PipelineRun* mixed, int threads) {
  AblationResult result;
  result.config_hash = ConfigHash(config);
  const std::vector<NoiseRatio> ratios = NoiseArmRatios(config.ratio);
  const char* const names[] = {"no-noise", "only-noise", "mixed"};
  for (std::size_t a = 0; a < ratios.size(); ++a) {
    PipelineRun own;
    const bool reuse = a == 2 && mixed != nullptr;
    if (!reuse) own = RunPipeline(config, threads, ratios[a]);
    NoiseArm arm = EvaluateNoiseArm(config, reuse ? *mixed : own, ratios[a], names[a], threads);
    if (!result.noise.empty() && arm.transitions != result.noise.front().transitions) {
      throw std::logic_error("noise ablation: arms differ in data volume");
    }
    result.noise.push_back(std::move(arm));
  }
  return result;
}

AblationResult RunSmoothAblation(const RunConfig& config, const PipelineRun& base, int threads) {
  AblationResult result;
  result.config_hash = ConfigHash(config);
  const Dataset held = HeldOut(config, base.test_trajs, threads);
  for (double k : config.k_smooth_arms) {
    TrainResult trained;
    const nn::NetworkParams* policy = &base.policy.params;
    if (k != config.policy.k_smooth) {
      TrainConfig pc = config.PolicyTrainConfig();
      pc.k_smooth = k;
      trained = TrainPolicy(base.dataset, &held, base.model.params, pc, nullptr, threads);
      policy = &trained.params;
    }
    SmoothArm arm;
    arm.k_smooth = k;
    arm.po_mae =
        PolicyModelTrackingError(*policy, base.model.params, held, config.h, threads) *
        kRadToDeg;
    const Dataset record = ImplementPolicy(config.plant, config.gains, base.test_trajs, policy,
                                           config.h, config.EvalSeed(), threads);
    arm.metrics = ComputeMetrics(record, base.test_trajs, config.plant.geometry);
    result.smooth.push_back(std::move(arm));
  }
  return result;
}

std::string FormatMetrics(const MetricsReport& report, const std::string& config_hash) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back(Concat({"Trajectory"}, kMetricHeads));
  for (const TrajectoryMetrics& m : report.trajectories) {
    rows.push_back(Concat({m.traj_id}, MetricCells(m, kTableFormat)));
  }
  rows.push_back(Concat({"mean"}, MetricCells(report.mean, kTableFormat)));
  return Header(config_hash) + Table(rows);
}

std::string MetricsCsv(const MetricsReport& report, const std::string& config_hash) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back(Concat({"trajectory"}, kMetricCsvHeads));
  for (const TrajectoryMetrics& m : report.trajectories) {
    rows.push_back(Concat({m.traj_id}, MetricCells(m, kCsvFormat)));
  }
  rows.push_back(Concat({"mean"}, MetricCells(report.mean, kCsvFormat)));
  return Header(config_hash) + Csv(rows);
}

std::string FormatComparison(const ComparisonTable& table) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back(Concat(Concat({"Method"}, kMetricHeads), {"I.S.", "I.T.(h)"}));
  for (const ComparisonRow& r : table.rows) {
    std::vector<std::string> tail = {"—", "—"};
    if (r.interaction_steps) {
      tail = {std::to_string(*r.interaction_steps),
              Fmt("%.2f", InteractionHours(*r.interaction_steps))};
    }
    rows.push_back(Concat(Concat({r.name}, MetricCells(r.metrics.mean, kTableFormat)), tail));
  }
  return Header(table.config_hash) + Table(rows);
}

std::string ComparisonCsv(const ComparisonTable& table) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back(Concat(Concat({"method"}, kMetricCsvHeads),
                        {"interaction_steps", "interaction_hours"}));
  for (const ComparisonRow& r : table.rows) {
    std::vector<std::string> tail = {"", ""};
    if (r.interaction_steps) {
      tail = {std::to_string(*r.interaction_steps),
              Fmt(kCsvFormat, InteractionHours(*r.interaction_steps))};
    }
    rows.push_back(Concat(Concat({r.name}, MetricCells(r.metrics.mean, kCsvFormat)), tail));
  }
  return Header(table.config_hash) + Csv(rows);
}

std::string FormatRounds(const RoundsResult& rounds) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back(Concat({"Round", "New steps", "I.S.", "I.T.(h)"}, kMetricHeads));
  for (const RoundResult& r : rounds.rounds) {
    rows.push_back(Concat({std::to_string(r.round), std::to_string(r.new_steps),
                           std::to_string(r.total_steps),
                           Fmt("%.2f", InteractionHours(r.total_steps))},
                          MetricCells(r.metrics.mean, kTableFormat)));
  }
  return Header(rounds.config_hash) + Table(rows);
}

std::string RoundsCsv(const RoundsResult& rounds) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back(
      Concat({"round", "new_steps", "interaction_steps", "interaction_hours"}, kMetricCsvHeads));
  for (const RoundResult& r : rounds.rounds) {
    rows.push_back(Concat({std::to_string(r.round), std::to_string(r.new_steps),
                           std::to_string(r.total_steps),
                           Fmt(kCsvFormat, InteractionHours(r.total_steps))},
                          MetricCells(r.metrics.mean, kCsvFormat)));
  }
  return Header(rounds.config_hash) + Csv(rows);
}

std::string FormatAblation(const AblationResult& ablation) {
  std::string out = Header(ablation.config_hash);
  if (!ablation.noise.empty()) {
    std::vector<std::vector<std::string>> rows;
    rows.push_back(Concat({"Noise arm", "Transitions", "Tr.MPE(deg)", "Te.MPE(deg)"},
                          kMetricHeads));
    for (const NoiseArm& a : ablation.noise) {
      rows.push_back(Concat({a.name, std::to_string(a.transitions), Fmt(kTableFormat, a.tr_mpe),
                             Fmt(kTableFormat, a.te_mpe)},
                            MetricCells(a.metrics.mean, kTableFormat)));
    }
    out += Table(rows);
  }
  if (!ablation.smooth.empty()) {
    if (!ablation.noise.empty()) out += "\n";
    std::vector<std::vector<std::string>> rows;
    rows.push_back(Concat({"k_smooth", "Po.MAE(deg)"}, kMetricHeads));
    for (const SmoothArm& a : ablation.smooth) {
      rows.push_back(Concat({Fmt("%.2f", a.k_smooth), Fmt(kTableFormat, a.po_mae)},
                            MetricCells(a.metrics.mean, kTableFormat)));
    }
    out += Table(rows);
  }
  return out;
}

std::string AblationCsv(const AblationResult& ablation) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back(Concat({"table", "arm", "transitions", "tr_mpe_deg", "te_mpe_deg", "po_mae_deg"},
                        kMetricCsvHeads));
  for (const NoiseArm& a : ablation.noise) {
    rows.push_back(Concat({"noise", a.name, std::to_string(a.transitions),
                           Fmt(kCsvFormat, a.tr_mpe), Fmt(kCsvFormat, a.te_mpe), ""},
                          MetricCells(a.metrics.mean, kCsvFormat)));
  }
  for (const SmoothArm& a : ablation.smooth) {
    rows.push_back(Concat({"k_smooth", Fmt("%g", a.k_smooth), "", "", "",
                           Fmt(kCsvFormat, a.po_mae)},
                          MetricCells(a.metrics.mean, kCsvFormat)));
  }
  return Header(ablation.config_hash) + Csv(rows);
}

std::string TrackingSeries(const Episode& episode) {
  std::string out = "# t q_swing q_boom q_arm q_bucket qs_swing qs_boom qs_arm qs_bucket (deg)\n";
  for (int t = 0; t < episode.size(); ++t) {
    const JointVector q = episode.steps[t].o.q * kRadToDeg;
    const JointVector qs = episode.Desired(t) * kRadToDeg;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%d %.6f %.6f %.6f %.6f %.6f %.6f %.6f %.6f\n", t, q[0],
                  q[1], q[2], q[3], qs[0], qs[1], qs[2], qs[3]);
    out += buf;
  }
  return out;
}

}  // namespace reftrack
