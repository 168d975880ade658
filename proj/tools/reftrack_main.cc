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

// Command-line entry point. Artifacts land in one directory:
//
//   trajectories/{train,test}/<id>.traj   refgen, collect
//   dataset.txt                           collect
//   model.json, model_curve.txt           train-model
//   policy.json, policy_curve.txt         train-policy
//   metrics.{txt,csv}, series/<id>.txt    eval
//   comparison.{txt,csv}                  compare
//   rounds.{txt,csv}                      rounds
//   ablation.{txt,csv}                    ablate

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "reftrack/config.h"
#include "reftrack/eval.h"
#include "reftrack/io.h"
#include "reftrack/nn/checkpoint.h"
#include "reftrack/refgen.h"
#include "reftrack/selftest.h"

namespace fs = std::filesystem;

namespace reftrack {
namespace {

// Exit codes.
enum Exit : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kBadConfig = 3,
  kMissingArtifact = 4,
  kIncompatible = 5,
  kCheckFailed = 6,
};

constexpr const char* kArtifactDirEnv = "REFTRACK_ARTIFACT_DIR";

class CliError : public std::runtime_error {
 public:
  CliError(int code, const std::string& what) : std::runtime_error(what), code_(code) {}
  int code() const { return code_; }

 private:
  int code_;
};

struct Options {
  std::string config_path;
  std::string profile;
  std::optional<std::uint64_t> seed;
  std::string out;
  int threads = 0;
  bool force = false;
};

struct Context {
  RunConfig config;
  std::string hash;
  fs::path dir;
  int threads = 1;
  bool force = false;
};

Context Resolve(const Options& o) {
  Context ctx;
  try {
    if (!o.config_path.empty()) {
      std::string text;
      try {
        text = ReadTextFile(o.config_path);
      } catch (const std::runtime_error& e) {
        throw CliError(kBadConfig, e.what());
      }
      ctx.config = ConfigFromJson(text);
      if (!o.profile.empty() && o.profile != ctx.config.profile) {
        throw CliError(kUsage, "--profile " + o.profile + " conflicts with profile '" +
                                   ctx.config.profile + "' in " + o.config_path);
      }
    } else {
      ctx.config = ProfileConfig(o.profile.empty() ? "desk" : o.profile);
    }
    if (o.seed) ctx.config.seed = *o.seed;
    ctx.config.Validate();
  } catch (const std::invalid_argument& e) {
    throw CliError(kBadConfig, std::string("config: ") + e.what());
  }
  ctx.hash = ConfigHash(ctx.config);
  if (!o.out.empty()) {
    ctx.dir = o.out;
  } else if (const char* env = std::getenv(kArtifactDirEnv); env != nullptr && *env != '\0') {
    ctx.dir = env;
  } else {
    ctx.dir = ctx.config.artifact_dir;
  }
  ctx.threads = o.threads > 0 ? o.threads
                              : std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
  ctx.force = o.force;
  return ctx;
}

void RequireFile(const fs::path& path, const std::string& hint) {
  if (!fs::exists(path)) {
    throw CliError(kMissingArtifact, "missing " + path.string() + " (run " + hint + " first)");
  }
}

void CheckHash(const Context& ctx, const std::string& found, const fs::path& path) {
  if (found == ctx.hash) return;
  const std::string msg = path.string() + " was produced by config " +
                          (found.empty() ? "<none>" : found) + ", current config is " + ctx.hash;
  if (!ctx.force) throw CliError(kIncompatible, msg + " (use --force to proceed)");
  std::cerr << "reftrack: warning: " << msg << "\n";
}

void Write(const fs::path& path, const std::string& text) {
  WriteTextFile(path, text);
  std::cout << "wrote " << path.string() << "\n";
}

std::vector<Trajectory> ReadSplit(const Context& ctx, const std::string& split) {
  const fs::path dir = ctx.dir / "trajectories" / split;
  if (!fs::is_directory(dir)) {
    throw CliError(kMissingArtifact, "missing " + dir.string() + " (run refgen or collect first)");
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".traj") files.push_back(entry.path());
  }
  if (files.empty()) throw CliError(kMissingArtifact, "no .traj files in " + dir.string());
  std::sort(files.begin(), files.end());
  // Files are prefixed with their split position, so sorted order is the
  // order the split produced.
  std::vector<Trajectory> out;
  for (const fs::path& f : files) {
    TrajectoryFile tf = ReadTrajectory(f);
    CheckHash(ctx, tf.config_hash, f);
    out.push_back(std::move(tf.traj));
  }
  return out;
}

std::string TrajFileName(std::size_t index, const Trajectory& t) {
  char prefix[16];
  std::snprintf(prefix, sizeof(prefix), "%03zu_", index);
  return prefix + t.id + ".traj";
}

void WriteSplits(const Context& ctx) {
  const RunConfig& c = ctx.config;
  const std::vector<Trajectory> cycles =
      GenerateCycles(c.cycles, c.n_train + c.n_test, c.RefgenSeed(), c.plant.PositionMin(),
                     c.plant.PositionMax());
  const auto [train, test] = SplitTrajectories(cycles, c.n_train, c.n_test, c.SplitSeed());
  for (const auto& [name, set] : {std::pair{"train", &train}, std::pair{"test", &test}}) {
    const fs::path dir = ctx.dir / "trajectories" / name;
    fs::remove_all(dir);
    for (std::size_t i = 0; i < set->size(); ++i) {
      WriteTextFile(dir / TrajFileName(i, (*set)[i]), TrajectoryToText((*set)[i], ctx.hash));
    }
  }
  std::cout << "wrote " << train.size() << " train and " << test.size()
            << " test trajectories under " << (ctx.dir / "trajectories").string() << "\n";
}

Dataset LoadDataset(const Context& ctx) {
  const fs::path path = ctx.dir / "dataset.txt";
  RequireFile(path, "collect");
  Dataset ds = ReadDataset(path);
  CheckHash(ctx, ds.config_hash, path);
  return ds;
}

nn::Checkpoint LoadNet(const Context& ctx, const std::string& role, const nn::MlpSpec& spec,
                       const std::string& hint) {
  const fs::path path = ctx.dir / (role + ".json");
  RequireFile(path, hint);
  nn::Checkpoint ck;
  try {
    ck = nn::LoadCheckpoint(path, spec);
  } catch (const nn::CheckpointError& e) {
    throw CliError(kIncompatible, e.what());
  }
  if (ck.role != role) {
    throw CliError(kIncompatible, path.string() + " holds a '" + ck.role + "' network");
  }
  CheckHash(ctx, ck.config_hash, path);
  return ck;
}

std::string CurveText(const std::vector<EpochStats>& curve, bool policy) {
  std::string out = policy ? "# epoch loss track reg train_mae heldout_mae (rad)\n"
                           : "# epoch loss heldout_mpe (rad)\n";
  for (const EpochStats& e : curve) {
    out += std::to_string(e.epoch) + " " + FormatDouble(e.loss);
    if (policy) {
      out += " " + FormatDouble(e.track) + " " + FormatDouble(e.reg) + " " +
             FormatDouble(e.train_metric);
    }
    out += " " + FormatDouble(e.heldout_metric) + "\n";
  }
  return out;
}

Dataset HeldOut(const Context& ctx, const std::vector<Trajectory>& test) {
  const RunConfig& c = ctx.config;
  return ImplementPolicy(c.plant, c.gains, test, nullptr, c.h, c.EvalSeed(), ctx.threads);
}

int Refgen(const Context& ctx) {
  WriteSplits(ctx);
  return kOk;
}

int Collect(const Context& ctx) {
  WriteSplits(ctx);
  const RunConfig& c = ctx.config;
  const std::vector<Trajectory> train = ReadSplit(ctx, "train");
  Dataset ds = CollectDataset(c.plant, c.gains, train, c.sigma_max, c.ratio, c.CollectSeed(),
                              ctx.threads);
  ds.config_hash = ctx.hash;
  ReplayCheck(c.plant, ds);
  Write(ctx.dir / "dataset.txt", DatasetToText(ds));
  std::cout << ds.episodes.size() << " episodes, " << ds.NumTransitions()
            << " transitions, replay check passed\n";
  return kOk;
}

int TrainModelCmd(const Context& ctx) {
  const Dataset ds = LoadDataset(ctx);
  const Dataset held = HeldOut(ctx, ReadSplit(ctx, "test"));
  const TrainResult r = TrainModel(ds, &held, ctx.config.ModelTrainConfig(), nullptr, ctx.threads);
  nn::SaveCheckpoint({r.params, "model", ctx.hash}, ctx.dir / "model.json");
  std::cout << "wrote " << (ctx.dir / "model.json").string() << "\n";
  Write(ctx.dir / "model_curve.txt", CurveText(r.curve, false));
  const PredictionError e = ModelPredictionError(r.params, held, ctx.config.h, ctx.threads);
  std::printf("held-out %d-step position MAE %.4f deg (persistence %.4f deg)\n", ctx.config.h,
              e.model * kRadToDeg, e.persistence * kRadToDeg);
  return kOk;
}

int TrainPolicyCmd(const Context& ctx) {
  const RunConfig& c = ctx.config;
  const Dataset ds = LoadDataset(ctx);
  const nn::Checkpoint model =
      LoadNet(ctx, "model", ModelSpec(c.h, c.model.hidden_layers, c.model.hidden_width),
              "train-model");
  const Dataset held = HeldOut(ctx, ReadSplit(ctx, "test"));
  const TrainResult r =
      TrainPolicy(ds, &held, model.params, c.PolicyTrainConfig(), nullptr, ctx.threads);
  nn::SaveCheckpoint({r.params, "policy", ctx.hash}, ctx.dir / "policy.json");
  std::cout << "wrote " << (ctx.dir / "policy.json").string() << "\n";
  Write(ctx.dir / "policy_curve.txt", CurveText(r.curve, true));
  return kOk;
}

nn::Checkpoint LoadPolicy(const Context& ctx) {
  const RunConfig& c = ctx.config;
  return LoadNet(ctx, "policy", PolicySpec(c.h, c.policy.hidden_layers, c.policy.hidden_width),
                 "train-policy");
}

int Eval(const Context& ctx) {
  const RunConfig& c = ctx.config;
  const nn::Checkpoint policy = LoadPolicy(ctx);
  const std::vector<Trajectory> test = ReadSplit(ctx, "test");
  const Dataset record =
      ImplementPolicy(c.plant, c.gains, test, &policy.params, c.h, c.EvalSeed(), ctx.threads);
  const MetricsReport report = ComputeMetrics(record, test, c.plant.geometry);
  Write(ctx.dir / "metrics.txt", FormatMetrics(report, ctx.hash));
  Write(ctx.dir / "metrics.csv", MetricsCsv(report, ctx.hash));
  for (std::size_t k = 0; k < test.size(); ++k) {
    WriteTextFile(ctx.dir / "series" / (test[k].id + ".txt"), TrackingSeries(record.episodes[k]));
  }
  std::cout << FormatMetrics(report, ctx.hash);
  return kOk;
}

int Compare(const Context& ctx) {
  PipelineRun run;
  run.test_trajs = ReadSplit(ctx, "test");
  run.dataset = LoadDataset(ctx);
  run.policy.params = LoadPolicy(ctx).params;
  const ComparisonTable table = RunComparison(ctx.config, run, ctx.threads);
  Write(ctx.dir / "comparison.txt", FormatComparison(table));
  Write(ctx.dir / "comparison.csv", ComparisonCsv(table));
  std::cout << FormatComparison(table);
  return kOk;
}

int Rounds(const Context& ctx, int n_rounds) {
  const PipelineRun first = RunPipeline(ctx.config, ctx.threads);
  const RoundsResult r =
      RunRounds(ctx.config, first, n_rounds > 0 ? n_rounds : ctx.config.rounds, ctx.threads);
  Write(ctx.dir / "rounds.txt", FormatRounds(r));
  Write(ctx.dir / "rounds.csv", RoundsCsv(r));
  std::cout << FormatRounds(r);
  return kOk;
}

int Ablate(const Context& ctx, const std::string& study) {
  const PipelineRun base = RunPipeline(ctx.config, ctx.threads);
  AblationResult result;
  result.config_hash = ctx.hash;
  if (study == "noise" || study == "all") {
    result.noise = RunNoiseAblation(ctx.config, &base, ctx.threads).noise;
  }
  if (study == "smooth" || study == "all") {
    result.smooth = RunSmoothAblation(ctx.config, base, ctx.threads).smooth;
  }
  Write(ctx.dir / "ablation.txt", FormatAblation(result));
  Write(ctx.dir / "ablation.csv", AblationCsv(result));
  std::cout << FormatAblation(result);
  return kOk;
}

int StepResponseCmd(const Context& ctx, int joint, double command, int ticks, int substeps) {
  PlantConfig plant = ctx.config.plant;
  if (substeps > 0) plant.substeps = substeps;
  const JointVector q0 = 0.5 * (plant.PositionMin() + plant.PositionMax());
  std::string out = "# t_s q_rad qdot_rad_s (joint " + std::to_string(joint) + ", command " +
                    FormatDouble(command) + ")\n";
  const std::vector<Observation> resp = StepResponse(plant, joint, command, ticks, q0);
  for (std::size_t t = 0; t < resp.size(); ++t) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%.2f %.9f %.9f\n", t * kControlPeriod, resp[t].q[joint],
                  resp[t].qdot[joint]);
    out += buf;
  }
  std::cout << out;
  if (!ctx.dir.empty()) {
    WriteTextFile(ctx.dir / ("step_response_joint" + std::to_string(joint) + ".txt"), out);
  }
  return kOk;
}

int Selftest() {
  const SelftestReport report = RunSelftest();
  std::cout << FormatSelftest(report);
  return report.passed() ? kOk : kCheckFailed;
}

void AddCommon(CLI::App* app, Options& o) {
  app->add_option("--config", o.config_path, "RunConfig JSON file");
  app->add_option("--profile", o.profile, "Built-in profile: desk or paper")
      ->check(CLI::IsMember({"desk", "paper"}));
  app->add_option("--seed", o.seed, "Master seed (overrides the config)");
  app->add_option("--out", o.out,
                  std::string("Artifact directory (default: $") + kArtifactDirEnv +
                      ", then the config's artifact_dir)");
  app->add_option("--threads", o.threads, "Worker threads (default: all cores)")
      ->check(CLI::PositiveNumber);
  app->add_flag("--force", o.force, "Accept artifacts made with a different config");
}

int Main(int argc, char** argv) {
  CLI::App app{"Learned reference adjustment for a simulated excavator arm"};
  app.require_subcommand(1);
  Options o;
  int n_rounds = 0;
  std::string study = "all";
  int joint = 1, ticks = 100, substeps = 0;
  double command = 0.5;

  struct Cmd {
    CLI::App* app;
    std::function<int(const Context&)> run;
  };
  std::vector<Cmd> cmds;
  auto add = [&](const char* name, const char* help, std::function<int(const Context&)> run) {
    CLI::App* sub = app.add_subcommand(name, help);
    AddCommon(sub, o);
    cmds.push_back({sub, std::move(run)});
    return sub;
  };
  add("refgen", "Generate and split reference cycles", Refgen);
  add("collect", "Run the PD loop with exploration noise and save the dataset", Collect);
  add("train-model", "Train the closed-loop dynamics model", TrainModelCmd);
  add("train-policy", "Train the reference-adjustment policy", TrainPolicyCmd);
  add("eval", "Evaluate the policy on the test trajectories", Eval);
  add("compare", "PD baseline vs learned policy table", Compare);
  add("rounds", "Repeat collection and training with the learned policy",
      [&](const Context& ctx) { return Rounds(ctx, n_rounds); })
      ->add_option("--rounds", n_rounds, "Number of rounds (default: config)")
      ->check(CLI::PositiveNumber);
  add("ablate", "Noise-mix and smoothness ablations",
      [&](const Context& ctx) { return Ablate(ctx, study); })
      ->add_option("--study", study, "noise, smooth or all")
      ->check(CLI::IsMember({"noise", "smooth", "all"}));
  add("selftest", "Gradient checks and metric oracles", [](const Context&) { return Selftest(); });
  add("config", "Print the resolved configuration as JSON", [&](const Context& ctx) {
    std::cout << ConfigToJson(ctx.config);
    std::cerr << "config hash " << ctx.hash << "\n";
    return kOk;
  });

  CLI::App* plant = app.add_subcommand("plant", "Plant utilities");
  plant->require_subcommand(1);
  CLI::App* step = plant->add_subcommand("step-response", "Open-loop single-joint step response");
  AddCommon(step, o);
  step->add_option("--joint", joint, "Joint index 0..3 (swing, boom, arm, bucket)")
      ->check(CLI::Range(0, kNumJoints - 1));
  step->add_option("--command", command, "Constant valve command in [-1, 1]")
      ->check(CLI::Range(-1.0, 1.0));
  step->add_option("--ticks", ticks, "Control ticks to simulate")->check(CLI::PositiveNumber);
  step->add_option("--substeps", substeps, "Integrator substeps (default: config)")
      ->check(CLI::PositiveNumber);
  cmds.push_back({step, [&](const Context& ctx) {
                    return StepResponseCmd(ctx, joint, command, ticks, substeps);
                  }});

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "reftrack: error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    for (const Cmd& c : cmds) {
      if (c.app->parsed()) {
        Context ctx = Resolve(o);
        if (c.app == step && o.out.empty()) ctx.dir.clear();
        return c.run(ctx);
      }
    }
    return kUsage;
  } catch (const CliError& e) {
    std::cerr << "reftrack: error: " << e.what() << "\n";
    return e.code();
  } catch (const FormatError& e) {
    std::cerr << "reftrack: error: " << e.what() << "\n";
    return kMissingArtifact;
  } catch (const std::exception& e) {
    std::cerr << "reftrack: error: " << e.what() << "\n";
    return kFailure;
  }
}

}  // namespace
}  // namespace reftrack

int main(int argc, char** argv) { return reftrack::Main(argc, argv); }
