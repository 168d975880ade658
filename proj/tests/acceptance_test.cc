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

// End-to-end acceptance run on the desk profile. Prints progress, then one
// PASS/FAIL line per criterion; exits nonzero if any criterion fails.
//
// Usage: acceptance_test [--threads N] [--cli PATH] [--work DIR]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "reftrack/config.h"
#include "reftrack/eval.h"
#include "reftrack/io.h"
#include "reftrack/plant.h"
#include "reftrack/selftest.h"

namespace fs = std::filesystem;

namespace reftrack {
namespace {

constexpr int kSeeds[] = {1, 2, 3};
constexpr double kMinReduction = 0.40;
constexpr double kPipelineBudgetSeconds = 15 * 60;
constexpr double kSelftestBudgetSeconds = 30;

struct Verdict {
  bool pass = true;
  std::string detail;

  void Require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += (ok ? "" : "NOT ") + what;
  }
};

std::string F(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, v);
  return buf;
}

double Seconds(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

void Log(const std::string& s) {
  std::printf("  %s\n", s.c_str());
  std::fflush(stdout);
}

double Median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

RunConfig Desk(std::uint64_t seed) {
  RunConfig c = ProfileConfig("desk");
  c.seed = seed;
  return c;
}

struct SeedRun {
  RunConfig config;
  PipelineRun run;
  ComparisonTable table;
  double seconds = 0.0;
};

Verdict Criterion1() {
  const SelftestReport r = RunSelftest();
  int n = 0;
  for (const SelftestCheck& c : r.checks) n += c.gradient;
  Verdict v;
  v.Require(n >= 12, std::to_string(n) + " gradient checks");
  v.Require(r.MaxGradientError() < kSelftestGradTolerance,
            "max gradient rel. error " + F("%.3e", r.MaxGradientError()) + " < 1e-4");
  v.Require(r.seconds < kSelftestBudgetSeconds, "runtime " + F("%.2f", r.seconds) + " s < 30 s");
  return v;
}

Verdict Criterion2(const std::vector<SeedRun>& runs) {
  Verdict v;
  int good = 0;
  double total = 0.0;
  bool in_time = true;
  for (const SeedRun& s : runs) {
    const double pd = s.table.rows[0].metrics.mean.mae;
    const double pol = s.table.rows[1].metrics.mean.mae;
    const double reduction = 1.0 - pol / pd;
    good += reduction >= kMinReduction;
    total += s.seconds;
    in_time = in_time && s.seconds < kPipelineBudgetSeconds;
    v.detail += "seed " + std::to_string(s.config.seed) + " " + F("%.3f", pd) + "->" +
                F("%.3f", pol) + " deg (" + F("%.1f", 100 * reduction) + "%, " +
                F("%.0f", s.seconds) + " s); ";
  }
  v.pass = good >= 2 && in_time;
  v.detail += std::to_string(good) + "/3 seeds >= 40%, each run < 15 min: " +
              (in_time ? "yes" : "no") + " (total " + F("%.0f", total) + " s)";
  return v;
}

Verdict Criterion3(const std::vector<SeedRun>& runs, int threads) {
  Verdict v;
  for (const SeedRun& s : runs) {
    const RunConfig& c = s.config;
    const Dataset held = ImplementPolicy(c.plant, c.gains, s.run.test_trajs, nullptr, c.h,
                                         c.EvalSeed(), threads);
    const auto per = ModelPredictionErrorPerEpisode(s.run.model.params, held, c.h, threads);
    for (std::size_t k = 0; k < per.size(); ++k) {
      v.Require(per[k].model < per[k].persistence,
                "seed " + std::to_string(c.seed) + " " + held.episodes[k].traj_id + " " +
                    F("%.4f", per[k].model * kRadToDeg) + " < " +
                    F("%.4f", per[k].persistence * kRadToDeg) + " deg");
    }
  }
  return v;
}

Verdict Criterion4(const SeedRun& s, int threads) {
  const AblationResult a = RunSmoothAblation(s.config, s.run, threads);
  Log(FormatAblation(a));
  auto arm = [&](double k) -> const SmoothArm& {
    for (const SmoothArm& x : a.smooth) {
      if (x.k_smooth == k) return x;
    }
    throw std::logic_error("missing k_smooth arm");
  };
  Verdict v;
  v.Require(arm(1).metrics.mean.smt2 <= arm(0).metrics.mean.smt2,
            "2ndoSMT k=1 " + F("%.5f", arm(1).metrics.mean.smt2) + " <= k=0 " +
                F("%.5f", arm(0).metrics.mean.smt2));
  const double lowest = std::min({arm(0).po_mae, arm(1).po_mae, arm(2).po_mae});
  v.Require(arm(0).po_mae == lowest, "Po.MAE k=0 " + F("%.5f", arm(0).po_mae) +
                                         " lowest of (" + F("%.5f", arm(1).po_mae) + ", " +
                                         F("%.5f", arm(2).po_mae) + ")");
  return v;
}

Verdict Criterion5(const std::vector<SeedRun>& runs, int threads) {
  std::vector<double> mixed, clean;
  Verdict v;
  for (const SeedRun& s : runs) {
    const NoiseRatio none = NoiseArmRatios(s.config.ratio)[0];
    const auto start = std::chrono::steady_clock::now();
    const PipelineRun no_noise = RunPipeline(s.config, threads, none);
    const NoiseArm a = EvaluateNoiseArm(s.config, no_noise, none, "no-noise", threads);
    const NoiseArm b = EvaluateNoiseArm(s.config, s.run, s.config.ratio, "mixed", threads);
    if (a.transitions != b.transitions) throw std::logic_error("noise arms differ in volume");
    Log("seed " + std::to_string(s.config.seed) + " Te.MPE mixed " + F("%.4f", b.te_mpe) +
        " no-noise " + F("%.4f", a.te_mpe) + " deg, Tr.MPE mixed " + F("%.4f", b.tr_mpe) +
        " no-noise " + F("%.4f", a.tr_mpe) + " (" + F("%.0f", Seconds(start)) + " s)");
    mixed.push_back(b.te_mpe);
    clean.push_back(a.te_mpe);
  }
  v.Require(Median(mixed) <= Median(clean), "median Te.MPE mixed " + F("%.4f", Median(mixed)) +
                                                " <= no-noise " + F("%.4f", Median(clean)) +
                                                " deg");
  return v;
}

Verdict Criterion6(const std::vector<SeedRun>& runs, int threads) {
  std::vector<double> r1, r2;
  Verdict v;
  bool warm = true, increment = true;
  for (const SeedRun& s : runs) {
    const RoundsResult r = RunRounds(s.config, s.run, 2, threads);
    Log(FormatRounds(r));
    r1.push_back(r.rounds[0].metrics.mean.mae);
    r2.push_back(r.rounds[1].metrics.mean.mae);
    warm = warm && r.rounds[1].model_initial == r.rounds[0].model_final &&
           r.rounds[1].policy_initial == r.rounds[0].policy_final;
    long pass = 0;
    for (const Trajectory& t : s.run.train_trajs) pass += t.steps();
    increment = increment && r.rounds[1].new_steps == pass &&
                r.rounds[1].total_steps == r.rounds[0].total_steps + pass;
  }
  v.Require(Median(r2) <= Median(r1), "median MAE round 2 " + F("%.4f", Median(r2)) +
                                          " <= round 1 " + F("%.4f", Median(r1)) + " deg");
  v.Require(warm, "round-2 warm start bit-equal to round-1 finals");
  v.Require(increment, "round-2 increment equals one clean pass");
  return v;
}

Verdict Criterion7() {
  const SelftestReport r = RunSelftest();
  Verdict v;
  for (const SelftestCheck& c : r.checks) {
    if (!c.gradient) v.Require(c.passed(), c.name + " " + F("%.1e", c.error));
  }
  v.Require(F("%.2f", InteractionHours(176720)) == "2.45", "I.T. printed as 2.45");
  return v;
}

std::string Slurp(const fs::path& p) {
  try {
    return ReadTextFile(p);
  } catch (const std::exception&) {
    return "<missing " + p.string() + ">";
  }
}

// Runs the CLI pipeline into `dir`; returns false if any step fails.
bool RunCli(const std::string& cli, const fs::path& dir, int threads) {
  fs::remove_all(dir);
  for (const char* cmd : {"collect", "train-model", "train-policy", "eval", "compare"}) {
    const std::string line = "\"" + cli + "\" " + cmd + " --profile desk --seed 1 --threads " +
                             std::to_string(threads) + " --out \"" + dir.string() +
                             "\" > \"" + (dir.string() + ".log") + "\" 2>&1";
    fs::create_directories(dir);
    if (std::system(line.c_str()) != 0) {
      Log("CLI step failed: " + line);
      return false;
    }
  }
  return true;
}

Verdict Criterion8(const SeedRun& s1, const std::string& cli, const fs::path& work,
                   int threads) {
  Verdict v;
  const std::string in_process = FormatComparison(s1.table);
  const std::string in_process_csv = ComparisonCsv(s1.table);
  const fs::path a = work / "run_threads1", b = work / "run_threads4";
  const auto start = std::chrono::steady_clock::now();
  const bool ok_a = RunCli(cli, a, 1);
  const bool ok_b = RunCli(cli, b, 4);
  Log("two CLI pipelines took " + F("%.0f", Seconds(start)) + " s");
  v.Require(ok_a && ok_b, "CLI pipelines completed");
  for (const char* f : {"comparison.txt", "comparison.csv", "metrics.txt", "metrics.csv"}) {
    v.Require(Slurp(a / f) == Slurp(b / f), std::string(f) + " identical for threads 1 vs 4");
  }
  v.Require(Slurp(a / "comparison.txt") == in_process &&
                Slurp(a / "comparison.csv") == in_process_csv,
            "CLI report identical to in-process run (threads " + std::to_string(threads) + ")");
  v.Require(Slurp(a / "model.json") == Slurp(b / "model.json") &&
                Slurp(a / "policy.json") == Slurp(b / "policy.json"),
            "checkpoints identical");
  return v;
}

Verdict Criterion9(const std::vector<SeedRun>& runs) {
  Verdict v;
  // Step response: decoupled plant, first-order closed form at t = tau.
  PlantConfig c = PlantConfig::Default();
  c.gravity_sag = 0.0;
  c.swing_inertia = 0.0;
  c.cross_bleed = 0.0;
  c.substeps = 50;
  for (JointParams& j : c.joints) {
    j.dead_zone = 0.0;
    j.delay = 0;
  }
  const JointVector mid(0.0, -0.4, 0.6, 0.3);
  double worst = 0.0;
  for (int j = 0; j < kNumJoints; ++j) {
    const JointParams& p = c.joints[j];
    const int ticks = static_cast<int>(std::lround(p.time_constant / kControlPeriod));
    const auto resp = StepResponse(c, j, 0.5, ticks, mid);
    const double expected = p.gain * 0.5 * (1.0 - std::exp(-ticks * kControlPeriod / p.time_constant));
    worst = std::max(worst, std::fabs(resp.back().qdot[j] - expected) / expected);
  }
  v.Require(worst <= 0.02, "step response rel. error at t=tau " + F("%.2e", worst) + " <= 2%");

  // Dead zone: commands inside the band never move a joint at rest.
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  bool dead_ok = true;
  for (int trial = 0; trial < 200 && dead_ok; ++trial) {
    PlantConfig d = PlantConfig::Default();
    d.gravity_sag = 0.0;
    const int j = trial % kNumJoints;
    Excavator env(d);
    const Observation o0 = env.Reset(mid);
    JointVector u = JointVector::Zero();
    u[j] = (unit(rng) < 0.5 ? -1 : 1) * unit(rng) * d.joints[j].dead_zone;
    for (int t = 0; t < 50; ++t) env.Step(u);
    dead_ok = env.GetObservation() == o0;
  }
  v.Require(dead_ok, "dead-zone fuzz (200 trials)");

  // Delay: an impulse is invisible for exactly `delay` ticks.
  bool delay_ok = true;
  for (int trial = 0; trial < 200 && delay_ok; ++trial) {
    PlantConfig d = c;
    d.substeps = 5;
    const int j = trial % kNumJoints;
    d.joints[j].delay = 1 + static_cast<int>(unit(rng) * 6);
    Excavator env(d);
    const Observation o0 = env.Reset(mid);
    JointVector u = JointVector::Zero();
    u[j] = 0.2 + 0.8 * unit(rng);
    for (int t = 0; t < d.joints[j].delay; ++t) {
      env.Step(t == 0 ? u : JointVector::Zero());
      delay_ok = delay_ok && env.GetObservation() == o0;
    }
    env.Step(JointVector::Zero());
    delay_ok = delay_ok && env.GetObservation().qdot[j] > 0.0;
  }
  v.Require(delay_ok, "delay fuzz (200 trials)");

  bool replay_ok = true;
  for (const SeedRun& s : runs) {
    try {
      ReplayCheck(s.config.plant, s.run.dataset);
      ReplayCheck(s.config.plant, DatasetFromText(DatasetToText(s.run.dataset)));
    } catch (const std::exception& e) {
      Log(e.what());
      replay_ok = false;
    }
  }
  v.Require(replay_ok, "replay check on all " + std::to_string(runs.size()) + " desk datasets");
  return v;
}

int Main(int argc, char** argv) {
  int threads = std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
  std::string cli = REFTRACK_CLI_PATH;
  fs::path work = fs::temp_directory_path() / "reftrack_acceptance";
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string flag = argv[i];
    if (flag == "--threads") {
      threads = std::atoi(argv[i + 1]);
    } else if (flag == "--cli") {
      cli = argv[i + 1];
    } else if (flag == "--work") {
      work = argv[i + 1];
    } else {
      std::fprintf(stderr, "unknown flag %s\n", flag.c_str());
      return 2;
    }
  }
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::pair<int, Verdict>> verdicts;
  auto record = [&](int id, const std::function<Verdict()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = Verdict{false, std::string("exception: ") + e.what()};
    }
    Log("criterion " + std::to_string(id) + " evaluated in " + F("%.0f", Seconds(t0)) + " s");
    verdicts.emplace_back(id, v);
  };

  record(1, Criterion1);
  record(7, Criterion7);

  std::vector<SeedRun> runs;
  for (int seed : kSeeds) {
    SeedRun s;
    s.config = Desk(seed);
    const auto t0 = std::chrono::steady_clock::now();
    s.run = RunPipeline(s.config, threads);
    s.table = RunComparison(s.config, s.run, threads);
    s.seconds = Seconds(t0);
    Log("seed " + std::to_string(seed) + " pipeline " + F("%.0f", s.seconds) + " s");
    Log(FormatComparison(s.table));
    runs.push_back(std::move(s));
  }
  record(2, [&] { return Criterion2(runs); });
  record(3, [&] { return Criterion3(runs, threads); });
  record(9, [&] { return Criterion9(runs); });
  record(4, [&] { return Criterion4(runs[0], threads); });
  record(5, [&] { return Criterion5(runs, threads); });
  record(6, [&] { return Criterion6(runs, threads); });
  record(8, [&] { return Criterion8(runs[0], cli, work, threads); });

  std::sort(verdicts.begin(), verdicts.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  bool all = true;
  std::printf("\n");
  for (const auto& [id, v] : verdicts) {
    std::printf("criterion %d: %s  %s\n", id, v.pass ? "PASS" : "FAIL", v.detail.c_str());
    all = all && v.pass;
  }
  std::printf("acceptance: %s in %.0f s\n", all ? "PASS" : "FAIL", Seconds(start));
  return all ? 0 : 1;
}

}  // namespace
}  // namespace reftrack

int main(int argc, char** argv) { return reftrack::Main(argc, argv); }
