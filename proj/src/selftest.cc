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

#include "reftrack/selftest.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>

#include "reftrack/collect.h"
#include "reftrack/eval.h"
#include "reftrack/nn/gradcheck.h"
#include "reftrack/nn/mlp.h"
#include "reftrack/nn/tape.h"
#include "reftrack/refgen.h"
#include "reftrack/train.h"

namespace reftrack {

namespace {

using nn::Matrix;
using nn::Tape;
using nn::Vector;

constexpr int kHorizon = 3;

std::span<double> Span(Matrix& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
std::span<const double> Span(const Matrix& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}
std::span<double> Span(Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

Matrix Random(int rows, int cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

// sum((op(x) - target)^2), differentiated with respect to x.
template <typename Op>
double InputGradError(Matrix x, const Matrix& target, Op op) {
  Tape tape;
  const auto leaf = tape.Leaf(x);
  tape.Backward(tape.Sum(tape.Square(tape.Sub(op(tape, leaf), tape.Constant(target)))));
  const Matrix analytic = tape.grad(leaf);
  auto f = [&] {
    Tape t;
    return t.value(t.Sum(t.Square(t.Sub(op(t, t.Constant(x)), t.Constant(target)))))(0, 0);
  };
  return nn::MaxRelativeError(Span(analytic), nn::CentralDifferences(f, Span(x)));
}

double ParamError(const std::function<double()>& f, std::span<double> p,
                  std::span<const double> analytic) {
  return nn::MaxRelativeError(analytic, nn::CentralDifferences(f, p));
}

std::vector<double> Flatten(const nn::ParamTensors& t) {
  std::vector<double> out;
  for (auto block : t.Blocks()) out.insert(out.end(), block.begin(), block.end());
  return out;
}

std::vector<double> Numeric(const std::function<double()>& f, nn::ParamTensors& t) {
  std::vector<double> out;
  for (auto block : t.Blocks()) {
    const std::vector<double> d = nn::CentralDifferences(f, block);
    out.insert(out.end(), d.begin(), d.end());
  }
  return out;
}

nn::NetworkParams Perturbed(const nn::MlpSpec& spec, unsigned seed) {
  nn::NetworkParams p = nn::NetworkParams::Initialize(spec, seed);
  std::mt19937_64 rng(seed + 1);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (auto block : p.tensors.Blocks()) {
    for (double& x : block) x += u(rng);
  }
  p.input_std.setConstant(0.5);
  return p;
}

void AddGradientChecks(unsigned seed, std::vector<SelftestCheck>& checks) {
  auto add = [&](const std::string& name, double err) {
    checks.push_back({name, err, kSelftestGradTolerance, true});
  };
  std::mt19937_64 rng(seed);
  const Matrix x = Random(5, 3, rng);
  const Matrix target = Random(5, 3, rng);
  Matrix w = Random(5, 5, rng);
  Vector b = Random(5, 1, rng);
  Vector gain = Random(5, 1, rng).array() + 1.5;
  Vector offset = Random(5, 1, rng);
  const Vector mean = Random(5, 1, rng);
  const Vector stddev = Random(5, 1, rng).array().abs() + 0.5;

  add("grad affine input", InputGradError(x, target, [&](Tape& t, Tape::Var v) {
        return t.Affine(v, w, b, nullptr, nullptr);
      }));
  add("grad layernorm input", InputGradError(x, target, [&](Tape& t, Tape::Var v) {
        return t.LayerNorm(v, gain, offset, nullptr, nullptr);
      }));
  add("grad elu", InputGradError(x, target, [](Tape& t, Tape::Var v) { return t.Elu(v); }));
  add("grad tanh", InputGradError(x, target, [](Tape& t, Tape::Var v) { return t.Tanh(v); }));
  add("grad standardize", InputGradError(x, target, [&](Tape& t, Tape::Var v) {
        return t.Standardize(v, mean, stddev);
      }));
  add("grad scale rows", InputGradError(x, target, [&](Tape& t, Tape::Var v) {
        return t.ScaleRows(v, stddev);
      }));

  // Affine and LayerNorm parameters.
  Matrix gw = Matrix::Zero(5, 5);
  Vector gb = Vector::Zero(5), gg = Vector::Zero(5), go = Vector::Zero(5);
  auto build = [&](Tape& t, Matrix* pgw, Vector* pgb, Vector* pgg, Vector* pgo) {
    auto y = t.Affine(t.Constant(x), w, b, pgw, pgb);
    y = t.LayerNorm(y, gain, offset, pgg, pgo);
    return t.Sum(t.Square(t.Sub(y, t.Constant(target))));
  };
  {
    Tape tape;
    tape.Backward(build(tape, &gw, &gb, &gg, &go));
  }
  auto f = [&] {
    Tape t;
    return t.value(build(t, nullptr, nullptr, nullptr, nullptr))(0, 0);
  };
  add("grad affine weight", ParamError(f, Span(w), Span(gw)));
  add("grad affine bias", ParamError(f, Span(b), Span(gb)));
  add("grad layernorm gain", ParamError(f, Span(gain), Span(gg)));
  add("grad layernorm offset", ParamError(f, Span(offset), Span(go)));

  // Rollout losses on a short clean episode.
  const PlantConfig plant = PlantConfig::Default();
  std::vector<Trajectory> trajs =
      GenerateCycles(CycleSpec::Default(), 1, seed, plant.PositionMin(), plant.PositionMax());
  trajs[0].points.resize(40);
  const Dataset ds =
      CollectDataset(plant, PdGains::Default(), trajs, 0.05, NoiseRatio{1, 0}, seed);
  const int h = kHorizon;
  const double weight_decay = 0.003;

  std::vector<WindowRef> mw = ModelWindowStarts(ds, h);
  mw = {mw[0], mw[mw.size() / 2], mw.back()};
  const ModelBatch mb = GatherModelBatch(ds, mw, h);
  nn::NetworkParams model = Perturbed(ModelSpec(h, 2, 5), seed + 10);
  const double scale = 1.0 / static_cast<double>(mw.size());
  auto model_loss = [&] {
    Tape tape;
    const auto pred = ModelRolloutOnTape(tape, nn::Binding{&model, nullptr, true}, mb);
    return tape.value(ModelDataLossOnTape(tape, pred, mb, scale))(0, 0) +
           weight_decay * model.tensors.SquaredNorm();
  };
  nn::ParamTensors model_grads = model.tensors.ZerosLike();
  {
    Tape tape;
    const auto pred = ModelRolloutOnTape(tape, nn::Binding{&model, &model_grads, false}, mb);
    tape.Backward(ModelDataLossOnTape(tape, pred, mb, scale));
  }
  model_grads.AddScaled(model.tensors, 2.0 * weight_decay);
  add("grad model rollout loss h=3", nn::MaxRelativeError(Flatten(model_grads),
                                                          Numeric(model_loss, model.tensors)));

  std::vector<WindowRef> pw = PolicyWindowStarts(ds, h);
  pw = {pw[0], pw[pw.size() / 2], pw.back()};
  const PolicyBatch pb = GatherPolicyBatch(ds, pw, h);
  nn::NetworkParams policy = Perturbed(PolicySpec(h, 2, 5), seed + 20);
  const double pscale = 1.0 / static_cast<double>(pw.size());
  auto policy_loss = [&] {
    Tape tape;
    const auto roll = PolicyRolloutOnTape(tape, nn::Binding{&policy, nullptr, true},
                                          nn::Binding{&model, nullptr, true}, pb);
    return tape.value(PolicyLossOnTape(tape, roll, pb, 0.98, 1.0, pscale).total)(0, 0);
  };
  nn::ParamTensors policy_grads = policy.tensors.ZerosLike();
  nn::ParamTensors frozen = model.tensors.ZerosLike();
  {
    Tape tape;
    const auto roll = PolicyRolloutOnTape(tape, nn::Binding{&policy, &policy_grads, false},
                                          nn::Binding{&model, &frozen, true}, pb);
    tape.Backward(PolicyLossOnTape(tape, roll, pb, 0.98, 1.0, pscale).total);
  }
  add("grad policy rollout loss h=3", nn::MaxRelativeError(Flatten(policy_grads),
                                                           Numeric(policy_loss, policy.tensors)));
  // A frozen model must not collect anything; report it as an error size.
  checks.push_back({"frozen model gradient is zero", std::sqrt(frozen.SquaredNorm()),
                    kSelftestGradTolerance, true});
}

// Per-joint, per-step loops over the definitions.
TrajectoryMetrics NaiveMetrics(const std::vector<JointVector>& q,
                               const std::vector<JointVector>& qs, const LinkGeometry& g) {
  const int T = static_cast<int>(q.size());
  auto tip = [&](const JointVector& a, const JointVector& b) {
    const Point3 pa = ForwardKinematics(a, g), pb = ForwardKinematics(b, g);
    return std::hypot(pa.x - pb.x, pa.y - pb.y, pa.z - pb.z);
  };
  double abs = 0, sq = 0, etd = 0, d1 = 0, d2 = 0, fin = 0;
  for (int i = 0; i < T; ++i) {
    for (int j = 0; j < kNumJoints; ++j) {
      const double e = q[i][j] - qs[i][j];
      abs += std::fabs(e);
      sq += e * e;
      if (i >= 1) d1 += std::pow(q[i][j] - q[i - 1][j], 2);
      if (i >= 2) d2 += std::pow(q[i][j] - 2 * q[i - 1][j] + q[i - 2][j], 2);
      if (i == T - 1) fin += std::fabs(e);
    }
    etd += tip(q[i], qs[i]);
  }
  const double deg = 180.0 / M_PI;
  TrajectoryMetrics m;
  m.mae = abs / (4.0 * T) * deg;
  m.rmse = std::sqrt(sq / (4.0 * T)) * deg;
  m.fmae = fin / 4.0 * deg;
  m.etd_mae = etd / T * 100.0;
  m.etd_fmae = tip(q[T - 1], qs[T - 1]) * 100.0;
  m.smt1 = std::sqrt(d1 / T) * deg;
  m.smt2 = T > 1 ? std::sqrt(d2 / (T - 1)) * deg : 0.0;
  return m;
}

double MaxDiff(const TrajectoryMetrics& a, const TrajectoryMetrics& b) {
  return std::max({std::fabs(a.mae - b.mae), std::fabs(a.rmse - b.rmse),
                   std::fabs(a.fmae - b.fmae), std::fabs(a.etd_mae - b.etd_mae),
                   std::fabs(a.etd_fmae - b.etd_fmae), std::fabs(a.smt1 - b.smt1),
                   std::fabs(a.smt2 - b.smt2)});
}

void AddMetricChecks(unsigned seed, std::vector<SelftestCheck>& checks) {
  const LinkGeometry geometry;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(-1.5, 1.5), wiggle(-0.05, 0.05);
  std::uniform_int_distribution<int> length(1, 60);
  double worst = 0.0;
  for (int r = 0; r < 50; ++r) {
    const int T = length(rng);
    std::vector<JointVector> q(T), qs(T);
    for (int i = 0; i < T; ++i) {
      for (int j = 0; j < kNumJoints; ++j) {
        qs[i][j] = angle(rng);
        q[i][j] = qs[i][j] + wiggle(rng);
      }
    }
    worst = std::max(worst, MaxDiff(SequenceMetrics(q, qs, geometry), NaiveMetrics(q, qs, geometry)));
  }
  checks.push_back({"metrics vs naive oracle (50 records)", worst, kSelftestMetricTolerance});

  const std::vector<JointVector> q = {JointVector::Zero(), JointVector(0.1, 0, 0, 0)};
  const std::vector<JointVector> qs(2, JointVector::Zero());
  const TrajectoryMetrics m = SequenceMetrics(q, qs, geometry);
  checks.push_back({"hand case MAE 0.0125 rad", std::fabs(m.mae - 0.0125 * kRadToDeg),
                    kSelftestMetricTolerance});
  checks.push_back({"hand case 1stoSMT sqrt(0.01/2) rad",
                    std::fabs(m.smt1 - std::sqrt(0.01 / 2.0) * kRadToDeg),
                    kSelftestMetricTolerance});
  checks.push_back({"176720 steps -> 2.45 h",
                    std::fabs(std::round(InteractionHours(176720) * 100.0) / 100.0 - 2.45),
                    kSelftestMetricTolerance});
}

}  // namespace

bool SelftestReport::passed() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const SelftestCheck& c) { return c.passed(); });
}

double SelftestReport::MaxGradientError() const {
  double worst = 0.0;
  for (const SelftestCheck& c : checks) {
    if (c.gradient) worst = std::max(worst, c.error);
  }
  return worst;
}

SelftestReport RunSelftest(unsigned seed) {
  const auto start = std::chrono::steady_clock::now();
  SelftestReport report;
  AddGradientChecks(seed, report.checks);
  AddMetricChecks(seed, report.checks);
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::string FormatSelftest(const SelftestReport& report) {
  std::string out;
  char buf[256];
  for (const SelftestCheck& c : report.checks) {
    std::snprintf(buf, sizeof(buf), "%-4s %-40s %.3e (< %.0e)\n", c.passed() ? "ok" : "FAIL",
                  c.name.c_str(), c.error, c.tolerance);
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "max gradient relative error %.3e, %s, %.2f s\n",
                report.MaxGradientError(), report.passed() ? "all passed" : "FAILED",
                report.seconds);
  return out + buf;
}

}  // namespace reftrack
