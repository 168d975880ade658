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

#include <cmath>
#include <filesystem>
#include <random>
#include <vector>

#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include "reftrack/nn/adam.h"
#include "reftrack/nn/checkpoint.h"
#include "reftrack/nn/gradcheck.h"
#include "reftrack/nn/mlp.h"
#include "reftrack/nn/tape.h"

namespace reftrack::nn {
namespace {

using ::testing::HasSubstr;

constexpr double kGradTolerance = 1e-4;

Matrix RandomMatrix(int rows, int cols, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

std::span<double> AsSpan(Matrix& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}
std::span<double> AsSpan(Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}
std::span<const double> AsSpan(const Matrix& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

MlpSpec SmallSpec(int input_dim, int output_dim, int width = 4, int layers = 2) {
  MlpSpec s;
  s.input_dim = input_dim;
  s.hidden_layers = layers;
  s.hidden_width = width;
  s.output_dim = output_dim;
  s.output_scale = Vector::LinSpaced(output_dim, 0.5, 1.5);
  return s;
}

// ---------------- forward ----------------

TEST(ForwardTest, ZeroNetworkGivesZero) {
  const NetworkParams p = NetworkParams::Zero(SmallSpec(5, 3));
  std::mt19937_64 rng(1);
  const Matrix out = Forward(p, RandomMatrix(5, 7, rng, 10.0));
  EXPECT_TRUE((out.array() == 0.0).all());
}

TEST(ForwardTest, OutputStrictlyBoundedByScale) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    NetworkParams p = NetworkParams::Initialize(SmallSpec(6, 3, 8), trial);
    for (Matrix& w : p.tensors.weights) w *= 5.0;
    const Matrix out = Forward(p, RandomMatrix(6, 16, rng, 5.0));
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
      for (Eigen::Index r = 0; r < out.rows(); ++r) {
        EXPECT_LT(std::abs(out(r, c)), p.spec.output_scale[r]);
      }
    }
  }
}

TEST(ForwardTest, HandComputedSingleUnitNetwork) {
  MlpSpec s;
  s.input_dim = 1;
  s.hidden_layers = 1;
  s.hidden_width = 1;
  s.output_dim = 1;
  s.output_scale = Vector::Ones(1);
  NetworkParams p = NetworkParams::Zero(s);
  p.tensors.weights[0](0, 0) = 1.0;
  p.tensors.weights[1](0, 0) = 1.0;
  p.tensors.ln_gain[0][0] = 1.0;
  p.tensors.ln_offset[0][0] = 0.5;
  Vector x(1);
  x << 0.3;
  // LayerNorm of a width-1 vector is 0, + offset 0.5, ELU(0.5) = 0.5.
  EXPECT_NEAR(Forward(p, x)[0], std::tanh(0.5), 1e-15);
  EXPECT_NEAR(Forward(p, x)[0], 0.462117, 1e-6);
}

TEST(ForwardTest, RejectsWrongDimensionAndNonFiniteInput) {
  const NetworkParams p = NetworkParams::Initialize(SmallSpec(3, 2), 0);
  EXPECT_THROW(Forward(p, Vector(Vector::Zero(4))), std::invalid_argument);
  Vector bad = Vector::Zero(3);
  bad[1] = std::nan("");
  EXPECT_THROW(Forward(p, bad), std::invalid_argument);
}

TEST(ForwardTest, DeterministicAcrossCalls) {
  const NetworkParams p = NetworkParams::Initialize(SmallSpec(4, 2, 16, 3), 9);
  std::mt19937_64 rng(3);
  const Matrix x = RandomMatrix(4, 10, rng);
  const Matrix a = Forward(p, x);
  const Matrix b = Forward(p, x);
  EXPECT_TRUE((a.array() == b.array()).all());
}

TEST(LayerNormTest, ConstantColumnGivesOffsetExactly) {
  Tape tape;
  Vector gain = Vector::LinSpaced(5, 0.5, 2.0);
  Vector offset = Vector::LinSpaced(5, -1.0, 1.0);
  Matrix x(5, 3);
  x.col(0).setConstant(0.1);
  x.col(1).setConstant(-7.3);
  x.col(2).setConstant(1e6);
  const auto y = tape.LayerNorm(tape.Constant(x), gain, offset, nullptr, nullptr);
  for (int c = 0; c < 3; ++c) {
    EXPECT_TRUE((tape.value(y).col(c).array() == offset.array()).all());
  }
}

// ---------------- backward ----------------

// Gradient of sum((op(x) - target)^2) w.r.t. x and any parameters, checked
// against central differences.
template <typename Op>
double PrimitiveGradError(Matrix x, const Matrix& target, Op op) {
  Tape tape;
  const auto leaf = tape.Leaf(x);
  const auto y = op(tape, leaf);
  const auto loss = tape.Sum(tape.Square(tape.Sub(y, tape.Constant(target))));
  tape.Backward(loss);
  const Matrix analytic = tape.grad(leaf);
  auto f = [&]() {
    Tape t;
    const auto yy = op(t, t.Constant(x));
    const auto l = t.Sum(t.Square(t.Sub(yy, t.Constant(target))));
    return t.value(l)(0, 0);
  };
  const std::vector<double> numeric = CentralDifferences(f, AsSpan(x));
  return MaxRelativeError(AsSpan(analytic), numeric);
}

TEST(BackwardTest, PrimitiveInputGradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(11);
  const Matrix x = RandomMatrix(5, 3, rng);
  const Matrix target = RandomMatrix(5, 3, rng);
  const Matrix w = RandomMatrix(5, 5, rng);
  const Vector b = RandomMatrix(5, 1, rng);
  const Vector gain = RandomMatrix(5, 1, rng) + Matrix::Constant(5, 1, 1.5);
  const Vector offset = RandomMatrix(5, 1, rng);
  const Vector mean = RandomMatrix(5, 1, rng);
  const Vector stddev = (RandomMatrix(5, 1, rng).array().abs() + 0.5).matrix();

  EXPECT_LT(PrimitiveGradError(x, target, [&](Tape& t, Tape::Var v) {
              return t.Affine(v, w, b, nullptr, nullptr);
            }), kGradTolerance);
  EXPECT_LT(PrimitiveGradError(x, target, [&](Tape& t, Tape::Var v) {
              return t.LayerNorm(v, gain, offset, nullptr, nullptr);
            }), kGradTolerance);
  EXPECT_LT(PrimitiveGradError(x, target, [](Tape& t, Tape::Var v) { return t.Elu(v); }),
            kGradTolerance);
  EXPECT_LT(PrimitiveGradError(x, target, [](Tape& t, Tape::Var v) { return t.Tanh(v); }),
            kGradTolerance);
  EXPECT_LT(PrimitiveGradError(x, target, [&](Tape& t, Tape::Var v) {
              return t.Standardize(v, mean, stddev);
            }), kGradTolerance);
  EXPECT_LT(PrimitiveGradError(x, target, [&](Tape& t, Tape::Var v) {
              return t.ScaleRows(v, stddev);
            }), kGradTolerance);
  EXPECT_LT(PrimitiveGradError(x, Matrix::Zero(1, 1), [](Tape& t, Tape::Var v) {
              return t.Mean(t.Square(v));
            }), kGradTolerance);
  EXPECT_LT(PrimitiveGradError(x, target.topRows(2), [](Tape& t, Tape::Var v) {
              return t.Scale(t.Slice(v, 1, 2), -3.0);
            }), kGradTolerance);
  EXPECT_LT(PrimitiveGradError(x, Matrix::Zero(10, 3), [](Tape& t, Tape::Var v) {
              std::vector<Tape::Var> parts{v, t.Add(v, v)};
              return t.Concat(parts);
            }), kGradTolerance);
}

TEST(BackwardTest, AffineAndLayerNormParameterGradients) {
  std::mt19937_64 rng(12);
  const Matrix x = RandomMatrix(4, 6, rng);
  const Matrix target = RandomMatrix(3, 6, rng);
  Matrix w = RandomMatrix(3, 4, rng);
  Vector b = RandomMatrix(3, 1, rng);
  Vector gain = RandomMatrix(3, 1, rng);
  Vector offset = RandomMatrix(3, 1, rng);

  Matrix gw = Matrix::Zero(3, 4);
  Vector gb = Vector::Zero(3), gg = Vector::Zero(3), go = Vector::Zero(3);
  auto build = [&](Tape& t, Matrix* pgw, Vector* pgb, Vector* pgg, Vector* pgo) {
    auto y = t.Affine(t.Constant(x), w, b, pgw, pgb);
    y = t.LayerNorm(y, gain, offset, pgg, pgo);
    return t.Sum(t.Square(t.Sub(y, t.Constant(target))));
  };
  {
    Tape tape;
    tape.Backward(build(tape, &gw, &gb, &gg, &go));
  }
  auto f = [&]() {
    Tape t;
    return t.value(build(t, nullptr, nullptr, nullptr, nullptr))(0, 0);
  };
  EXPECT_LT(MaxRelativeError(AsSpan(gw), CentralDifferences(f, AsSpan(w))), kGradTolerance);
  EXPECT_LT(MaxRelativeError(AsSpan(gb), CentralDifferences(f, AsSpan(b))), kGradTolerance);
  EXPECT_LT(MaxRelativeError(AsSpan(gg), CentralDifferences(f, AsSpan(gain))), kGradTolerance);
  EXPECT_LT(MaxRelativeError(AsSpan(go), CentralDifferences(f, AsSpan(offset))),
            kGradTolerance);
}

TEST(BackwardTest, SquaredOutputNormMatchesFiniteDifferences) {
  NetworkParams p = NetworkParams::Initialize(SmallSpec(3, 2, 5, 2), 21);
  p.input_mean = Vector::LinSpaced(3, -0.2, 0.4);
  p.input_std = Vector::LinSpaced(3, 0.5, 2.0);
  std::mt19937_64 rng(5);
  Matrix x = RandomMatrix(3, 4, rng);
  ParamTensors grads = p.tensors.ZerosLike();
  Tape tape;
  const auto in = tape.Leaf(x);
  const auto out = ForwardOnTape(tape, Binding{&p, &grads, false}, in);
  tape.Backward(tape.Sum(tape.Square(out)));
  auto f = [&]() {
    return Forward(p, x).squaredNorm();
  };
  auto analytic = grads.Blocks();
  auto params = p.tensors.Blocks();
  for (std::size_t k = 0; k < params.size(); ++k) {
    EXPECT_LT(MaxRelativeError(analytic[k], CentralDifferences(f, params[k])), kGradTolerance)
        << "block " << k;
  }
  const Matrix dx = tape.grad(in);
  EXPECT_LT(MaxRelativeError(AsSpan(dx), CentralDifferences(f, AsSpan(x))), kGradTolerance);
}

TEST(BackwardTest, FrozenParametersAccumulateNothing) {
  const NetworkParams p = NetworkParams::Initialize(SmallSpec(3, 2), 4);
  ParamTensors grads = p.tensors.ZerosLike();
  std::mt19937_64 rng(6);
  Tape tape;
  const auto in = tape.Leaf(RandomMatrix(3, 5, rng));
  const auto out = ForwardOnTape(tape, Binding{&p, &grads, /*frozen=*/true}, in);
  tape.Backward(tape.Sum(tape.Square(out)));
  EXPECT_EQ(grads.SquaredNorm(), 0.0);
  EXPECT_GT(tape.grad(in).squaredNorm(), 0.0);
}

// policy -> frozen model -> policy -> frozen model, gradient w.r.t. policy.
TEST(BackwardTest, PolicyThroughFrozenModelChain) {
  NetworkParams model = NetworkParams::Initialize(SmallSpec(4, 2, 4), 31);
  NetworkParams policy = NetworkParams::Initialize(SmallSpec(2, 2, 4), 32);
  std::mt19937_64 rng(7);
  const Matrix state0 = RandomMatrix(2, 3, rng);
  ParamTensors model_grads = model.tensors.ZerosLike();
  ParamTensors policy_grads = policy.tensors.ZerosLike();
  auto build = [&](Tape& t, ParamTensors* pg, ParamTensors* mg) {
    Tape::Var s = t.Constant(state0);
    for (int step = 0; step < 2; ++step) {
      const auto a = ForwardOnTape(t, Binding{&policy, pg, false}, s);
      std::vector<Tape::Var> parts{s, a};
      const auto d = ForwardOnTape(t, Binding{&model, mg, true}, t.Concat(parts));
      s = t.Add(s, d);
    }
    return t.Sum(t.Square(s));
  };
  {
    Tape tape;
    tape.Backward(build(tape, &policy_grads, &model_grads));
  }
  EXPECT_EQ(model_grads.SquaredNorm(), 0.0);
  auto f = [&]() {
    Tape t;
    return t.value(build(t, nullptr, nullptr))(0, 0);
  };
  auto analytic = policy_grads.Blocks();
  auto params = policy.tensors.Blocks();
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    worst = std::max(worst, MaxRelativeError(analytic[k], CentralDifferences(f, params[k])));
  }
  EXPECT_LT(worst, kGradTolerance);
}

TEST(BackwardTest, NonFiniteForwardReportsOpIndex) {
  Tape tape;
  const auto a = tape.Leaf(Matrix::Constant(1, 1, 1e200));
  try {
    tape.Square(a);  // op #1 overflows
    FAIL() << "expected throw";
  } catch (const NonFiniteError& e) {
    EXPECT_EQ(e.op_index(), 1);
    EXPECT_THAT(e.what(), HasSubstr("square"));
  }
}

// ---------------- adam ----------------

TEST(AdamTest, ZeroGradientLeavesEverythingUnchanged) {
  NetworkParams p = NetworkParams::Initialize(SmallSpec(3, 2), 1);
  const ParamTensors before = p.tensors;
  AdamState state = AdamState::For(p.tensors, AdamOptions{1e-3});
  AdamStep(p.tensors, p.tensors.ZerosLike(), state);
  EXPECT_EQ(p.tensors, before);
  EXPECT_EQ(state.m.SquaredNorm(), 0.0);
  EXPECT_EQ(state.v.SquaredNorm(), 0.0);
  EXPECT_EQ(state.step, 1);
}

TEST(AdamTest, FirstStepIsSignedLearningRate) {
  NetworkParams p = NetworkParams::Initialize(SmallSpec(3, 2), 2);
  const ParamTensors before = p.tensors;
  ParamTensors g = p.tensors.ZerosLike();
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  for (auto block : g.Blocks()) {
    for (double& x : block) x = dist(rng);
  }
  const AdamOptions opt{1e-3};
  AdamState state = AdamState::For(p.tensors, opt);
  AdamStep(p.tensors, g, state);
  auto pb = p.tensors.Blocks();
  auto bb = before.Blocks();
  auto gb = std::as_const(g).Blocks();
  for (std::size_t k = 0; k < pb.size(); ++k) {
    for (std::size_t i = 0; i < pb[k].size(); ++i) {
      const double expected = -opt.lr * gb[k][i] / (std::abs(gb[k][i]) + opt.eps);
      EXPECT_NEAR(pb[k][i] - bb[k][i], expected, 1e-15);
    }
  }
}

TEST(AdamTest, ConstantGradientMovesMonotonically) {
  NetworkParams p = NetworkParams::Initialize(SmallSpec(2, 1), 3);
  ParamTensors g = p.tensors.ZerosLike();
  for (auto block : g.Blocks()) {
    for (std::size_t i = 0; i < block.size(); ++i) block[i] = (i % 2 == 0) ? 0.5 : -0.25;
  }
  AdamState state = AdamState::For(p.tensors, AdamOptions{1e-2});
  const ParamTensors p0 = p.tensors;
  AdamStep(p.tensors, g, state);
  const ParamTensors p1 = p.tensors;
  AdamStep(p.tensors, g, state);
  auto b0 = p0.Blocks(), b1 = p1.Blocks(), b2 = std::as_const(p.tensors).Blocks();
  auto gb = std::as_const(g).Blocks();
  for (std::size_t k = 0; k < b0.size(); ++k) {
    for (std::size_t i = 0; i < b0[k].size(); ++i) {
      const double sign = gb[k][i] > 0 ? 1.0 : -1.0;
      EXPECT_LT(sign * (b1[k][i] - b0[k][i]), 0.0);
      EXPECT_LT(sign * (b2[k][i] - b1[k][i]), 0.0);
    }
  }
}

TEST(AdamTest, ZeroLearningRateIsIdentity) {
  NetworkParams p = NetworkParams::Initialize(SmallSpec(3, 2), 4);
  const ParamTensors before = p.tensors;
  ParamTensors g = p.tensors;  // arbitrary non-zero gradient
  AdamState state = AdamState::For(p.tensors, AdamOptions{0.0});
  for (int i = 0; i < 5; ++i) AdamStep(p.tensors, g, state);
  EXPECT_EQ(p.tensors, before);
}

TEST(AdamTest, NonFiniteGradientAborts) {
  NetworkParams p = NetworkParams::Initialize(SmallSpec(3, 2), 5);
  ParamTensors g = p.tensors.ZerosLike();
  g.biases[1][0] = std::numeric_limits<double>::infinity();
  AdamState state = AdamState::For(p.tensors, AdamOptions{});
  const ParamTensors before = p.tensors;
  try {
    AdamStep(p.tensors, g, state);
    FAIL() << "expected throw";
  } catch (const std::runtime_error& e) {
    EXPECT_THAT(e.what(), HasSubstr("block 3"));
  }
  EXPECT_EQ(p.tensors, before);
  EXPECT_EQ(state.step, 0);
}

// ---------------- checkpoint ----------------

class CheckpointTest : public ::testing::Test {
 protected:
  std::filesystem::path Path(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "reftrack_nn_test";
    std::filesystem::create_directories(dir);
    return dir / name;
  }
};

TEST_F(CheckpointTest, RoundTripIsBitExact) {
  NetworkParams p = NetworkParams::Initialize(SmallSpec(7, 3, 9, 3), 77);
  std::mt19937_64 rng(9);
  p.input_mean = RandomMatrix(7, 1, rng);
  p.input_std = (RandomMatrix(7, 1, rng).array().abs() + 0.1).matrix();
  SaveCheckpoint({p, "model", "abc"}, Path("rt.json"));
  const Checkpoint loaded = LoadCheckpoint(Path("rt.json"), p.spec);
  EXPECT_EQ(loaded.params, p);
  EXPECT_EQ(loaded.role, "model");
  EXPECT_EQ(loaded.config_hash, "abc");
  const Matrix x = RandomMatrix(7, 100, rng, 3.0);
  const Matrix a = Forward(p, x);
  const Matrix b = Forward(loaded.params, x);
  EXPECT_TRUE((a.array() == b.array()).all());
}

TEST_F(CheckpointTest, WrongInputDimNamesLayerZero) {
  const NetworkParams p = NetworkParams::Initialize(SmallSpec(7, 3), 1);
  SaveCheckpoint({p, "model", ""}, Path("dim.json"));
  try {
    LoadCheckpoint(Path("dim.json"), SmallSpec(8, 3));
    FAIL() << "expected throw";
  } catch (const CheckpointError& e) {
    EXPECT_THAT(e.what(), HasSubstr("layer 0"));
  }
}

TEST_F(CheckpointTest, ZeroNetworkStaysZeroAfterReload) {
  const NetworkParams p = NetworkParams::Zero(SmallSpec(4, 2));
  SaveCheckpoint({p, "policy", ""}, Path("zero.json"));
  const Checkpoint loaded = LoadCheckpoint(Path("zero.json"));
  std::mt19937_64 rng(10);
  EXPECT_TRUE((Forward(loaded.params, RandomMatrix(4, 9, rng)).array() == 0.0).all());
}

TEST_F(CheckpointTest, MissingFileIsCheckpointError) {
  EXPECT_THROW(LoadCheckpoint(Path("does_not_exist.json")), CheckpointError);
}

}  // namespace
}  // namespace reftrack::nn
