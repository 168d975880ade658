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

#ifndef REFTRACK_NN_PARAMS_H_
#define REFTRACK_NN_PARAMS_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace reftrack::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Architecture: standardize -> [affine -> LayerNorm -> ELU] x hidden_layers
// -> affine -> tanh -> scale.
struct MlpSpec {
  int input_dim = 0;
  int hidden_layers = 6;
  int hidden_width = 512;
  int output_dim = 0;
  Vector output_scale;

  // Throws std::invalid_argument on a malformed spec.
  void Validate() const;

  friend bool operator==(const MlpSpec& a, const MlpSpec& b) {
    return a.input_dim == b.input_dim && a.hidden_layers == b.hidden_layers &&
           a.hidden_width == b.hidden_width && a.output_dim == b.output_dim &&
           a.output_scale.size() == b.output_scale.size() &&
           a.output_scale == b.output_scale;
  }
};

// The trainable tensors of one network. Also used, shape for shape, as a
// gradient buffer and for optimizer moments.
//
// weights[l] is (fan_out x fan_in); there are hidden_layers + 1 affine layers
// and hidden_layers LayerNorm (gain, offset) pairs.
struct ParamTensors {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  std::vector<Vector> ln_gain;
  std::vector<Vector> ln_offset;

  ParamTensors ZerosLike() const;
  void SetZero();

  // Contiguous storage blocks in a fixed order: for each affine layer its
  // weight then bias, followed by every LayerNorm gain then offset.
  std::vector<std::span<double>> Blocks();
  std::vector<std::span<const double>> Blocks() const;

  std::size_t Count() const;
  double SquaredNorm() const;
  bool AllFinite() const;
  bool SameShape(const ParamTensors& other) const;

  // this += scale * other
  void AddScaled(const ParamTensors& other, double scale);

  friend bool operator==(const ParamTensors& a, const ParamTensors& b);
};

struct NetworkParams {
  MlpSpec spec;
  Vector input_mean;
  Vector input_std;
  ParamTensors tensors;

  // All weights and biases zero, LayerNorm gain 1 offset 0, identity
  // standardization. Forward of such a network is identically zero.
  static NetworkParams Zero(const MlpSpec& spec);

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases, LayerNorm
  // gain 1 offset 0, identity standardization.
  static NetworkParams Initialize(const MlpSpec& spec, std::uint64_t seed);

  // Throws std::invalid_argument when shapes disagree with `spec` or the
  // standardization statistics are invalid.
  void Validate() const;

  friend bool operator==(const NetworkParams& a, const NetworkParams& b) {
    return a.spec == b.spec && a.input_mean == b.input_mean &&
           a.input_std == b.input_std && a.tensors == b.tensors;
  }
};

inline constexpr double kMinInputStd = 1e-6;

}  // namespace reftrack::nn

#endif  // REFTRACK_NN_PARAMS_H_
