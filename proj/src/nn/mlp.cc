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

#include "reftrack/nn/mlp.h"

#include <stdexcept>
#include <string>

namespace reftrack::nn {

namespace {

void CheckInput(const NetworkParams& params, const Matrix& inputs) {
  if (inputs.rows() != params.spec.input_dim) {
    throw std::invalid_argument("network expects input_dim " +
                                std::to_string(params.spec.input_dim) + ", got " +
                                std::to_string(inputs.rows()));
  }
  if (!inputs.allFinite()) {
    throw std::invalid_argument("network input contains non-finite values");
  }
}

}  // namespace

Tape::Var ForwardOnTape(Tape& tape, const Binding& net, Tape::Var input) {
  const NetworkParams& p = *net.params;
  CheckInput(p, tape.value(input));
  ParamTensors* g = net.frozen ? nullptr : net.grads;
  Tape::Var x = tape.Standardize(input, p.input_mean, p.input_std);
  const int hidden = p.spec.hidden_layers;
  for (int l = 0; l < hidden; ++l) {
    x = tape.Affine(x, p.tensors.weights[l], p.tensors.biases[l],
                    g ? &g->weights[l] : nullptr, g ? &g->biases[l] : nullptr);
    x = tape.LayerNorm(x, p.tensors.ln_gain[l], p.tensors.ln_offset[l],
                       g ? &g->ln_gain[l] : nullptr, g ? &g->ln_offset[l] : nullptr);
    x = tape.Elu(x);
  }
  x = tape.Affine(x, p.tensors.weights[hidden], p.tensors.biases[hidden],
                  g ? &g->weights[hidden] : nullptr, g ? &g->biases[hidden] : nullptr);
  x = tape.Tanh(x);
  return tape.ScaleRows(x, p.spec.output_scale);
}

Matrix Forward(const NetworkParams& params, const Matrix& inputs) {
  CheckInput(params, inputs);
  // Replays the tape ops on a throwaway tape so both paths share arithmetic.
  Tape tape;
  const Tape::Var out =
      ForwardOnTape(tape, Binding{&params, nullptr, true}, tape.Constant(inputs));
  return tape.value(out);
}

Vector Forward(const NetworkParams& params, const Vector& input) {
  Matrix column = input;
  return Forward(params, column).col(0);
}

}  // namespace reftrack::nn
