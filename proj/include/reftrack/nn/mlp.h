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

#ifndef REFTRACK_NN_MLP_H_
#define REFTRACK_NN_MLP_H_

#include "reftrack/nn/params.h"
#include "reftrack/nn/tape.h"

namespace reftrack::nn {

// A network as seen by a tape. With frozen == true, or grads == nullptr, no
// parameter gradient is accumulated, but gradients still reach the input.
// `params` and `grads` must outlive the tape.
struct Binding {
  const NetworkParams* params = nullptr;
  ParamTensors* grads = nullptr;
  bool frozen = false;
};

// Records one network application on the tape. `input` is
// (input_dim x batch); the result is (output_dim x batch).
Tape::Var ForwardOnTape(Tape& tape, const Binding& net, Tape::Var input);

// Batched evaluation without recording. Bit-identical to ForwardOnTape.
// Throws std::invalid_argument on a dimension mismatch or non-finite input.
Matrix Forward(const NetworkParams& params, const Matrix& inputs);
Vector Forward(const NetworkParams& params, const Vector& input);

}  // namespace reftrack::nn

#endif  // REFTRACK_NN_MLP_H_
