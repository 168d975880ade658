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

#ifndef REFTRACK_NN_ADAM_H_
#define REFTRACK_NN_ADAM_H_

#include <cstdint>

#include "reftrack/nn/params.h"

namespace reftrack::nn {

struct AdamOptions {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamOptions options;
  ParamTensors m;
  ParamTensors v;
  std::int64_t step = 0;

  static AdamState For(const ParamTensors& params, const AdamOptions& options);
};

// Bias-corrected Adam update, in place. The step counter is incremented
// before bias correction. Throws std::runtime_error naming the first
// non-finite gradient entry; nothing is modified in that case.
void AdamStep(ParamTensors& params, const ParamTensors& grads, AdamState& state);

}  // namespace reftrack::nn

#endif  // REFTRACK_NN_ADAM_H_
