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

#include "reftrack/nn/adam.h"

#include <cmath>
#include <stdexcept>
#include <string>

namespace reftrack::nn {

AdamState AdamState::For(const ParamTensors& params, const AdamOptions& options) {
  AdamState state;
  state.options = options;
  state.m = params.ZerosLike();
  state.v = params.ZerosLike();
  return state;
}

void AdamStep(ParamTensors& params, const ParamTensors& grads, AdamState& state) {
  if (!params.SameShape(grads) || !params.SameShape(state.m) ||
      !params.SameShape(state.v)) {
    throw std::invalid_argument("AdamStep: shape mismatch");
  }
  const auto g_blocks = grads.Blocks();
  for (std::size_t b = 0; b < g_blocks.size(); ++b) {
    for (std::size_t i = 0; i < g_blocks[b].size(); ++i) {
      if (!std::isfinite(g_blocks[b][i])) {
        throw std::runtime_error("AdamStep: non-finite gradient in block " +
                                 std::to_string(b) + " at index " +
                                 std::to_string(i) + " (step " +
                                 std::to_string(state.step + 1) + ")");
      }
    }
  }

  const AdamOptions& o = state.options;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(o.beta1, t);
  const double correction2 = 1.0 - std::pow(o.beta2, t);

  auto p_blocks = params.Blocks();
  auto m_blocks = state.m.Blocks();
  auto v_blocks = state.v.Blocks();
  for (std::size_t b = 0; b < p_blocks.size(); ++b) {
    for (std::size_t i = 0; i < p_blocks[b].size(); ++i) {
      const double g = g_blocks[b][i];
      double& m = m_blocks[b][i];
      double& v = v_blocks[b][i];
      m = o.beta1 * m + (1.0 - o.beta1) * g;
      v = o.beta2 * v + (1.0 - o.beta2) * g * g;
      const double m_hat = m / correction1;
      const double v_hat = v / correction2;
      p_blocks[b][i] -= o.lr * m_hat / (std::sqrt(v_hat) + o.eps);
    }
  }
}

}  // namespace reftrack::nn
