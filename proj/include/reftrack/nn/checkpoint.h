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

// Network checkpoints are single JSON documents; see docs/formats.md.
// Doubles are written in shortest round-trip form, so save/load is bit exact.

#ifndef REFTRACK_NN_CHECKPOINT_H_
#define REFTRACK_NN_CHECKPOINT_H_

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "reftrack/nn/params.h"

namespace reftrack::nn {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  NetworkParams params;
  // "model" or "policy"; free-form for tests.
  std::string role;
  // Hash of the run configuration that produced the checkpoint.
  std::string config_hash;
};

void SaveCheckpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);

// With `expected`, every layer is checked against it and the first mismatch
// is reported by layer index.
Checkpoint LoadCheckpoint(const std::filesystem::path& path,
                          const std::optional<MlpSpec>& expected = std::nullopt);

}  // namespace reftrack::nn

#endif  // REFTRACK_NN_CHECKPOINT_H_
