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

// Run configuration shared by the experiment drivers and the command line:
// plant, controller, reference cycles, data collection and both training
// phases, with two built-in profiles.

#ifndef REFTRACK_CONFIG_H_
#define REFTRACK_CONFIG_H_

#include <cstdint>
#include <string>
#include <vector>

#include "reftrack/collect.h"
#include "reftrack/plant.h"
#include "reftrack/refgen.h"
#include "reftrack/train.h"

namespace reftrack {

struct RunConfig {
  std::string profile = "desk";
  std::uint64_t seed = 1;

  PlantConfig plant = PlantConfig::Default();
  PdGains gains = PdGains::Default();

  CycleSpec cycles = CycleSpec::Default();
  int n_train = 8;
  int n_test = 2;

  double sigma_max = 0.05;
  NoiseRatio ratio;

  // h and the seed are shared: both phases use `h`, and their seeds are
  // derived from `seed`.
  int h = 10;
  TrainConfig model;
  TrainConfig policy;

  int rounds = 3;
  // Rounds after the first continue from the previous checkpoints with this
  // many epochs and the step size scaled by finetune_lr_scale.
  int finetune_epochs = 20;
  double finetune_lr_scale = 0.1;
  std::vector<double> k_smooth_arms{0.0, 1.0, 2.0};

  std::string artifact_dir = "artifacts";

  // Throws std::invalid_argument naming the bad field.
  void Validate() const;

  // Per-stage seeds, all derived from `seed`.
  std::uint64_t RefgenSeed() const;
  std::uint64_t SplitSeed() const;
  std::uint64_t CollectSeed() const;
  std::uint64_t EvalSeed() const;
  // Training configs with h and seeds filled in.
  TrainConfig ModelTrainConfig() const;
  TrainConfig PolicyTrainConfig() const;
};

// "desk": h = 10, 200 epochs, 8 + 2 trajectories, small networks.
// "paper": h = 20, 2000 epochs, batch 2048, 40 + 8 trajectories, 6 x 512.
// Throws std::invalid_argument for other names.
RunConfig ProfileConfig(const std::string& name);

// JSON text. Reading starts from the profile named in the file (desk when
// absent) and overrides the fields present; unknown keys are rejected.
std::string ConfigToJson(const RunConfig& config);
RunConfig ConfigFromJson(const std::string& text);

// 16 hex digits of FNV-1a over the canonical JSON, excluding artifact_dir.
std::string ConfigHash(const RunConfig& config);
std::uint64_t Fnv1a(const std::string& bytes);

}  // namespace reftrack

#endif  // REFTRACK_CONFIG_H_
