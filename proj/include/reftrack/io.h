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

// Text artifact files: trajectories and datasets. Layouts are described in
// docs/formats.md. Numbers are written in shortest round-trip form, so
// write-then-read gives back identical doubles.

#ifndef REFTRACK_IO_H_
#define REFTRACK_IO_H_

#include <filesystem>
#include <stdexcept>
#include <string>

#include "reftrack/collect.h"
#include "reftrack/core.h"

namespace reftrack {

// Malformed file contents. Messages start with "line N:" (1-based).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shortest decimal text that parses back to the same double.
std::string FormatDouble(double v);

struct TrajectoryFile {
  Trajectory traj;
  std::string config_hash;
};

// One header line, then one line per point q*_0..q*_T.
std::string TrajectoryToText(const Trajectory& traj, const std::string& config_hash);
TrajectoryFile TrajectoryFromText(const std::string& text);

// A header block of '#' lines, then one line per transition.
std::string DatasetToText(const Dataset& dataset);
Dataset DatasetFromText(const std::string& text);

// Whole-file helpers. WriteTextFile creates missing parent directories;
// both throw std::runtime_error naming the path.
std::string ReadTextFile(const std::filesystem::path& path);
void WriteTextFile(const std::filesystem::path& path, const std::string& text);

TrajectoryFile ReadTrajectory(const std::filesystem::path& path);
Dataset ReadDataset(const std::filesystem::path& path);

}  // namespace reftrack

#endif  // REFTRACK_IO_H_
