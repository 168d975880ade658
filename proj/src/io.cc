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

#include "reftrack/io.h"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string_view>
#include <vector>

namespace reftrack {

namespace {

constexpr std::string_view kTrajectoryMagic = "reftrack-trajectory";
constexpr std::string_view kDatasetMagic = "reftrack-dataset";
constexpr std::string_view kJointOrder = "swing,boom,arm,bucket";
constexpr int kRowFields = 2 + 8 + 4 + 4 + 4 + 1;

[[noreturn]] void Fail(int line, const std::string& what) {
  throw FormatError("line " + std::to_string(line) + ": " + what);
}

std::vector<std::string_view> Split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

// Lines without the trailing newline; a final empty line is dropped.
std::vector<std::string_view> Lines(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    out.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

double ParseDouble(std::string_view s, int line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    Fail(line, "bad number '" + std::string(s) + "'");
  }
  return v;
}

template <typename Int>
Int ParseInt(std::string_view s, int line) {
  Int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    Fail(line, "bad integer '" + std::string(s) + "'");
  }
  return v;
}

void CheckToken(const std::string& s, const char* what) {
  if (s.empty() || s.find_first_of(" \t\r\n") != std::string::npos) {
    throw std::invalid_argument(std::string(what) + " '" + s +
                                "' must be non-empty without whitespace");
  }
}

std::string HashOut(const std::string& hash) { return hash.empty() ? "-" : hash; }
std::string HashIn(std::string_view s) { return s == "-" ? "" : std::string(s); }

void AppendVector(std::string& out, const JointVector& v) {
  for (int j = 0; j < kNumJoints; ++j) {
    out += ' ';
    out += FormatDouble(v[j]);
  }
}

JointVector ParseVector(const std::vector<std::string_view>& f, std::size_t at, int line) {
  JointVector v;
  for (int j = 0; j < kNumJoints; ++j) v[j] = ParseDouble(f[at + j], line);
  return v;
}

// Header lines are "# key value..."; returns the tokens after the key.
std::vector<std::string_view> HeaderFields(std::string_view text, int line,
                                           std::string_view key, std::size_t count) {
  std::vector<std::string_view> f = Split(text);
  if (f.size() < 2 || f[0] != "#" || f[1] != key) {
    Fail(line, "expected header '# " + std::string(key) + "'");
  }
  if (f.size() != count + 2) {
    Fail(line, "header '" + std::string(key) + "' needs " + std::to_string(count) + " values");
  }
  return {f.begin() + 2, f.end()};
}

}  // namespace

std::string FormatDouble(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("FormatDouble failed");
  return std::string(buf, ptr);
}

std::string TrajectoryToText(const Trajectory& traj, const std::string& config_hash) {
  CheckToken(traj.id, "trajectory id");
  std::string out = "# " + std::string(kTrajectoryMagic) + " 1 dt=" + FormatDouble(traj.dt) +
                    " joints=" + std::string(kJointOrder) + " id=" + traj.id +
                    " config=" + HashOut(config_hash) + "\n";
  for (const JointVector& p : traj.points) {
    std::string line;
    AppendVector(line, p);
    out += line.substr(1) + "\n";
  }
  return out;
}

TrajectoryFile TrajectoryFromText(const std::string& text) {
  const std::vector<std::string_view> lines = Lines(text);
  if (lines.empty()) Fail(1, "empty trajectory file");
  const std::vector<std::string_view> head = Split(lines[0]);
  if (head.size() != 7 || head[0] != "#" || head[1] != kTrajectoryMagic || head[2] != "1") {
    Fail(1, "expected '# reftrack-trajectory 1 dt=... joints=... id=... config=...'");
  }
  TrajectoryFile file;
  bool seen[4] = {false, false, false, false};
  for (std::size_t i = 3; i < head.size(); ++i) {
    const std::size_t eq = head[i].find('=');
    if (eq == std::string_view::npos) Fail(1, "bad header field '" + std::string(head[i]) + "'");
    const std::string_view key = head[i].substr(0, eq);
    const std::string_view value = head[i].substr(eq + 1);
    if (key == "dt") {
      file.traj.dt = ParseDouble(value, 1);
      seen[0] = true;
    } else if (key == "joints") {
      if (value != kJointOrder) Fail(1, "joint order must be " + std::string(kJointOrder));
      seen[1] = true;
    } else if (key == "id") {
      file.traj.id = std::string(value);
      seen[2] = true;
    } else if (key == "config") {
      file.config_hash = HashIn(value);
      seen[3] = true;
    } else {
      Fail(1, "unknown header field '" + std::string(key) + "'");
    }
  }
  if (!(seen[0] && seen[1] && seen[2] && seen[3])) Fail(1, "incomplete header");
  if (!(file.traj.dt > 0.0)) Fail(1, "dt must be positive");
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const int line = static_cast<int>(i) + 1;
    const std::vector<std::string_view> f = Split(lines[i]);
    if (f.size() != static_cast<std::size_t>(kNumJoints)) {
      Fail(line, "expected " + std::to_string(kNumJoints) + " angles, got " +
                     std::to_string(f.size()));
    }
    file.traj.points.push_back(ParseVector(f, 0, line));
  }
  if (file.traj.points.size() < 2) Fail(static_cast<int>(lines.size()), "fewer than 2 points");
  return file;
}

std::string DatasetToText(const Dataset& dataset) {
  std::ostringstream out;
  out << "# " << kDatasetMagic << " 1\n";
  out << "# config " << HashOut(dataset.config_hash) << "\n";
  out << "# seed " << dataset.seed << "\n";
  out << "# sigma_max " << FormatDouble(dataset.sigma_max) << "\n";
  out << "# ratio " << dataset.ratio.noisy << " " << dataset.ratio.clean << "\n";
  out << "# episodes " << dataset.episodes.size() << "\n";
  for (const Episode& ep : dataset.episodes) {
    CheckToken(ep.traj_id, "trajectory id");
    out << "# episode " << ep.traj_id << " " << ep.pass << " " << FormatDouble(ep.sigma) << " "
        << (ep.noisy ? 1 : 0) << " " << ep.seed << " " << ep.steps.size() << "\n";
  }
  out << "# columns traj_id t q[4] qdot[4] qr_next[4] qstar_next[4] u[4] done\n";
  std::string rows;
  for (const Episode& ep : dataset.episodes) {
    for (const Transition& s : ep.steps) {
      rows += ep.traj_id;
      rows += ' ';
      rows += std::to_string(s.t);
      AppendVector(rows, s.o.q);
      AppendVector(rows, s.o.qdot);
      AppendVector(rows, s.qr_next);
      AppendVector(rows, s.qstar_next);
      AppendVector(rows, s.u);
      rows += s.done ? " 1\n" : " 0\n";
    }
  }
  return out.str() + rows;
}

Dataset DatasetFromText(const std::string& text) {
  const std::vector<std::string_view> lines = Lines(text);
  std::size_t i = 0;
  auto next = [&](std::string_view key, std::size_t count) {
    if (i >= lines.size()) Fail(static_cast<int>(i) + 1, "truncated header");
    const int line = static_cast<int>(i) + 1;
    return std::make_pair(HeaderFields(lines[i++], line, key, count), line);
  };
  Dataset ds;
  {
    auto [f, line] = next(kDatasetMagic, 1);
    if (f[0] != "1") Fail(line, "unsupported dataset version '" + std::string(f[0]) + "'");
  }
  ds.config_hash = HashIn(next("config", 1).first[0]);
  {
    auto [f, line] = next("seed", 1);
    ds.seed = ParseInt<std::uint64_t>(f[0], line);
  }
  {
    auto [f, line] = next("sigma_max", 1);
    ds.sigma_max = ParseDouble(f[0], line);
  }
  {
    auto [f, line] = next("ratio", 2);
    ds.ratio.noisy = ParseInt<int>(f[0], line);
    ds.ratio.clean = ParseInt<int>(f[1], line);
  }
  std::size_t n_episodes = 0;
  {
    auto [f, line] = next("episodes", 1);
    n_episodes = ParseInt<std::size_t>(f[0], line);
  }
  std::vector<std::size_t> lengths;
  for (std::size_t e = 0; e < n_episodes; ++e) {
    auto [f, line] = next("episode", 6);
    Episode ep;
    ep.traj_id = std::string(f[0]);
    ep.pass = ParseInt<int>(f[1], line);
    ep.sigma = ParseDouble(f[2], line);
    const int noisy = ParseInt<int>(f[3], line);
    if (noisy != 0 && noisy != 1) Fail(line, "noise flag must be 0 or 1");
    ep.noisy = noisy == 1;
    ep.seed = ParseInt<std::uint64_t>(f[4], line);
    lengths.push_back(ParseInt<std::size_t>(f[5], line));
    ds.episodes.push_back(std::move(ep));
  }
  if (i >= lines.size() || Split(lines[i]).size() < 2 || Split(lines[i])[1] != "columns") {
    Fail(static_cast<int>(i) + 1, "expected '# columns' line");
  }
  ++i;
  for (std::size_t e = 0; e < n_episodes; ++e) {
    Episode& ep = ds.episodes[e];
    ep.steps.reserve(lengths[e]);
    for (std::size_t k = 0; k < lengths[e]; ++k, ++i) {
      const int line = static_cast<int>(i) + 1;
      if (i >= lines.size()) Fail(line, "missing transition rows");
      const std::vector<std::string_view> f = Split(lines[i]);
      if (f.size() != static_cast<std::size_t>(kRowFields)) {
        Fail(line, "expected " + std::to_string(kRowFields) + " fields, got " +
                       std::to_string(f.size()));
      }
      if (f[0] != ep.traj_id) {
        Fail(line, "row belongs to '" + std::string(f[0]) + "', expected '" + ep.traj_id + "'");
      }
      Transition s;
      s.t = ParseInt<int>(f[1], line);
      if (s.t != static_cast<int>(k)) Fail(line, "expected t=" + std::to_string(k));
      s.o.q = ParseVector(f, 2, line);
      s.o.qdot = ParseVector(f, 6, line);
      s.qr_next = ParseVector(f, 10, line);
      s.qstar_next = ParseVector(f, 14, line);
      s.u = ParseVector(f, 18, line);
      if (f[22] != "0" && f[22] != "1") Fail(line, "done flag must be 0 or 1");
      s.done = f[22] == "1";
      ep.steps.push_back(s);
    }
  }
  if (i != lines.size()) Fail(static_cast<int>(i) + 1, "unexpected trailing rows");
  return ds;
}

std::string ReadTextFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteTextFile(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

TrajectoryFile ReadTrajectory(const std::filesystem::path& path) {
  try {
    return TrajectoryFromText(ReadTextFile(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

Dataset ReadDataset(const std::filesystem::path& path) {
  try {
    return DatasetFromText(ReadTextFile(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace reftrack
