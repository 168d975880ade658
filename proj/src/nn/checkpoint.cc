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

#include "reftrack/nn/checkpoint.h"

#include <algorithm>
#include <fstream>
#include <vector>

#include "json.hpp"

namespace reftrack::nn {

namespace {

using nlohmann::json;

constexpr const char* kFormat = "reftrack.mlp";
constexpr int kVersion = 1;

json ToJson(const Vector& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Vector VectorFromJson(const json& j, const std::string& what) {
  if (!j.is_array()) throw CheckpointError(what + ": expected an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw CheckpointError(what + ": non-numeric entry");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

std::string Shape(Eigen::Index rows, Eigen::Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

}  // namespace

void SaveCheckpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  const NetworkParams& p = checkpoint.params;
  p.Validate();
  json doc;
  doc["format"] = kFormat;
  doc["version"] = kVersion;
  doc["role"] = checkpoint.role;
  doc["config_hash"] = checkpoint.config_hash;
  doc["spec"] = {{"input_dim", p.spec.input_dim},
                 {"hidden_layers", p.spec.hidden_layers},
                 {"hidden_width", p.spec.hidden_width},
                 {"output_dim", p.spec.output_dim},
                 {"output_scale", ToJson(p.spec.output_scale)}};
  doc["input_mean"] = ToJson(p.input_mean);
  doc["input_std"] = ToJson(p.input_std);
  json layers = json::array();
  for (std::size_t l = 0; l < p.tensors.weights.size(); ++l) {
    const Matrix& w = p.tensors.weights[l];
    std::vector<double> row_major;
    row_major.reserve(static_cast<std::size_t>(w.size()));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) row_major.push_back(w(r, c));
    }
    layers.push_back({{"rows", w.rows()},
                      {"cols", w.cols()},
                      {"weight", row_major},
                      {"bias", ToJson(p.tensors.biases[l])}});
  }
  doc["layers"] = std::move(layers);
  json norms = json::array();
  for (std::size_t l = 0; l < p.tensors.ln_gain.size(); ++l) {
    norms.push_back({{"gain", ToJson(p.tensors.ln_gain[l])},
                     {"offset", ToJson(p.tensors.ln_offset[l])}});
  }
  doc["layer_norms"] = std::move(norms);

  std::ofstream out(path);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out << doc.dump(1) << '\n';
  if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

Checkpoint LoadCheckpoint(const std::filesystem::path& path,
                          const std::optional<MlpSpec>& expected) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot read checkpoint " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
  const std::string where = path.string() + ": ";
  try {
    if (doc.value("format", "") != kFormat || doc.value("version", 0) != kVersion) {
      throw CheckpointError(where + "not a version 1 reftrack.mlp checkpoint");
    }
    Checkpoint ck;
    ck.role = doc.value("role", "");
    ck.config_hash = doc.value("config_hash", "");
    const json& s = doc.at("spec");
    MlpSpec& spec = ck.params.spec;
    spec.input_dim = s.at("input_dim").get<int>();
    spec.hidden_layers = s.at("hidden_layers").get<int>();
    spec.hidden_width = s.at("hidden_width").get<int>();
    spec.output_dim = s.at("output_dim").get<int>();
    spec.output_scale = VectorFromJson(s.at("output_scale"), where + "output_scale");
    ck.params.input_mean = VectorFromJson(doc.at("input_mean"), where + "input_mean");
    ck.params.input_std = VectorFromJson(doc.at("input_std"), where + "input_std");

    const json& layers = doc.at("layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const json& layer = layers[l];
      const auto rows = layer.at("rows").get<Eigen::Index>();
      const auto cols = layer.at("cols").get<Eigen::Index>();
      const json& data = layer.at("weight");
      if (data.size() != static_cast<std::size_t>(rows * cols)) {
        throw CheckpointError(where + "layer " + std::to_string(l) +
                              ": weight data does not match " + Shape(rows, cols));
      }
      Matrix w(rows, cols);
      std::size_t k = 0;
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) w(r, c) = data[k++].get<double>();
      }
      ck.params.tensors.weights.push_back(std::move(w));
      ck.params.tensors.biases.push_back(
          VectorFromJson(layer.at("bias"), where + "layer " + std::to_string(l) + " bias"));
    }
    const json& norms = doc.at("layer_norms");
    for (std::size_t l = 0; l < norms.size(); ++l) {
      ck.params.tensors.ln_gain.push_back(VectorFromJson(norms[l].at("gain"), where + "gain"));
      ck.params.tensors.ln_offset.push_back(
          VectorFromJson(norms[l].at("offset"), where + "offset"));
    }

    if (expected.has_value()) {
      const NetworkParams want = NetworkParams::Zero(*expected);
      const auto& got_w = ck.params.tensors.weights;
      const auto& want_w = want.tensors.weights;
      for (std::size_t l = 0; l < std::max(got_w.size(), want_w.size()); ++l) {
        if (l >= got_w.size() || l >= want_w.size()) {
          throw CheckpointError(where + "layer " + std::to_string(l) +
                                ": layer count differs from expected spec");
        }
        if (got_w[l].rows() != want_w[l].rows() || got_w[l].cols() != want_w[l].cols()) {
          throw CheckpointError(where + "layer " + std::to_string(l) + ": weight is " +
                                Shape(got_w[l].rows(), got_w[l].cols()) + ", expected " +
                                Shape(want_w[l].rows(), want_w[l].cols()));
        }
      }
      if (!(spec == *expected)) {
        throw CheckpointError(where + "spec (output scale) differs from expected");
      }
    }
    ck.params.Validate();
    return ck;
  } catch (const json::exception& e) {
    throw CheckpointError(where + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(where + e.what());
  }
}

}  // namespace reftrack::nn
