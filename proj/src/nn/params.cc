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

#include "reftrack/nn/params.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace reftrack::nn {

void MlpSpec::Validate() const {
  if (input_dim < 1 || output_dim < 1) {
    throw std::invalid_argument("MlpSpec: input and output dims must be >= 1");
  }
  if (hidden_layers < 1 || hidden_width < 1) {
    throw std::invalid_argument("MlpSpec: need at least one hidden layer");
  }
  if (output_scale.size() != output_dim) {
    throw std::invalid_argument("MlpSpec: output_scale has " +
                                std::to_string(output_scale.size()) +
                                " entries, expected " +
                                std::to_string(output_dim));
  }
  for (Eigen::Index i = 0; i < output_scale.size(); ++i) {
    if (!std::isfinite(output_scale[i]) || !(output_scale[i] > 0.0)) {
      throw std::invalid_argument("MlpSpec: output_scale must be positive");
    }
  }
}

ParamTensors ParamTensors::ZerosLike() const {
  ParamTensors z;
  for (const Matrix& w : weights) z.weights.push_back(Matrix::Zero(w.rows(), w.cols()));
  for (const Vector& b : biases) z.biases.push_back(Vector::Zero(b.size()));
  for (const Vector& g : ln_gain) z.ln_gain.push_back(Vector::Zero(g.size()));
  for (const Vector& o : ln_offset) z.ln_offset.push_back(Vector::Zero(o.size()));
  return z;
}

void ParamTensors::SetZero() {
  for (std::span<double> block : Blocks()) {
    std::fill(block.begin(), block.end(), 0.0);
  }
}

namespace {

template <typename Self, typename Span>
std::vector<Span> CollectBlocks(Self& self) {
  std::vector<Span> blocks;
  blocks.reserve(self.weights.size() * 2 + self.ln_gain.size() * 2);
  for (std::size_t l = 0; l < self.weights.size(); ++l) {
    blocks.emplace_back(self.weights[l].data(),
                        static_cast<std::size_t>(self.weights[l].size()));
    blocks.emplace_back(self.biases[l].data(),
                        static_cast<std::size_t>(self.biases[l].size()));
  }
  for (std::size_t l = 0; l < self.ln_gain.size(); ++l) {
    blocks.emplace_back(self.ln_gain[l].data(),
                        static_cast<std::size_t>(self.ln_gain[l].size()));
    blocks.emplace_back(self.ln_offset[l].data(),
                        static_cast<std::size_t>(self.ln_offset[l].size()));
  }
  return blocks;
}

}  // namespace

std::vector<std::span<double>> ParamTensors::Blocks() {
  return CollectBlocks<ParamTensors, std::span<double>>(*this);
}

std::vector<std::span<const double>> ParamTensors::Blocks() const {
  return CollectBlocks<const ParamTensors, std::span<const double>>(*this);
}

std::size_t ParamTensors::Count() const {
  std::size_t n = 0;
  for (std::span<const double> block : Blocks()) n += block.size();
  return n;
}

double ParamTensors::SquaredNorm() const {
  double total = 0.0;
  for (std::span<const double> block : Blocks()) {
    for (double x : block) total += x * x;
  }
  return total;
}

bool ParamTensors::AllFinite() const {
  for (std::span<const double> block : Blocks()) {
    for (double x : block) {
      if (!std::isfinite(x)) return false;
    }
  }
  return true;
}

bool ParamTensors::SameShape(const ParamTensors& other) const {
  if (weights.size() != other.weights.size() ||
      biases.size() != other.biases.size() ||
      ln_gain.size() != other.ln_gain.size() ||
      ln_offset.size() != other.ln_offset.size()) {
    return false;
  }
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != other.weights[l].rows() ||
        weights[l].cols() != other.weights[l].cols() ||
        biases[l].size() != other.biases[l].size()) {
      return false;
    }
  }
  for (std::size_t l = 0; l < ln_gain.size(); ++l) {
    if (ln_gain[l].size() != other.ln_gain[l].size() ||
        ln_offset[l].size() != other.ln_offset[l].size()) {
      return false;
    }
  }
  return true;
}

void ParamTensors::AddScaled(const ParamTensors& other, double scale) {
  auto dst = Blocks();
  auto src = other.Blocks();
  for (std::size_t b = 0; b < dst.size(); ++b) {
    for (std::size_t i = 0; i < dst[b].size(); ++i) dst[b][i] += scale * src[b][i];
  }
}

bool operator==(const ParamTensors& a, const ParamTensors& b) {
  if (!a.SameShape(b)) return false;
  auto ab = a.Blocks();
  auto bb = b.Blocks();
  for (std::size_t k = 0; k < ab.size(); ++k) {
    if (!std::equal(ab[k].begin(), ab[k].end(), bb[k].begin())) return false;
  }
  return true;
}

NetworkParams NetworkParams::Zero(const MlpSpec& spec) {
  spec.Validate();
  NetworkParams p;
  p.spec = spec;
  p.input_mean = Vector::Zero(spec.input_dim);
  p.input_std = Vector::Ones(spec.input_dim);
  int fan_in = spec.input_dim;
  for (int l = 0; l <= spec.hidden_layers; ++l) {
    const int fan_out = l < spec.hidden_layers ? spec.hidden_width : spec.output_dim;
    p.tensors.weights.push_back(Matrix::Zero(fan_out, fan_in));
    p.tensors.biases.push_back(Vector::Zero(fan_out));
    if (l < spec.hidden_layers) {
      p.tensors.ln_gain.push_back(Vector::Ones(fan_out));
      p.tensors.ln_offset.push_back(Vector::Zero(fan_out));
    }
    fan_in = fan_out;
  }
  return p;
}

NetworkParams NetworkParams::Initialize(const MlpSpec& spec, std::uint64_t seed) {
  NetworkParams p = Zero(spec);
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < p.tensors.weights.size(); ++l) {
    Matrix& w = p.tensors.weights[l];
    const double bound = std::sqrt(1.0 / static_cast<double>(w.cols()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    // Column-major fill order is part of the reproducibility contract.
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
    Vector& b = p.tensors.biases[l];
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = dist(rng);
  }
  return p;
}

void NetworkParams::Validate() const {
  spec.Validate();
  if (input_mean.size() != spec.input_dim || input_std.size() != spec.input_dim) {
    throw std::invalid_argument("NetworkParams: normalization statistics have wrong length");
  }
  for (Eigen::Index i = 0; i < input_std.size(); ++i) {
    if (!std::isfinite(input_mean[i]) || !std::isfinite(input_std[i]) ||
        input_std[i] < kMinInputStd) {
      throw std::invalid_argument("NetworkParams: invalid normalization at input " +
                                  std::to_string(i));
    }
  }
  const NetworkParams reference = Zero(spec);
  if (!tensors.SameShape(reference.tensors)) {
    throw std::invalid_argument("NetworkParams: tensor shapes do not match spec");
  }
}

}  // namespace reftrack::nn
