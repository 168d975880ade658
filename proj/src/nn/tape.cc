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

#include "reftrack/nn/tape.h"

#include <cmath>
#include <utility>

namespace reftrack::nn {

namespace {

// The vectorized sum catches NaN and infinities; allFinite only runs to rule
// out an overflowing sum of finite entries.
bool Finite(const Matrix& m) { return std::isfinite(m.sum()) || m.allFinite(); }

}  // namespace

NonFiniteError::NonFiniteError(int op_index, const std::string& op, bool backward)
    : std::runtime_error("non-finite value " +
                         std::string(backward ? "in gradient of" : "produced by") +
                         " op #" + std::to_string(op_index) + " (" + op + ")"),
      op_index_(op_index) {}

Tape::Var Tape::Push(const char* op, Matrix value, bool needs_grad,
                     std::function<void(Tape&, const Matrix&)> backward) {
  const int id = static_cast<int>(nodes_.size());
  if (!Finite(value)) throw NonFiniteError(id, op, /*backward=*/false);
  Node node;
  node.value = std::move(value);
  node.needs_grad = needs_grad;
  node.op = op;
  node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{id};
}

void Tape::Accumulate(Var v, const Matrix& g) { AccumulateExpr(v, g); }

void Tape::Accumulate(Var v, Matrix&& g) {
  Node& node = nodes_[v.id];
  if (!node.needs_grad) return;
  if (node.grad.size() == 0) {
    node.grad = std::move(g);
  } else {
    node.grad += g;
  }
}

template <typename Expr>
void Tape::AccumulateExpr(Var v, const Expr& g) {
  Node& node = nodes_[v.id];
  if (!node.needs_grad) return;
  if (node.grad.size() == 0) {
    node.grad = g;
  } else {
    node.grad += g;
  }
}

Tape::Var Tape::Constant(Matrix value) {
  return Push("constant", std::move(value), false, nullptr);
}

Tape::Var Tape::Leaf(Matrix value) {
  return Push("leaf", std::move(value), true, nullptr);
}

Tape::Var Tape::Add(Var a, Var b) {
  Matrix out = value(a) + value(b);
  return Push("add", std::move(out), NeedsGrad(a) || NeedsGrad(b),
              [a, b](Tape& t, const Matrix& g) {
                t.Accumulate(a, g);
                t.Accumulate(b, g);
              });
}

Tape::Var Tape::Sub(Var a, Var b) {
  Matrix out = value(a) - value(b);
  return Push("subtract", std::move(out), NeedsGrad(a) || NeedsGrad(b),
              [a, b](Tape& t, const Matrix& g) {
                t.Accumulate(a, g);
                t.AccumulateExpr(b, -g);
              });
}

Tape::Var Tape::Scale(Var a, double s) {
  Matrix out = s * value(a);
  return Push("scale", std::move(out), NeedsGrad(a),
              [a, s](Tape& t, const Matrix& g) { t.AccumulateExpr(a, s * g); });
}

Tape::Var Tape::Square(Var a) {
  Matrix out = value(a).array().square().matrix();
  return Push("square", std::move(out), NeedsGrad(a),
              [a](Tape& t, const Matrix& g) {
                t.AccumulateExpr(a, (2.0 * g.array() * t.value(a).array()).matrix());
              });
}

Tape::Var Tape::Sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = value(a).sum();
  return Push("sum", std::move(out), NeedsGrad(a), [a](Tape& t, const Matrix& g) {
    const Matrix& x = t.value(a);
    t.AccumulateExpr(a, Matrix::Constant(x.rows(), x.cols(), g(0, 0)));
  });
}

Tape::Var Tape::Mean(Var a) {
  const double n = static_cast<double>(value(a).size());
  Matrix out(1, 1);
  out(0, 0) = value(a).sum() / n;
  return Push("mean", std::move(out), NeedsGrad(a), [a, n](Tape& t, const Matrix& g) {
    const Matrix& x = t.value(a);
    t.AccumulateExpr(a, Matrix::Constant(x.rows(), x.cols(), g(0, 0) / n));
  });
}

Tape::Var Tape::Concat(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("Concat: no parts");
  const Eigen::Index cols = value(parts.front()).cols();
  Eigen::Index rows = 0;
  bool needs = false;
  for (Var p : parts) {
    if (value(p).cols() != cols) {
      throw std::invalid_argument("Concat: column count mismatch");
    }
    rows += value(p).rows();
    needs = needs || NeedsGrad(p);
  }
  Matrix out(rows, cols);
  Eigen::Index r = 0;
  for (Var p : parts) {
    out.middleRows(r, value(p).rows()) = value(p);
    r += value(p).rows();
  }
  std::vector<Var> ids(parts.begin(), parts.end());
  return Push("concat", std::move(out), needs,
              [ids = std::move(ids)](Tape& t, const Matrix& g) {
                Eigen::Index row = 0;
                for (Var p : ids) {
                  const Eigen::Index n = t.value(p).rows();
                  if (t.NeedsGrad(p)) t.AccumulateExpr(p, g.middleRows(row, n));
                  row += n;
                }
              });
}

Tape::Var Tape::Slice(Var a, int row, int rows) {
  const Matrix& x = value(a);
  if (row < 0 || rows < 0 || row + rows > x.rows()) {
    throw std::invalid_argument("Slice: rows out of range");
  }
  Matrix out = x.middleRows(row, rows);
  return Push("slice", std::move(out), NeedsGrad(a),
              [a, row, rows](Tape& t, const Matrix& g) {
                const Matrix& x = t.value(a);
                Matrix full = Matrix::Zero(x.rows(), x.cols());
                full.middleRows(row, rows) = g;
                t.Accumulate(a, std::move(full));
              });
}

Tape::Var Tape::Affine(Var x, const Matrix& weight, const Vector& bias,
                       Matrix* grad_weight, Vector* grad_bias) {
  const Matrix& in = value(x);
  if (weight.cols() != in.rows() || bias.size() != weight.rows()) {
    throw std::invalid_argument("Affine: expected input of " +
                                std::to_string(weight.cols()) + " rows, got " +
                                std::to_string(in.rows()));
  }
  Matrix out = weight * in;
  out.colwise() += bias;
  const bool needs = NeedsGrad(x) || grad_weight != nullptr || grad_bias != nullptr;
  return Push("affine", std::move(out), needs,
              [x, &weight, grad_weight, grad_bias](Tape& t, const Matrix& g) {
                if (grad_weight != nullptr) {
                  grad_weight->noalias() += g * t.value(x).transpose();
                }
                if (grad_bias != nullptr) *grad_bias += g.rowwise().sum();
                if (t.NeedsGrad(x)) {
                  Matrix dx = weight.transpose() * g;
                  t.Accumulate(x, std::move(dx));
                }
              });
}

Tape::Var Tape::LayerNorm(Var x, const Vector& gain, const Vector& offset,
                          Vector* grad_gain, Vector* grad_offset) {
  const Matrix& in = value(x);
  const Eigen::Index n = in.rows();
  if (gain.size() != n || offset.size() != n) {
    throw std::invalid_argument("LayerNorm: width mismatch");
  }
  Matrix xhat(n, in.cols());
  Vector rstd(in.cols());
  for (Eigen::Index c = 0; c < in.cols(); ++c) {
    const auto col = in.col(c);
    // A constant column normalizes to exactly zero.
    if (col.maxCoeff() == col.minCoeff()) {
      xhat.col(c).setZero();
      rstd[c] = 1.0 / std::sqrt(kLayerNormEps);
      continue;
    }
    const double mean = col.mean();
    const double var = (col.array() - mean).square().mean();
    rstd[c] = 1.0 / std::sqrt(var + kLayerNormEps);
    xhat.col(c) = (col.array() - mean) * rstd[c];
  }
  Matrix out = (xhat.array().colwise() * gain.array()).matrix();
  out.colwise() += offset;
  const bool needs = NeedsGrad(x) || grad_gain != nullptr || grad_offset != nullptr;
  return Push(
      "layernorm", std::move(out), needs,
      [x, &gain, grad_gain, grad_offset, xhat = std::move(xhat),
       rstd = std::move(rstd)](Tape& t, const Matrix& g) {
        if (grad_gain != nullptr) {
          *grad_gain += (g.array() * xhat.array()).rowwise().sum().matrix();
        }
        if (grad_offset != nullptr) *grad_offset += g.rowwise().sum();
        if (!t.NeedsGrad(x)) return;
        const Matrix dxhat = (g.array().colwise() * gain.array()).matrix();
        const double inv_n = 1.0 / static_cast<double>(dxhat.rows());
        Matrix dx(dxhat.rows(), dxhat.cols());
        for (Eigen::Index c = 0; c < dxhat.cols(); ++c) {
          const double mean_d = dxhat.col(c).sum() * inv_n;
          const double mean_dx = dxhat.col(c).dot(xhat.col(c)) * inv_n;
          dx.col(c) = rstd[c] * (dxhat.col(c).array() - mean_d -
                                 xhat.col(c).array() * mean_dx);
        }
        t.Accumulate(x, std::move(dx));
      });
}

Tape::Var Tape::Elu(Var x) {
  const auto in = value(x).array();
  Matrix out = (in > 0.0).select(in, kEluAlpha * (in.exp() - 1.0)).matrix();
  const int self = size();
  // For v <= 0 the derivative alpha e^v equals y + alpha.
  return Push("elu", std::move(out), NeedsGrad(x), [x, self](Tape& t, const Matrix& g) {
    const Matrix& in = t.value(x);
    const Matrix& y = t.nodes_[self].value;
    Matrix dx(g.rows(), g.cols());
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      dx.data()[i] = in.data()[i] > 0.0 ? g.data()[i] : g.data()[i] * (y.data()[i] + kEluAlpha);
    }
    t.Accumulate(x, std::move(dx));
  });
}

Tape::Var Tape::Tanh(Var x) {
  Matrix out = value(x).array().tanh().matrix();
  const int self = size();
  return Push("tanh", std::move(out), NeedsGrad(x),
              [x, self](Tape& t, const Matrix& g) {
                const Matrix& y = t.nodes_[self].value;
                t.AccumulateExpr(x, (g.array() * (1.0 - y.array().square())).matrix());
              });
}

Tape::Var Tape::ScaleRows(Var x, const Vector& scale) {
  if (scale.size() != value(x).rows()) {
    throw std::invalid_argument("ScaleRows: width mismatch");
  }
  Matrix out = (value(x).array().colwise() * scale.array()).matrix();
  return Push("scale_rows", std::move(out), NeedsGrad(x),
              [x, &scale](Tape& t, const Matrix& g) {
                t.AccumulateExpr(x, (g.array().colwise() * scale.array()).matrix());
              });
}

Tape::Var Tape::Standardize(Var x, const Vector& mean, const Vector& stddev) {
  if (mean.size() != value(x).rows() || stddev.size() != value(x).rows()) {
    throw std::invalid_argument("Standardize: width mismatch");
  }
  Matrix out = ((value(x).colwise() - mean).array().colwise() / stddev.array()).matrix();
  return Push("standardize", std::move(out), NeedsGrad(x),
              [x, &stddev](Tape& t, const Matrix& g) {
                t.AccumulateExpr(x, (g.array().colwise() / stddev.array()).matrix());
              });
}

void Tape::Backward(Var loss) {
  if (value(loss).rows() != 1 || value(loss).cols() != 1) {
    throw std::invalid_argument("Backward: loss must be a scalar");
  }
  if (!NeedsGrad(loss)) return;
  nodes_[loss.id].grad = Matrix::Ones(1, 1);
  for (int id = loss.id; id >= 0; --id) {
    Node& node = nodes_[id];
    if (!node.needs_grad || node.grad.size() == 0 || !node.backward) continue;
    if (!Finite(node.grad)) throw NonFiniteError(id, node.op, /*backward=*/true);
    node.backward(*this, node.grad);
  }
}

}  // namespace reftrack::nn
