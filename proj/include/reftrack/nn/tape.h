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

// Reverse-mode differentiation over batched matrices.
//
// Every value on the tape is a (rows x batch) matrix; samples are columns.
// Operations are recorded in execution order and Backward() replays them in
// reverse. Parameters are not tape nodes: parameterized ops (Affine,
// LayerNorm) receive references to the parameter tensors and, optionally,
// gradient buffers into which they accumulate. Passing null buffers freezes
// the parameters while still propagating gradients to the op's input.

#ifndef REFTRACK_NN_TAPE_H_
#define REFTRACK_NN_TAPE_H_

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "reftrack/nn/params.h"

namespace reftrack::nn {

inline constexpr double kLayerNormEps = 1e-5;
inline constexpr double kEluAlpha = 1.0;

// Raised when an op produces a NaN or infinity, forward or backward.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(int op_index, const std::string& op, bool backward);
  int op_index() const { return op_index_; }

 private:
  int op_index_;
};

class Tape {
 public:
  struct Var {
    int id = -1;
  };

  // A value with no gradient.
  Var Constant(Matrix value);
  // A value whose gradient is wanted (gradient checks, input sensitivities).
  Var Leaf(Matrix value);

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  // Zero-sized until Backward() reaches the node.
  const Matrix& grad(Var v) const { return nodes_[v.id].grad; }
  int size() const { return static_cast<int>(nodes_.size()); }

  Var Add(Var a, Var b);
  Var Sub(Var a, Var b);
  Var Scale(Var a, double s);
  Var Square(Var a);
  // Sum of all entries, as a 1x1 value.
  Var Sum(Var a);
  Var Mean(Var a);
  // Stacks rows; all parts must share a column count.
  Var Concat(std::span<const Var> parts);
  Var Slice(Var a, int row, int rows);

  // y = W x + b. Null gradient pointers mark the parameters frozen.
  Var Affine(Var x, const Matrix& weight, const Vector& bias, Matrix* grad_weight,
             Vector* grad_bias);
  // Per-column normalization over rows, then gain * xhat + offset.
  Var LayerNorm(Var x, const Vector& gain, const Vector& offset,
                Vector* grad_gain, Vector* grad_offset);
  Var Elu(Var x);
  Var Tanh(Var x);
  // y = diag(scale) x
  Var ScaleRows(Var x, const Vector& scale);
  // y = (x - mean) / stddev, rowwise constants.
  Var Standardize(Var x, const Vector& mean, const Vector& stddev);

  // Seeds d(loss)/d(loss) = 1 and propagates to every node that needs it.
  // `loss` must be 1x1. May be called once per tape.
  void Backward(Var loss);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    const char* op = "";
    // Propagates this node's grad to its inputs and parameter buffers.
    std::function<void(Tape&, const Matrix&)> backward;
  };

  Var Push(const char* op, Matrix value, bool needs_grad,
           std::function<void(Tape&, const Matrix&)> backward);
  bool NeedsGrad(Var v) const { return nodes_[v.id].needs_grad; }
  // Accumulates into a node's gradient, allocating on first touch.
  void Accumulate(Var v, const Matrix& g);
  void Accumulate(Var v, Matrix&& g);
  template <typename Expr>
  void AccumulateExpr(Var v, const Expr& g);

  std::vector<Node> nodes_;
};

}  // namespace reftrack::nn

#endif  // REFTRACK_NN_TAPE_H_
