// Copyright (C) 2026 The salad authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "salad/tensor.hpp"

namespace salad::ad {

// Tape-free reverse-mode graph: every Var owns a node that remembers its
// inputs and how to push its gradient back into them. A graph lives as long
// as the Vars referencing it; graphs are not shared between threads.
struct Node {
  Tensor value;
  Tensor grad;  // allocated on first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  void accumulate(const Tensor& g);
  Tensor& grad_buffer();  // zero-initialised on first access
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Var constant(Tensor value);
  // Leaf that receives a gradient.
  static Var parameter(Tensor value);

  bool defined() const noexcept { return node_ != nullptr; }
  bool requires_grad() const noexcept { return node_ && node_->requires_grad; }
  const Tensor& value() const;
  // Gradient after backward(); zeros for leaves the loss does not reach.
  Tensor grad() const;

  const std::shared_ptr<Node>& node() const noexcept { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Builds an op node. `backward` reads node.grad and accumulates into
// node.inputs[i]; it is only invoked when some input requires a gradient.
Var make_op(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward);

// Reverse sweep from a scalar. Gradients accumulate, so calling it twice on
// the same graph doubles them.
void backward(const Var& loss);

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
// a (R x C) + bias (1 x C) broadcast over rows.
Var add_bias(const Var& a, const Var& bias);
Var relu(const Var& a);
Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var softmax_rows(const Var& a);
Var concat_cols(const Var& a, const Var& b);
Var slice_cols(const Var& a, std::size_t begin, std::size_t end);
Var sum(const Var& a);

// Gated recurrent unit over a whole sequence x (T x D) with h_0 = 0.
// Gate blocks in w (D x 3H), u (H x 3H) and b (1 x 3H) are ordered
// [update | reset | candidate]:
//   z = sigmoid(x Wz + h Uz + bz), r = sigmoid(x Wr + h Ur + br)
//   n = tanh(x Wn + bn + r * (h Un)), h' = (1 - z) * n + z * h
// With reverse = true frames are consumed from T-1 down to 0; row t of the
// result is always the state after consuming frame t.
Var gru_sequence(const Var& x, const Var& w, const Var& u, const Var& b, bool reverse);

}  // namespace salad::ad
