// Copyright (C) 2026 The salad authors
// SPDX-License-Identifier: Apache-2.0

#include "salad/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "salad/error.hpp"

namespace salad::ad {

void Node::accumulate(const Tensor& g) {
  Tensor& buf = grad_buffer();
  buf.mat() += g.mat();
}

Tensor& Node::grad_buffer() {
  if (grad.empty() && !value.empty()) grad = Tensor(value.shape(), 0.0);
  return grad;
}

Var Var::constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var(std::move(n));
}

Var Var::parameter(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var(std::move(n));
}

const Tensor& Var::value() const {
  if (!node_) throw InvalidArgument("value() on an undefined variable");
  return node_->value;
}

Tensor Var::grad() const {
  if (!node_) throw InvalidArgument("grad() on an undefined variable");
  if (node_->grad.empty()) return Tensor(node_->value.shape(), 0.0);
  return node_->grad;
}

Var make_op(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->inputs.reserve(inputs.size());
  for (auto& in : inputs) {
    if (!in.defined()) throw InvalidArgument("op input is undefined");
    n->requires_grad = n->requires_grad || in.requires_grad();
    n->inputs.push_back(in.node());
  }
  if (n->requires_grad) n->backward = std::move(backward);
  return Var(std::move(n));
}

void backward(const Var& loss) {
  if (!loss.defined()) throw InvalidArgument("backward() called before any forward computation");
  if (loss.value().size() != 1) throw InvalidArgument("backward() needs a scalar loss");
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node()->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

namespace {

// Eigen reductions over unaligned maps peel a pointer-dependent number of
// leading elements, which changes the rounding between runs. Fixed order here.
template <typename M>
void add_column_sums(const M& g, Tensor& out) {
  for (Eigen::Index r = 0; r < g.rows(); ++r) {
    for (Eigen::Index c = 0; c < g.cols(); ++c) out[static_cast<std::size_t>(c)] += g(r, c);
  }
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a.value().same_shape(b.value())) throw InvalidArgument(std::string(op) + ": shape mismatch");
}

bool wants(const Node& n, std::size_t i) { return n.inputs[i]->requires_grad; }

}  // namespace

Var matmul(const Var& a, const Var& b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.cols() != bv.rows()) throw InvalidArgument("matmul: inner dimensions differ");
  Tensor out = Tensor::matrix(av.rows(), bv.cols());
  out.mat().noalias() = av.mat() * bv.mat();
  return make_op(std::move(out), {a, b}, [](Node& n) {
    const auto& g = n.grad.mat();
    if (wants(n, 0)) n.inputs[0]->grad_buffer().mat().noalias() += g * n.inputs[1]->value.mat().transpose();
    if (wants(n, 1)) n.inputs[1]->grad_buffer().mat().noalias() += n.inputs[0]->value.mat().transpose() * g;
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  out.mat() += b.value().mat();
  return make_op(std::move(out), {a, b}, [](Node& n) {
    for (std::size_t i = 0; i < 2; ++i) {
      if (wants(n, i)) n.inputs[i]->accumulate(n.grad);
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  out.mat() -= b.value().mat();
  return make_op(std::move(out), {a, b}, [](Node& n) {
    if (wants(n, 0)) n.inputs[0]->accumulate(n.grad);
    if (wants(n, 1)) n.inputs[1]->grad_buffer().mat() -= n.grad.mat();
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  out.mat().array() *= b.value().mat().array();
  return make_op(std::move(out), {a, b}, [](Node& n) {
    if (wants(n, 0)) n.inputs[0]->grad_buffer().mat().array() += n.grad.mat().array() * n.inputs[1]->value.mat().array();
    if (wants(n, 1)) n.inputs[1]->grad_buffer().mat().array() += n.grad.mat().array() * n.inputs[0]->value.mat().array();
  });
}

Var scale(const Var& a, double s) {
  Tensor out = a.value();
  out.mat() *= s;
  return make_op(std::move(out), {a}, [s](Node& n) { n.inputs[0]->grad_buffer().mat() += s * n.grad.mat(); });
}

Var add_bias(const Var& a, const Var& bias) {
  const auto& av = a.value();
  const auto& bv = bias.value();
  if (bv.size() != av.cols()) throw InvalidArgument("add_bias: bias length differs from column count");
  Tensor out = av;
  out.mat().rowwise() += ConstMatrixMap(bv.data().data(), 1, static_cast<Eigen::Index>(bv.size())).row(0);
  return make_op(std::move(out), {a, bias}, [](Node& n) {
    if (wants(n, 0)) n.inputs[0]->accumulate(n.grad);
    if (wants(n, 1)) {
      add_column_sums(n.grad.mat(), n.inputs[1]->grad_buffer());
    }
  });
}

Var relu(const Var& a) {
  Tensor out = a.value();
  out.mat() = out.mat().cwiseMax(0.0);
  return make_op(std::move(out), {a}, [](Node& n) {
    n.inputs[0]->grad_buffer().mat().array() += (n.value.mat().array() > 0.0).cast<double>() * n.grad.mat().array();
  });
}

Var sigmoid(const Var& a) {
  Tensor out = a.value();
  for (double& v : out.data()) v = 1.0 / (1.0 + std::exp(-v));
  return make_op(std::move(out), {a}, [](Node& n) {
    const auto y = n.value.mat().array();
    n.inputs[0]->grad_buffer().mat().array() += n.grad.mat().array() * y * (1.0 - y);
  });
}

Var tanh(const Var& a) {
  Tensor out = a.value();
  for (double& v : out.data()) v = std::tanh(v);
  return make_op(std::move(out), {a}, [](Node& n) {
    const auto y = n.value.mat().array();
    n.inputs[0]->grad_buffer().mat().array() += n.grad.mat().array() * (1.0 - y * y);
  });
}

Var softmax_rows(const Var& a) {
  Tensor out = a.value();
  auto m = out.mat();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double mx = m.row(r).maxCoeff();
    m.row(r) = (m.row(r).array() - mx).exp();
    double z = 0.0;
    for (Eigen::Index c = 0; c < m.cols(); ++c) z += m(r, c);
    m.row(r) /= z;
  }
  return make_op(std::move(out), {a}, [](Node& n) {
    const auto y = n.value.mat();
    const auto g = n.grad.mat();
    auto gi = n.inputs[0]->grad_buffer().mat();
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      double dot = 0.0;
      for (Eigen::Index c = 0; c < y.cols(); ++c) dot += y(r, c) * g(r, c);
      gi.row(r).array() += y.row(r).array() * (g.row(r).array() - dot);
    }
  });
}

Var concat_cols(const Var& a, const Var& b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.rows() != bv.rows()) throw InvalidArgument("concat_cols: row counts differ");
  const auto ca = static_cast<Eigen::Index>(av.cols());
  const auto cb = static_cast<Eigen::Index>(bv.cols());
  Tensor out = Tensor::matrix(av.rows(), av.cols() + bv.cols());
  out.mat().leftCols(ca) = av.mat();
  out.mat().rightCols(cb) = bv.mat();
  return make_op(std::move(out), {a, b}, [ca, cb](Node& n) {
    if (wants(n, 0)) n.inputs[0]->grad_buffer().mat() += n.grad.mat().leftCols(ca);
    if (wants(n, 1)) n.inputs[1]->grad_buffer().mat() += n.grad.mat().rightCols(cb);
  });
}

Var slice_cols(const Var& a, std::size_t begin, std::size_t end) {
  const auto& av = a.value();
  if (begin > end || end > av.cols()) throw InvalidArgument("slice_cols: range out of bounds");
  const auto b0 = static_cast<Eigen::Index>(begin);
  const auto w = static_cast<Eigen::Index>(end - begin);
  Tensor out = Tensor::matrix(av.rows(), end - begin);
  out.mat() = av.mat().middleCols(b0, w);
  return make_op(std::move(out), {a},
                 [b0, w](Node& n) { n.inputs[0]->grad_buffer().mat().middleCols(b0, w) += n.grad.mat(); });
}

Var sum(const Var& a) {
  const auto d = a.value().data();
  return make_op(Tensor::scalar(std::accumulate(d.begin(), d.end(), 0.0)), {a}, [](Node& n) {
    n.inputs[0]->grad_buffer().mat().array() += n.grad[0];
  });
}

namespace {

double sigm(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// Per-step activations kept for the backward sweep.
struct GruTrace {
  RowMatrix z, r, cand, hh_n, h_prev;
};

}  // namespace

Var gru_sequence(const Var& x, const Var& w, const Var& u, const Var& b, bool reverse) {
  const auto& xv = x.value();
  const auto& wv = w.value();
  const auto& uv = u.value();
  const auto& bv = b.value();
  const auto steps = static_cast<Eigen::Index>(xv.rows());
  const auto hidden = static_cast<Eigen::Index>(uv.rows());
  if (wv.rows() != xv.cols()) throw InvalidArgument("gru_sequence: input weight rows differ from feature dim");
  if (static_cast<Eigen::Index>(wv.cols()) != 3 * hidden || static_cast<Eigen::Index>(uv.cols()) != 3 * hidden ||
      static_cast<Eigen::Index>(bv.size()) != 3 * hidden) {
    throw InvalidArgument("gru_sequence: gate block sizes are inconsistent");
  }

  RowMatrix proj = xv.mat() * wv.mat();
  proj.rowwise() += ConstMatrixMap(bv.data().data(), 1, 3 * hidden).row(0);

  auto trace = std::make_shared<GruTrace>();
  trace->z.resize(steps, hidden);
  trace->r.resize(steps, hidden);
  trace->cand.resize(steps, hidden);
  trace->hh_n.resize(steps, hidden);
  trace->h_prev.resize(steps, hidden);

  Tensor out = Tensor::matrix(xv.rows(), static_cast<std::size_t>(hidden));
  auto hs = out.mat();
  Eigen::RowVectorXd h = Eigen::RowVectorXd::Zero(hidden);
  Eigen::RowVectorXd hh(3 * hidden);
  const auto um = uv.mat();
  for (Eigen::Index k = 0; k < steps; ++k) {
    const Eigen::Index t = reverse ? steps - 1 - k : k;
    hh.noalias() = h * um;
    trace->h_prev.row(t) = h;
    for (Eigen::Index j = 0; j < hidden; ++j) {
      const double z = sigm(proj(t, j) + hh(j));
      const double r = sigm(proj(t, hidden + j) + hh(hidden + j));
      const double c = std::tanh(proj(t, 2 * hidden + j) + r * hh(2 * hidden + j));
      trace->z(t, j) = z;
      trace->r(t, j) = r;
      trace->cand(t, j) = c;
      trace->hh_n(t, j) = hh(2 * hidden + j);
      h(j) = (1.0 - z) * c + z * h(j);
    }
    hs.row(t) = h;
  }

  return make_op(std::move(out), {x, w, u, b}, [trace, reverse, steps, hidden](Node& n) {
    const auto g_out = n.grad.mat();
    const auto um = n.inputs[2]->value.mat();
    RowMatrix d_proj(steps, 3 * hidden);  // gradient w.r.t. x W + b
    RowMatrix d_hh(steps, 3 * hidden);    // gradient w.r.t. h U
    Eigen::RowVectorXd carry = Eigen::RowVectorXd::Zero(hidden);
    for (Eigen::Index k = steps - 1; k >= 0; --k) {
      const Eigen::Index t = reverse ? steps - 1 - k : k;
      Eigen::RowVectorXd dh = g_out.row(t) + carry;
      Eigen::RowVectorXd d_prev(hidden);
      for (Eigen::Index j = 0; j < hidden; ++j) {
        const double z = trace->z(t, j);
        const double r = trace->r(t, j);
        const double c = trace->cand(t, j);
        const double dz = dh(j) * (trace->h_prev(t, j) - c);
        const double dc_pre = dh(j) * (1.0 - z) * (1.0 - c * c);
        const double dr_pre = dc_pre * trace->hh_n(t, j) * r * (1.0 - r);
        const double dz_pre = dz * z * (1.0 - z);
        d_proj(t, j) = dz_pre;
        d_proj(t, hidden + j) = dr_pre;
        d_proj(t, 2 * hidden + j) = dc_pre;
        d_hh(t, j) = dz_pre;
        d_hh(t, hidden + j) = dr_pre;
        d_hh(t, 2 * hidden + j) = dc_pre * r;
        d_prev(j) = dh(j) * z;
      }
      d_prev.noalias() += d_hh.row(t) * um.transpose();
      carry = d_prev;
    }
    if (wants(n, 0)) n.inputs[0]->grad_buffer().mat().noalias() += d_proj * n.inputs[1]->value.mat().transpose();
    if (wants(n, 1)) n.inputs[1]->grad_buffer().mat().noalias() += n.inputs[0]->value.mat().transpose() * d_proj;
    if (wants(n, 2)) n.inputs[2]->grad_buffer().mat().noalias() += trace->h_prev.transpose() * d_hh;
    if (wants(n, 3)) {
      add_column_sums(d_proj, n.inputs[3]->grad_buffer());
    }
  });
}

}  // namespace salad::ad
