// Copyright (C) 2026 The salad authors
// SPDX-License-Identifier: Apache-2.0

#include "salad/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "salad/error.hpp"

namespace salad::ad {

std::size_t shape_size(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_size(shape_)) {
    throw InvalidArgument("tensor data length does not match its shape");
  }
}

Tensor Tensor::from(const RowMatrix& m) {
  Tensor t = matrix(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  t.mat() = m;
  return t;
}

double Tensor::item() const {
  if (data_.size() != 1) throw InvalidArgument("item() on a tensor with more than one element");
  return data_[0];
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace salad::ad
