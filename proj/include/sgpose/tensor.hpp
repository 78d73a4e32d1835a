/* Copyright 2026 The SGPose Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <string>

#include "sgpose/error.hpp"

namespace sgpose {

// Dense row-major 2-D tensor. Vectors are 1 x n; a batch of vectors is B x n.
// Row-major layout means a reshape never moves data.
template <typename Scalar>
using Tensor = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

template <typename Derived>
std::string shape_string(const Eigen::DenseBase<Derived>& m) {
  return "[" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + "]";
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.derived().array().isFinite().all();
}

// Builds a tensor from external data; rejects size mismatch and non-finite values.
template <typename Scalar, typename In>
Tensor<Scalar> tensor_from(Eigen::Index rows, Eigen::Index cols, std::span<const In> data) {
  if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != data.size()) {
    throw DimensionError("tensor_from: shape [" + std::to_string(rows) + "x" + std::to_string(cols) +
                         "] does not match " + std::to_string(data.size()) + " values");
  }
  Tensor<Scalar> t(rows, cols);
  for (Eigen::Index i = 0; i < rows * cols; ++i) {
    const In v = data[static_cast<std::size_t>(i)];
    if (!std::isfinite(static_cast<double>(v))) {
      throw DataError("tensor_from: non-finite value at flat index " + std::to_string(i));
    }
    t.data()[i] = static_cast<Scalar>(v);
  }
  return t;
}

}  // namespace sgpose
