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

// Define-by-run reverse-mode differentiation over dense row-major tensors.
//
// A Graph owns every node created during one forward pass. Nodes are appended
// in creation order, which is a topological order, so backward() simply walks
// the node list in reverse. Each node is visited once and contributions from
// multiple consumers accumulate into its gradient.
//
// The only broadcast supported is add_row(), which adds a 1 x n bias row to
// every row of a B x n operand.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "sgpose/error.hpp"
#include "sgpose/rng.hpp"
#include "sgpose/tensor.hpp"

namespace sgpose::ad {

template <typename Scalar>
class Graph;

template <typename Scalar>
class Var {
 public:
  Var() = default;
  Var(Graph<Scalar>* graph, int id) : graph_(graph), id_(id) {}

  bool valid() const { return graph_ != nullptr && id_ >= 0; }
  int id() const { return id_; }
  Graph<Scalar>& graph() const { return *graph_; }

  const Tensor<Scalar>& value() const { return graph_->value(*this); }
  const Tensor<Scalar>& grad() const { return graph_->grad(*this); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }

 private:
  Graph<Scalar>* graph_ = nullptr;
  int id_ = -1;
};

template <typename Scalar>
class Graph {
 public:
  using T = Tensor<Scalar>;
  using Backward = std::function<void(Graph&, const T& out_grad)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Input that never receives a gradient.
  Var<Scalar> constant(T value) { return push(std::move(value), false, {}); }

  // Leaf that receives a gradient.
  Var<Scalar> parameter(T value) { return push(std::move(value), true, {}); }

  // Creates an interior node. Gradient is tracked iff any parent tracks it.
  Var<Scalar> emit(T value, std::initializer_list<Var<Scalar>> parents, Backward backward) {
    bool needs = false;
    for (const auto& p : parents) needs = needs || nodes_[p.id()].needs_grad;
    Var<Scalar> v = push(std::move(value), needs, {});
    if (needs) nodes_[v.id()].backward = std::move(backward);
    return v;
  }

  Var<Scalar> emit(T value, const std::vector<Var<Scalar>>& parents, Backward backward) {
    bool needs = false;
    for (const auto& p : parents) needs = needs || nodes_[p.id()].needs_grad;
    Var<Scalar> v = push(std::move(value), needs, {});
    if (needs) nodes_[v.id()].backward = std::move(backward);
    return v;
  }

  const T& value(Var<Scalar> v) const { return nodes_[v.id()].value; }

  const T& grad(Var<Scalar> v) const {
    const Node& n = nodes_[v.id()];
    if (!backward_done_) throw UsageError("grad() requested before backward()");
    return n.grad;
  }

  bool needs_grad(Var<Scalar> v) const { return nodes_[v.id()].needs_grad; }

  // Adds `g` into the gradient of `v` when `v` tracks gradients.
  template <typename Derived>
  void accumulate(Var<Scalar> v, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[v.id()];
    if (n.needs_grad) n.grad.noalias() += g;
  }

  T& grad_mut(Var<Scalar> v) { return nodes_[v.id()].grad; }

  void backward(Var<Scalar> loss) {
    if (backward_done_) throw UsageError("backward() already ran on this graph; build a new graph");
    const T& lv = value(loss);
    if (lv.rows() != 1 || lv.cols() != 1) {
      throw UsageError("backward() requires a scalar loss, got " + shape_string(lv));
    }
    for (Node& n : nodes_) {
      if (n.needs_grad) n.grad = T::Zero(n.value.rows(), n.value.cols());
    }
    backward_done_ = true;
    if (!nodes_[loss.id()].needs_grad) return;
    nodes_[loss.id()].grad(0, 0) = Scalar(1);
    for (int id = loss.id(); id >= 0; --id) {
      Node& n = nodes_[id];
      if (n.needs_grad && n.backward) {
        // The closure may touch other nodes, so pass a copy-free reference to
        // a gradient that is not resized during the call.
        const T& g = n.grad;
        n.backward(*this, g);
      }
    }
  }

  bool backward_done() const { return backward_done_; }
  std::size_t size() const { return nodes_.size(); }

  // Kink tracking: every piecewise op (relu, clamp, row_min, sqrt at 0) folds
  // its branch pattern into a running hash. Two forward passes with equal
  // hashes took the same branches everywhere.
  void set_track_kinks(bool on) { track_kinks_ = on; }
  bool track_kinks() const { return track_kinks_; }
  std::uint64_t kink_signature() const { return kink_hash_; }
  void fold_kink(std::uint64_t v) {
    kink_hash_ ^= v + 0x9e3779b97f4a7c15ULL + (kink_hash_ << 6) + (kink_hash_ >> 2);
  }

 private:
  struct Node {
    T value;
    T grad;
    Backward backward;
    bool needs_grad = false;
  };

  Var<Scalar> push(T value, bool needs, Backward backward) {
    if (backward_done_) throw UsageError("cannot extend a graph after backward()");
    nodes_.push_back(Node{std::move(value), T(), std::move(backward), needs});
    return Var<Scalar>(this, static_cast<int>(nodes_.size()) - 1);
  }

  std::vector<Node> nodes_;
  bool backward_done_ = false;
  bool track_kinks_ = false;
  std::uint64_t kink_hash_ = 0;
};

namespace detail {

template <typename Scalar>
void require_same_shape(const char* op, Var<Scalar> a, Var<Scalar> b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.value()) + " vs " +
                         shape_string(b.value()));
  }
}

template <typename Scalar, typename Mask>
void fold_mask(Graph<Scalar>& g, const Mask& mask) {
  if (!g.track_kinks()) return;
  std::uint64_t h = 1469598103934665603ULL;
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    h = (h ^ static_cast<std::uint64_t>(mask(i))) * 1099511628211ULL;
  }
  g.fold_kink(h);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra

template <typename Scalar>
Var<Scalar> matmul(Var<Scalar> a, Var<Scalar> b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions disagree, " + shape_string(a.value()) + " x " +
                         shape_string(b.value()));
  }
  auto& g = a.graph();
  Tensor<Scalar> out = a.value() * b.value();
  return g.emit(std::move(out), {a, b}, [a, b](Graph<Scalar>& g, const Tensor<Scalar>& dc) {
    if (g.needs_grad(a)) g.accumulate(a, dc * g.value(b).transpose());
    if (g.needs_grad(b)) g.accumulate(b, g.value(a).transpose() * dc);
  });
}

// Adds a 1 x n bias row to every row of a.
template <typename Scalar>
Var<Scalar> add_row(Var<Scalar> a, Var<Scalar> bias) {
  if (bias.rows() != 1 || bias.cols() != a.cols()) {
    throw DimensionError("add_row: bias " + shape_string(bias.value()) + " does not fit " +
                         shape_string(a.value()));
  }
  auto& g = a.graph();
  Tensor<Scalar> out = a.value().rowwise() + bias.value().row(0);
  return g.emit(std::move(out), {a, bias}, [a, bias](Graph<Scalar>& g, const Tensor<Scalar>& dc) {
    g.accumulate(a, dc);
    if (g.needs_grad(bias)) g.accumulate(bias, dc.colwise().sum());
  });
}

// ---------------------------------------------------------------------------
// Elementwise binary

template <typename Scalar>
Var<Scalar> add(Var<Scalar> a, Var<Scalar> b) {
  detail::require_same_shape("add", a, b);
  Tensor<Scalar> out = a.value() + b.value();
  return a.graph().emit(std::move(out), {a, b}, [a, b](Graph<Scalar>& g, const Tensor<Scalar>& dc) {
    g.accumulate(a, dc);
    g.accumulate(b, dc);
  });
}

template <typename Scalar>
Var<Scalar> sub(Var<Scalar> a, Var<Scalar> b) {
  detail::require_same_shape("sub", a, b);
  Tensor<Scalar> out = a.value() - b.value();
  return a.graph().emit(std::move(out), {a, b}, [a, b](Graph<Scalar>& g, const Tensor<Scalar>& dc) {
    g.accumulate(a, dc);
    g.accumulate(b, -dc);
  });
}

// Hadamard product.
template <typename Scalar>
Var<Scalar> mul(Var<Scalar> a, Var<Scalar> b) {
  detail::require_same_shape("mul", a, b);
  Tensor<Scalar> out = a.value().cwiseProduct(b.value());
  return a.graph().emit(std::move(out), {a, b}, [a, b](Graph<Scalar>& g, const Tensor<Scalar>& dc) {
    if (g.needs_grad(a)) g.accumulate(a, dc.cwiseProduct(g.value(b)));
    if (g.needs_grad(b)) g.accumulate(b, dc.cwiseProduct(g.value(a)));
  });
}

template <typename Scalar>
Var<Scalar> operator+(Var<Scalar> a, Var<Scalar> b) { return add(a, b); }

template <typename Scalar>
Var<Scalar> operator-(Var<Scalar> a, Var<Scalar> b) { return sub(a, b); }

// ---------------------------------------------------------------------------
// Elementwise unary

template <typename Scalar>
Var<Scalar> scale(Var<Scalar> a, Scalar s) {
  Tensor<Scalar> out = a.value() * s;
  return a.graph().emit(std::move(out), {a}, [a, s](Graph<Scalar>& g, const Tensor<Scalar>& dc) {
    g.accumulate(a, dc * s);
  });
}

template <typename Scalar>
Var<Scalar> add_scalar(Var<Scalar> a, Scalar c) {
  Tensor<Scalar> out = a.value().array() + c;
  return a.graph().emit(std::move(out), {a}, [a](Graph<Scalar>& g, const Tensor<Scalar>& dc) {
    g.accumulate(a, dc);
  });
}

template <typename Scalar>
Var<Scalar> operator-(Var<Scalar> a) { return scale(a, Scalar(-1)); }

template <typename Scalar>
Var<Scalar> tanh(Var<Scalar> a) {
  Tensor<Scalar> out = a.value().array().tanh();
  auto& g = a.graph();
  return g.emit(std::move(out), {a}, [a, id = static_cast<int>(g.size())](Graph<Scalar>& g, const Tensor<Scalar>& dc) {
    const auto& yv = g.value(Var<Scalar>(&g, id));
    g.accumulate(a, (dc.array() * (Scalar(1) - yv.array().square())).matrix());
  });
}

template <typename Scalar>
Var<Scalar> sigmoid(Var<Scalar> a) {
  // Branch on sign so neither exp overflows.
  Tensor<Scalar> out = a.value().unaryExpr([](Scalar x) {
    if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
    const Scalar e = std::exp(x);
    return e / (Scalar(1) + e);
  });
  auto& g = a.graph();
  return g.emit(std::move(out), {a}, [a, id = static_cast<int>(g.size())](Graph<Scalar>& g, const Tensor<Scalar>& dc) {
    const auto& yv = g.value(Var<Scalar>(&g, id));
    g.accumulate(a, (dc.array() * yv.array() * (Scalar(1) - yv.array())).matrix());
  });
}

template <typename Scalar>
Var<Scalar> relu(Var<Scalar> a) {
  auto& g = a.graph();
  const auto mask = (a.value().array() > Scalar(0)).eval();
  detail::fold_mask(g, mask.reshaped());
  Tensor<Scalar> out = mask.select(a.value(), Tensor<Scalar>::Zero(a.rows(), a.cols()));
  return g.emit(std::move(out), {a}, [a](Graph<Scalar>& g, const Tensor<Scalar>& dc) {
    const auto& x = g.value(a);
    g.accumulate(a, (x.array() > Scalar(0)).select(dc, Tensor<Scalar>::Zero(dc.rows(), dc.cols())));
  });
}

template <typename Scalar>
Var<Scalar> exp(Var<Scalar> a) {
  Tensor<Scalar> out = a.value().array().exp();
  auto& g = a.graph();
  return g.emit(std::move(out), {a}, [a, id = static_cast<int>(g.size())](Graph<Scalar>& g, const Tensor<Scalar>& dc) {
    g.accumulate(a, dc.cwiseProduct(g.value(Var<Scalar>(&g, id))));
  });
}

template <typename Scalar>
Var<Scalar> square(Var<Scalar> a) {
  Tensor<Scalar> out = a.value().array().square();
  return a.graph().emit(std::move(out), {a}, [a](Graph<Scalar>& g, const Tensor<Scalar>& dc) {
    g.accumulate(a, (Scalar(2) * dc.array() * g.value(a).array()).matrix());
  });
}

// Square root; the (sub)gradient at exactly zero is taken as zero.
template <typename Scalar>
Var<Scalar> sqrt(Var<Scalar> a) {
  if ((a.value().array() < Scalar(0)).any()) throw DimensionError("sqrt: negative operand");
  auto& g = a.graph();
  const auto zero = (a.value().array() == Scalar(0)).eval();
  detail::fold_mask(g, zero.reshaped());
  Tensor<Scalar> out = a.value().array().sqrt();
  return g.emit(std::move(out), {a}, [a, id = static_cast<int>(g.size())](Graph<Scalar>& g, const Tensor<Scalar>& dc) {
    const auto& y = g.value(Var<Scalar>(&g, id));
    Tensor<Scalar> d = (y.array() > Scalar(0)).select(dc.array() / (Scalar(2) * y.array()), Scalar(0));
    g.accumulate(a, d);
  });
}

// Clamps to [lo, hi]; gradient passes only where the value was inside.
template <typename Scalar>
Var<Scalar> clamp(Var<Scalar> a, Scalar lo, Scalar hi) {
  auto& g = a.graph();
  const auto inside = ((a.value().array() >= lo) && (a.value().array() <= hi)).eval();
  detail::fold_mask(g, inside.reshaped());
  Tensor<Scalar> out = a.value().cwiseMax(lo).cwiseMin(hi);
  return g.emit(std::move(out), {a}, [a, lo, hi](Graph<Scalar>& g, const Tensor<Scalar>& dc) {
    const auto& x = g.value(a);
    g.accumulate(a, ((x.array() >= lo) && (x.array() <= hi)).select(dc, Tensor<Scalar>::Zero(dc.rows(), dc.cols())));
  });
}

// ---------------------------------------------------------------------------
// Row-wise softmax with max subtraction.

template <typename Scalar>
Var<Scalar> softmax(Var<Scalar> a) {
  if (a.cols() < 1) throw DimensionError("softmax: need at least one column");
  const auto& x = a.value();
  Tensor<Scalar> out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const Scalar m = x.row(r).maxCoeff();
    out.row(r) = (x.row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  auto& g = a.graph();
  return g.emit(std::move(out), {a}, [a, id = static_cast<int>(g.size())](Graph<Scalar>& g, const Tensor<Scalar>& dc) {
    const auto& y = g.value(Var<Scalar>(&g, id));
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dot = dc.cwiseProduct(y).rowwise().sum();
    Tensor<Scalar> d = y.array() * (dc.colwise() - dot).array();
    g.accumulate(a, d);
  });
}

// ---------------------------------------------------------------------------
// Structural

enum class Axis { kRows = 0, kCols = 1 };

template <typename Scalar>
Var<Scalar> concat(const std::vector<Var<Scalar>>& parts, Axis axis) {
  if (parts.empty()) throw DimensionError("concat: no parts");
  auto& g = parts.front().graph();
  if (parts.size() == 1) return parts.front();
  Eigen::Index rows = 0, cols = 0;
  for (const auto& p : parts) {
    if (axis == Axis::kCols) {
      if (p.rows() != parts.front().rows()) {
        throw DimensionError("concat: row counts differ, " + shape_string(parts.front().value()) + " vs " +
                             shape_string(p.value()));
      }
      cols += p.cols();
      rows = p.rows();
    } else {
      if (p.cols() != parts.front().cols()) {
        throw DimensionError("concat: column counts differ, " + shape_string(parts.front().value()) + " vs " +
                             shape_string(p.value()));
      }
      rows += p.rows();
      cols = p.cols();
    }
  }
  Tensor<Scalar> out(rows, cols);
  Eigen::Index offset = 0;
  for (const auto& p : parts) {
    if (axis == Axis::kCols) {
      out.middleCols(offset, p.cols()) = p.value();
      offset += p.cols();
    } else {
      out.middleRows(offset, p.rows()) = p.value();
      offset += p.rows();
    }
  }
  return g.emit(std::move(out), parts, [parts, axis](Graph<Scalar>& g, const Tensor<Scalar>& dc) {
    Eigen::Index off = 0;
    for (const auto& p : parts) {
      const Eigen::Index n = axis == Axis::kCols ? p.cols() : p.rows();
      if (g.needs_grad(p)) {
        if (axis == Axis::kCols) {
          g.accumulate(p, dc.middleCols(off, n));
        } else {
          g.accumulate(p, dc.middleRows(off, n));
        }
      }
      off += n;
    }
  });
}

template <typename Scalar>
Var<Scalar> slice_cols(Var<Scalar> a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw DimensionError("slice_cols: [" + std::to_string(start) + ", +" + std::to_string(count) +
                         ") outside " + shape_string(a.value()));
  }
  Tensor<Scalar> out = a.value().middleCols(start, count);
  return a.graph().emit(std::move(out), {a}, [a, start, count](Graph<Scalar>& g, const Tensor<Scalar>& dc) {
    if (g.needs_grad(a)) g.grad_mut(a).middleCols(start, count) += dc;
  });
}

// Row-major reshape; element order is unchanged.
template <typename Scalar>
Var<Scalar> reshape(Var<Scalar> a, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != a.value().size()) {
    throw DimensionError("reshape: cannot view " + shape_string(a.value()) + " as [" + std::to_string(rows) +
                         "x" + std::to_string(cols) + "]");
  }
  Tensor<Scalar> out = Eigen::Map<const Tensor<Scalar>>(a.value().data(), rows, cols);
  return a.graph().emit(std::move(out), {a}, [a](Graph<Scalar>& g, const Tensor<Scalar>& dc) {
    g.accumulate(a, Eigen::Map<const Tensor<Scalar>>(dc.data(), g.value(a).rows(), g.value(a).cols()));
  });
}

// Repeats every row `times` times consecutively: row r becomes rows r*times ... r*times+times-1.
template <typename Scalar>
Var<Scalar> repeat_rows(Var<Scalar> a, Eigen::Index times) {
  if (times < 1) throw DimensionError("repeat_rows: times must be >= 1");
  if (times == 1) return a;
  const auto& x = a.value();
  Tensor<Scalar> out(x.rows() * times, x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index k = 0; k < times; ++k) out.row(r * times + k) = x.row(r);
  }
  return a.graph().emit(std::move(out), {a}, [a, times](Graph<Scalar>& g, const Tensor<Scalar>& dc) {
    if (!g.needs_grad(a)) return;
    Tensor<Scalar>& ga = g.grad_mut(a);
    for (Eigen::Index r = 0; r < ga.rows(); ++r) {
      for (Eigen::Index k = 0; k < times; ++k) ga.row(r) += dc.row(r * times + k);
    }
  });
}

// ---------------------------------------------------------------------------
// Reductions

template <typename Scalar>
Var<Scalar> sum(Var<Scalar> a) {
  Tensor<Scalar> out(1, 1);
  out(0, 0) = a.value().sum();
  return a.graph().emit(std::move(out), {a}, [a](Graph<Scalar>& g, const Tensor<Scalar>& dc) {
    if (g.needs_grad(a)) g.grad_mut(a).array() += dc(0, 0);
  });
}

template <typename Scalar>
Var<Scalar> mean(Var<Scalar> a) {
  return scale(sum(a), Scalar(1) / static_cast<Scalar>(a.value().size()));
}

// Sum across columns: [r x c] -> [r x 1].
template <typename Scalar>
Var<Scalar> row_sum(Var<Scalar> a) {
  Tensor<Scalar> out = a.value().rowwise().sum();
  return a.graph().emit(std::move(out), {a}, [a](Graph<Scalar>& g, const Tensor<Scalar>& dc) {
    if (g.needs_grad(a)) g.grad_mut(a).colwise() += dc.col(0);
  });
}

// Minimum across columns: [r x c] -> [r x 1]; gradient goes to the first argmin.
template <typename Scalar>
Var<Scalar> row_min(Var<Scalar> a) {
  const auto& x = a.value();
  Tensor<Scalar> out(x.rows(), 1);
  std::vector<Eigen::Index> arg(static_cast<std::size_t>(x.rows()));
  Eigen::Matrix<int, Eigen::Dynamic, 1> argv(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    Eigen::Index c;
    out(r, 0) = x.row(r).minCoeff(&c);
    arg[static_cast<std::size_t>(r)] = c;
    argv(r) = static_cast<int>(c);
  }
  auto& g = a.graph();
  detail::fold_mask(g, argv);
  return g.emit(std::move(out), {a}, [a, arg](Graph<Scalar>& g, const Tensor<Scalar>& dc) {
    if (!g.needs_grad(a)) return;
    Tensor<Scalar>& ga = g.grad_mut(a);
    for (Eigen::Index r = 0; r < ga.rows(); ++r) ga(r, arg[static_cast<std::size_t>(r)]) += dc(r, 0);
  });
}

// Attention-weighted sum. weights is [B x S]; values is [B x S*dim] with the
// S vectors of each row stored contiguously. Returns [B x dim] with
// out[b] = sum_s weights[b, s] * values[b, s*dim : (s+1)*dim].
template <typename Scalar>
Var<Scalar> weighted_sum(Var<Scalar> weights, Var<Scalar> values, Eigen::Index dim) {
  const Eigen::Index steps = weights.cols();
  if (weights.rows() != values.rows() || values.cols() != steps * dim) {
    throw DimensionError("weighted_sum: weights " + shape_string(weights.value()) + " incompatible with values " +
                         shape_string(values.value()) + " at dim " + std::to_string(dim));
  }
  const auto& w = weights.value();
  const auto& v = values.value();
  Tensor<Scalar> out = Tensor<Scalar>::Zero(w.rows(), dim);
  for (Eigen::Index b = 0; b < w.rows(); ++b) {
    for (Eigen::Index s = 0; s < steps; ++s) out.row(b) += w(b, s) * v.row(b).segment(s * dim, dim);
  }
  return weights.graph().emit(
      std::move(out), {weights, values}, [weights, values, dim, steps](Graph<Scalar>& g, const Tensor<Scalar>& dc) {
        const auto& w = g.value(weights);
        const auto& v = g.value(values);
        const bool gw = g.needs_grad(weights), gv = g.needs_grad(values);
        for (Eigen::Index b = 0; b < w.rows(); ++b) {
          for (Eigen::Index s = 0; s < steps; ++s) {
            if (gw) g.grad_mut(weights)(b, s) += dc.row(b).dot(v.row(b).segment(s * dim, dim));
            if (gv) g.grad_mut(values).row(b).segment(s * dim, dim) += w(b, s) * dc.row(b);
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Inverted dropout: survivors are scaled by 1 / (1 - rate) during training.

template <typename Scalar>
Var<Scalar> dropout(Var<Scalar> a, double rate, Rng& rng, bool training) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  if (!training || rate == 0.0) return a;
  const Scalar keep_scale = Scalar(1) / static_cast<Scalar>(1.0 - rate);
  Tensor<Scalar> mask(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng.uniform() < rate ? Scalar(0) : keep_scale;
  Tensor<Scalar> out = a.value().cwiseProduct(mask);
  return a.graph().emit(std::move(out), {a}, [a, mask = std::move(mask)](Graph<Scalar>& g, const Tensor<Scalar>& dc) {
    g.accumulate(a, dc.cwiseProduct(mask));
  });
}

}  // namespace sgpose::ad
