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

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "sgpose/autodiff.hpp"
#include "sgpose/error.hpp"
#include "sgpose/rng.hpp"
#include "sgpose/tensor.hpp"

namespace sgpose {

// Ordered, named collection of learnable tensors. Order is insertion order and
// is the order used for checkpoints and optimizer state.
template <typename Scalar>
class ParamStore {
 public:
  int add(const std::string& name, Tensor<Scalar> value) {
    if (index_.contains(name)) throw ConfigError("duplicate parameter name: " + name);
    index_[name] = static_cast<int>(values_.size());
    names_.push_back(name);
    values_.push_back(std::move(value));
    return index_[name];
  }

  int index(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
  }

  bool contains(const std::string& name) const { return index_.contains(name); }
  std::size_t size() const { return values_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  const Tensor<Scalar>& operator[](std::size_t i) const { return values_[i]; }
  Tensor<Scalar>& operator[](std::size_t i) { return values_[i]; }
  const std::vector<Tensor<Scalar>>& values() const { return values_; }
  std::vector<Tensor<Scalar>>& values() { return values_; }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& v : values_) n += static_cast<std::size_t>(v.size());
    return n;
  }

  template <typename Other>
  ParamStore<Other> cast() const {
    ParamStore<Other> out;
    for (std::size_t i = 0; i < size(); ++i) out.add(names_[i], values_[i].template cast<Other>());
    return out;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor<Scalar>> values_;
  std::map<std::string, int> index_;
};

// Lazily binds store entries into a graph as parameter leaves. Entries that a
// forward pass never touches get an all-zero gradient from gradients().
template <typename Scalar>
class ParamBinding {
 public:
  ParamBinding(ad::Graph<Scalar>& graph, const ParamStore<Scalar>& store)
      : graph_(graph), store_(store), vars_(store.size()) {}

  ad::Var<Scalar> operator[](int i) {
    auto& v = vars_[static_cast<std::size_t>(i)];
    if (!v.valid()) v = graph_.parameter(store_[static_cast<std::size_t>(i)]);
    return v;
  }

  ad::Graph<Scalar>& graph() { return graph_; }
  bool used(int i) const { return vars_[static_cast<std::size_t>(i)].valid(); }

  std::vector<Tensor<Scalar>> gradients() const {
    std::vector<Tensor<Scalar>> out;
    out.reserve(vars_.size());
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      if (vars_[i].valid()) {
        out.push_back(graph_.grad(vars_[i]));
      } else {
        out.push_back(Tensor<Scalar>::Zero(store_[i].rows(), store_[i].cols()));
      }
    }
    return out;
  }

 private:
  ad::Graph<Scalar>& graph_;
  const ParamStore<Scalar>& store_;
  std::vector<ad::Var<Scalar>> vars_;
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation.
template <typename Scalar>
Tensor<Scalar> uniform_init(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor<Scalar> t(rows, cols);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = static_cast<Scalar>(rng.uniform(-bound, bound));
  return t;
}

// Fully connected layer y = x W + b, W is [in x out].
struct Linear {
  int weight = -1;
  int bias = -1;
  Eigen::Index in = 0;
  Eigen::Index out = 0;

  template <typename Scalar>
  static Linear create(ParamStore<Scalar>& store, const std::string& name, Eigen::Index in, Eigen::Index out,
                       Rng& rng) {
    Linear l;
    l.in = in;
    l.out = out;
    l.weight = store.add(name + ".weight", uniform_init<Scalar>(in, out, in, rng));
    l.bias = store.add(name + ".bias", uniform_init<Scalar>(1, out, in, rng));
    return l;
  }

  template <typename Scalar>
  ad::Var<Scalar> operator()(ParamBinding<Scalar>& p, ad::Var<Scalar> x) const {
    if (x.cols() != in) {
      throw DimensionError("linear: expected " + std::to_string(in) + " input features, got " +
                           shape_string(x.value()));
    }
    return ad::add_row(ad::matmul(x, p[weight]), p[bias]);
  }
};

// GRU weights. Gates are computed from [x; h]:
//   r = sigmoid([x; h] W_r + b_r),  u = sigmoid([x; h] W_u + b_u)
//   c = tanh([x; r*h] W_c + b_c),   h' = (1 - u) * h + u * c
// W_r and W_u are stored side by side as one [(in+hidden) x 2*hidden] block.
struct GruParams {
  int gates_weight = -1;
  int gates_bias = -1;
  int cand_weight = -1;
  int cand_bias = -1;
  Eigen::Index in = 0;
  Eigen::Index hidden = 0;

  template <typename Scalar>
  static GruParams create(ParamStore<Scalar>& store, const std::string& name, Eigen::Index in, Eigen::Index hidden,
                          Rng& rng) {
    GruParams g;
    g.in = in;
    g.hidden = hidden;
    g.gates_weight = store.add(name + ".gates.weight", uniform_init<Scalar>(in + hidden, 2 * hidden, hidden, rng));
    g.gates_bias = store.add(name + ".gates.bias", uniform_init<Scalar>(1, 2 * hidden, hidden, rng));
    g.cand_weight = store.add(name + ".cand.weight", uniform_init<Scalar>(in + hidden, hidden, hidden, rng));
    g.cand_bias = store.add(name + ".cand.bias", uniform_init<Scalar>(1, hidden, hidden, rng));
    return g;
  }
};

template <typename Scalar>
ad::Var<Scalar> gru_cell(ParamBinding<Scalar>& p, const GruParams& w, ad::Var<Scalar> x, ad::Var<Scalar> h) {
  if (x.cols() != w.in || h.cols() != w.hidden || x.rows() != h.rows()) {
    throw DimensionError("gru_cell: x " + shape_string(x.value()) + ", h " + shape_string(h.value()) +
                         " do not match in=" + std::to_string(w.in) + " hidden=" + std::to_string(w.hidden));
  }
  using ad::Axis;
  auto xh = ad::concat<Scalar>({x, h}, Axis::kCols);
  auto gates = ad::sigmoid(ad::add_row(ad::matmul(xh, p[w.gates_weight]), p[w.gates_bias]));
  auto reset = ad::slice_cols(gates, 0, w.hidden);
  auto update = ad::slice_cols(gates, w.hidden, w.hidden);
  auto xrh = ad::concat<Scalar>({x, ad::mul(reset, h)}, Axis::kCols);
  auto cand = ad::tanh(ad::add_row(ad::matmul(xrh, p[w.cand_weight]), p[w.cand_bias]));
  // (1 - u) * h + u * c == h + u * (c - h)
  return ad::add(h, ad::mul(update, ad::sub(cand, h)));
}

}  // namespace sgpose
