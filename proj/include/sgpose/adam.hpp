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
#include <vector>

#include "sgpose/error.hpp"
#include "sgpose/params.hpp"

namespace sgpose {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename Scalar>
struct AdamState {
  std::vector<Tensor<Scalar>> m;
  std::vector<Tensor<Scalar>> v;
  long step = 0;

  static AdamState zeros_like(const ParamStore<Scalar>& params) {
    AdamState s;
    for (const auto& p : params.values()) {
      s.m.push_back(Tensor<Scalar>::Zero(p.rows(), p.cols()));
      s.v.push_back(Tensor<Scalar>::Zero(p.rows(), p.cols()));
    }
    return s;
  }
};

// One bias-corrected Adam update, in place.
template <typename Scalar>
void adam_step(ParamStore<Scalar>& params, const std::vector<Tensor<Scalar>>& grads, AdamState<Scalar>& state,
               const AdamOptions& opt) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw DimensionError("adam_step: parameter, gradient and state counts differ");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.step));
  const auto b1 = static_cast<Scalar>(opt.beta1);
  const auto b2 = static_cast<Scalar>(opt.beta2);
  const auto step = static_cast<Scalar>(opt.lr / c1);
  const auto inv_c2 = static_cast<Scalar>(1.0 / c2);
  const auto eps = static_cast<Scalar>(opt.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& g = grads[i];
    if (g.rows() != params[i].rows() || g.cols() != params[i].cols()) {
      throw DimensionError("adam_step: gradient shape mismatch for " + params.name(i));
    }
    state.m[i] = b1 * state.m[i] + (Scalar(1) - b1) * g;
    state.v[i] = b2 * state.v[i] + (Scalar(1) - b2) * g.cwiseProduct(g);
    params[i].array() -= step * state.m[i].array() / ((state.v[i].array() * inv_c2).sqrt() + eps);
  }
}

// Scales gradients so their global L2 norm is at most max_norm. Returns the
// norm before scaling.
template <typename Scalar>
double clip_grad_norm(std::vector<Tensor<Scalar>>& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads) sq += static_cast<double>(g.squaredNorm());
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const auto s = static_cast<Scalar>(max_norm / norm);
    for (auto& g : grads) g *= s;
  }
  return norm;
}

}  // namespace sgpose
