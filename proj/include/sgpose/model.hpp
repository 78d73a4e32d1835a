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

#include <optional>
#include <string>
#include <vector>

#include "sgpose/autodiff.hpp"
#include "sgpose/dataset.hpp"
#include "sgpose/params.hpp"
#include "sgpose/rng.hpp"
#include "sgpose/tensor.hpp"

namespace sgpose {

struct ModelConfig {
  int obs_len = 15;
  int pred_len = 45;
  FeatureMode features = FeatureMode::kBoxPose;
  int embed_dim = 32;
  int hidden_dim = 64;
  int latent_dim = 16;
  double dropout = 0.1;
  int k_samples = 20;

  int pose_dim() const { return pose_width(features); }
  bool uses_pose() const { return features != FeatureMode::kBox; }
  // Throws ConfigError on any non-positive dimension or bad dropout rate.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

std::string config_to_json(const ModelConfig& c);
ModelConfig config_from_json(const std::string& text);

// Single-layer attention scorer u = W^T tanh(h) + b over goal hiddens.
struct Attention {
  int weight = -1;  // [embed x 1]
  int bias = -1;    // [1 x 1]
};

// Parameter indices into the model's ParamStore. Pose-only entries are -1 in
// bbox-only mode.
struct ModelLayout {
  Linear bbox_embed;
  GruParams enc_gru;
  Linear pose_embed;
  GruParams pose_gru;
  Linear target_embed;
  GruParams target_gru;
  Linear recognition;
  Linear prior;
  Linear generation;
  Linear dec_init;
  Linear goal_regressor;
  Linear goal_embed;
  Attention enc_attention;
  Attention dec_attention;
  Linear dec_input_embed;
  GruParams dec_gru;
  Linear traj_regressor;
};

template <typename Scalar>
struct Model {
  ModelConfig config;
  ModelLayout layout;
  ParamStore<Scalar> params;
};

template <typename Scalar>
Model<Scalar> create_model(const ModelConfig& config, Rng& rng);

// Rebuilds the layout for `config` on top of an existing store (e.g. a cast
// or a loaded checkpoint). Throws ConfigError if names or shapes disagree.
template <typename Scalar>
Model<Scalar> bind_model(const ModelConfig& config, ParamStore<Scalar> params);

// A model's parameters bound into one autodiff graph.
template <typename Scalar>
struct ModelBinding {
  ModelBinding(const Model<Scalar>& model, ad::Graph<Scalar>& graph)
      : config(model.config), layout(model.layout), params(graph, model.params) {}

  ad::Graph<Scalar>& graph() { return params.graph(); }

  const ModelConfig& config;
  const ModelLayout& layout;
  ParamBinding<Scalar> params;
};

template <typename Scalar>
struct LatentGaussian {
  ad::Var<Scalar> mu;         // [B x d_z]
  ad::Var<Scalar> log_sigma;  // [B x d_z], clamped to [-8, 8]
};

template <typename Scalar>
struct StepwiseGoals {
  ad::Var<Scalar> positions;  // [B x S*4], normalised boxes
  ad::Var<Scalar> hiddens;    // [B x S*d_e]
  int count = 0;
};

template <typename Scalar>
struct Aggregated {
  ad::Var<Scalar> context;  // [B x d_e]
  ad::Var<Scalar> weights;  // [B x S]
};

constexpr double kLogSigmaBound = 8.0;

// x: [B x 4] -> [B x d_e]
template <typename Scalar>
ad::Var<Scalar> embed_bbox(ModelBinding<Scalar>& m, ad::Var<Scalar> x);

// h' = gru(concat(x_e, x_tilde), h)
template <typename Scalar>
ad::Var<Scalar> encoder_step(ModelBinding<Scalar>& m, ad::Var<Scalar> h, ad::Var<Scalar> x_e,
                             ad::Var<Scalar> x_tilde);

// pose: [B x L_o*pose_dim] -> final hidden [B x d_h]. UsageError in bbox-only mode.
template <typename Scalar>
ad::Var<Scalar> pose_encoder(ModelBinding<Scalar>& m, ad::Var<Scalar> pose, Rng& rng, bool training);

// The last `remaining` of the pred_len goals regressed from h.
template <typename Scalar>
StepwiseGoals<Scalar> sge_predict(ModelBinding<Scalar>& m, ad::Var<Scalar> h, int remaining);

// Raw attention scores [B x S] for the goal hiddens.
template <typename Scalar>
ad::Var<Scalar> attention_scores(ModelBinding<Scalar>& m, const Attention& attn, ad::Var<Scalar> hiddens, int count);

template <typename Scalar>
Aggregated<Scalar> goal_aggregate(ModelBinding<Scalar>& m, const Attention& attn, const StepwiseGoals<Scalar>& goals);

template <typename Scalar>
LatentGaussian<Scalar> cvae_recognition(ModelBinding<Scalar>& m, ad::Var<Scalar> h_e, ad::Var<Scalar> h_y);

template <typename Scalar>
LatentGaussian<Scalar> cvae_prior(ModelBinding<Scalar>& m, ad::Var<Scalar> h_e);

// targets: [B x pred_len*4] -> [B x d_h]. UsageError unless training.
template <typename Scalar>
ad::Var<Scalar> target_encoder(ModelBinding<Scalar>& m, ad::Var<Scalar> targets, bool training);

// z = mu + sigma * eps with eps ~ N(0, I); eps = 0 when deterministic.
template <typename Scalar>
ad::Var<Scalar> sample_latent(const LatentGaussian<Scalar>& g, Rng& rng, bool deterministic);

enum class Mode { kTrain, kInfer };

template <typename Scalar>
struct ForwardInput {
  Tensor<Scalar> boxes;                   // [B x L_o*4]
  Tensor<Scalar> pose;                    // [B x L_o*pose_dim], empty in bbox-only mode
  std::optional<Tensor<Scalar>> targets;  // [B x pred_len*4]
};

template <typename Scalar>
ForwardInput<Scalar> forward_input(const Batch& batch, bool with_targets);

struct ForwardOptions {
  int k = 1;
  bool deterministic_latent = false;
};

template <typename Scalar>
struct ForwardOutput {
  ad::Var<Scalar> predictions;                 // [B*K x pred_len*4], row b*K + k
  std::vector<ad::Var<Scalar>> encoder_goals;  // per encoder step, [B x pred_len*4]
  std::optional<LatentGaussian<Scalar>> q;     // train mode only
  LatentGaussian<Scalar> p;
  std::vector<Tensor<Scalar>> decoder_attention;  // per decoder step i, [B*K x pred_len - i]
  std::vector<int> decoder_goal_counts;
  int batch = 0;
  int k = 0;
};

template <typename Scalar>
ForwardOutput<Scalar> forward(ModelBinding<Scalar>& m, const ForwardInput<Scalar>& input, Mode mode, Rng& rng,
                              const ForwardOptions& options);

}  // namespace sgpose
