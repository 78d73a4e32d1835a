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

#include "sgpose/model.hpp"

#include "json.hpp"
#include "sgpose/error.hpp"

namespace sgpose {

using nlohmann::json;
using ad::Axis;
using ad::Var;

void ModelConfig::validate() const {
  auto positive = [](const char* name, int v) {
    if (v < 1) throw ConfigError(std::string(name) + " must be >= 1, got " + std::to_string(v));
  };
  positive("obs_len", obs_len);
  positive("pred_len", pred_len);
  positive("embed_dim", embed_dim);
  positive("hidden_dim", hidden_dim);
  positive("latent_dim", latent_dim);
  positive("k_samples", k_samples);
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1), got " + std::to_string(dropout));
}

std::string config_to_json(const ModelConfig& c) {
  json j = {{"obs_len", c.obs_len},       {"pred_len", c.pred_len},     {"features", to_string(c.features)},
            {"pose_width", c.pose_dim()}, {"embed_dim", c.embed_dim},   {"hidden_dim", c.hidden_dim},
            {"latent_dim", c.latent_dim}, {"dropout", c.dropout},       {"k_samples", c.k_samples}};
  return j.dump();
}

ModelConfig config_from_json(const std::string& text) {
  ModelConfig c;
  try {
    const json j = json::parse(text);
    c.obs_len = j.at("obs_len").get<int>();
    c.pred_len = j.at("pred_len").get<int>();
    c.features = parse_feature_mode(j.at("features").get<std::string>());
    c.embed_dim = j.at("embed_dim").get<int>();
    c.hidden_dim = j.at("hidden_dim").get<int>();
    c.latent_dim = j.at("latent_dim").get<int>();
    c.dropout = j.at("dropout").get<double>();
    c.k_samples = j.at("k_samples").get<int>();
    if (j.contains("pose_width") && j.at("pose_width").get<int>() != c.pose_dim()) {
      throw ConfigError("pose_width " + std::to_string(j.at("pose_width").get<int>()) + " inconsistent with features " +
                        to_string(c.features));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

template <typename Scalar>
Attention make_attention(ParamStore<Scalar>& store, const std::string& name, int dim, Rng& rng) {
  Attention a;
  a.weight = store.add(name + ".weight", uniform_init<Scalar>(dim, 1, dim, rng));
  a.bias = store.add(name + ".bias", uniform_init<Scalar>(1, 1, dim, rng));
  return a;
}

template <typename Scalar>
ModelLayout build_layout(const ModelConfig& c, ParamStore<Scalar>& s, Rng& rng) {
  c.validate();
  const int e = c.embed_dim, h = c.hidden_dim, z = c.latent_dim;
  ModelLayout l;
  l.bbox_embed = Linear::create(s, "bbox_embed", 4, e, rng);
  l.enc_gru = GruParams::create(s, "enc_gru", 2 * e, h, rng);
  if (c.uses_pose()) {
    l.pose_embed = Linear::create(s, "pose_embed", c.pose_dim(), e, rng);
    l.pose_gru = GruParams::create(s, "pose_gru", e, h, rng);
  }
  l.target_embed = Linear::create(s, "target_embed", 4, e, rng);
  l.target_gru = GruParams::create(s, "target_gru", e, h, rng);
  l.recognition = Linear::create(s, "recognition", 2 * h, 2 * z, rng);
  l.prior = Linear::create(s, "prior", h, 2 * z, rng);
  l.generation = Linear::create(s, "generation", z + h, h, rng);
  if (c.uses_pose()) l.dec_init = Linear::create(s, "dec_init", 2 * h, h, rng);
  l.goal_regressor = Linear::create(s, "goal_regressor", h, 4 * c.pred_len, rng);
  l.goal_embed = Linear::create(s, "goal_embed", 4, e, rng);
  l.enc_attention = make_attention(s, "enc_attention", e, rng);
  l.dec_attention = make_attention(s, "dec_attention", e, rng);
  l.dec_input_embed = Linear::create(s, "dec_input_embed", 4, e, rng);
  l.dec_gru = GruParams::create(s, "dec_gru", 2 * e, h, rng);
  l.traj_regressor = Linear::create(s, "traj_regressor", h, 4, rng);
  return l;
}

template <typename Scalar>
Var<Scalar> relu_linear(ModelBinding<Scalar>& m, const Linear& l, Var<Scalar> x) {
  return ad::relu(l(m.params, x));
}

template <typename Scalar>
LatentGaussian<Scalar> split_gaussian(Var<Scalar> out, int d) {
  const auto bound = static_cast<Scalar>(kLogSigmaBound);
  return {ad::slice_cols(out, 0, d), ad::clamp(ad::slice_cols(out, d, d), -bound, bound)};
}

template <typename Scalar>
Var<Scalar> zeros(ad::Graph<Scalar>& g, Eigen::Index rows, Eigen::Index cols) {
  return g.constant(Tensor<Scalar>::Zero(rows, cols));
}

}  // namespace

template <typename Scalar>
Model<Scalar> create_model(const ModelConfig& config, Rng& rng) {
  Model<Scalar> m;
  m.config = config;
  m.layout = build_layout(config, m.params, rng);
  return m;
}

template <typename Scalar>
Model<Scalar> bind_model(const ModelConfig& config, ParamStore<Scalar> params) {
  Rng scratch(0);
  Model<Scalar> m = create_model<Scalar>(config, scratch);
  if (m.params.size() != params.size()) {
    throw ConfigError("parameter count " + std::to_string(params.size()) + " does not match config (" +
                      std::to_string(m.params.size()) + ")");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params.name(i) != m.params.name(i)) {
      throw ConfigError("parameter " + std::to_string(i) + " is " + params.name(i) + ", expected " + m.params.name(i));
    }
    if (params[i].rows() != m.params[i].rows() || params[i].cols() != m.params[i].cols()) {
      throw ConfigError("parameter " + params.name(i) + " has shape " + shape_string(params[i]) + ", expected " +
                        shape_string(m.params[i]));
    }
    if (!all_finite(params[i])) throw DataError("parameter " + params.name(i) + " is not finite");
  }
  m.params = std::move(params);
  return m;
}

template <typename Scalar>
Var<Scalar> embed_bbox(ModelBinding<Scalar>& m, Var<Scalar> x) {
  return relu_linear(m, m.layout.bbox_embed, x);
}

template <typename Scalar>
Var<Scalar> encoder_step(ModelBinding<Scalar>& m, Var<Scalar> h, Var<Scalar> x_e, Var<Scalar> x_tilde) {
  return gru_cell(m.params, m.layout.enc_gru, ad::concat<Scalar>({x_e, x_tilde}, Axis::kCols), h);
}

template <typename Scalar>
Var<Scalar> pose_encoder(ModelBinding<Scalar>& m, Var<Scalar> pose, Rng& rng, bool training) {
  const auto& c = m.config;
  if (!c.uses_pose()) throw UsageError("pose_encoder called in bbox-only mode");
  const int pw = c.pose_dim();
  if (pose.cols() != c.obs_len * pw) {
    throw DimensionError("pose_encoder: expected " + std::to_string(c.obs_len * pw) + " columns, got " +
                         shape_string(pose.value()));
  }
  Var<Scalar> h = zeros(m.graph(), pose.rows(), c.hidden_dim);
  for (int t = 0; t < c.obs_len; ++t) {
    auto x = relu_linear(m, m.layout.pose_embed, ad::slice_cols(pose, t * pw, pw));
    x = ad::dropout(x, c.dropout, rng, training);
    h = gru_cell(m.params, m.layout.pose_gru, x, h);
  }
  return h;
}

template <typename Scalar>
StepwiseGoals<Scalar> sge_predict(ModelBinding<Scalar>& m, Var<Scalar> h, int remaining) {
  const int n = m.config.pred_len;
  if (remaining < 1 || remaining > n) {
    throw DimensionError("sge_predict: remaining " + std::to_string(remaining) + " outside [1, " + std::to_string(n) + "]");
  }
  auto all = m.layout.goal_regressor(m.params, h);
  auto positions = remaining == n ? all : ad::slice_cols(all, 4 * (n - remaining), 4 * remaining);
  const Eigen::Index rows = h.rows();
  auto flat = ad::reshape(positions, rows * remaining, 4);
  auto emb = relu_linear(m, m.layout.goal_embed, flat);
  auto hiddens = ad::reshape(emb, rows, static_cast<Eigen::Index>(remaining) * m.config.embed_dim);
  return {positions, hiddens, remaining};
}

template <typename Scalar>
Var<Scalar> attention_scores(ModelBinding<Scalar>& m, const Attention& attn, Var<Scalar> hiddens, int count) {
  const int d = m.config.embed_dim;
  if (count < 1 || hiddens.cols() != static_cast<Eigen::Index>(count) * d) {
    throw DimensionError("attention: " + shape_string(hiddens.value()) + " does not hold " + std::to_string(count) +
                         " goals of width " + std::to_string(d));
  }
  const Eigen::Index rows = hiddens.rows();
  auto flat = ad::tanh(ad::reshape(hiddens, rows * count, d));
  auto u = ad::add_row(ad::matmul(flat, m.params[attn.weight]), m.params[attn.bias]);
  return ad::reshape(u, rows, count);
}

template <typename Scalar>
Aggregated<Scalar> goal_aggregate(ModelBinding<Scalar>& m, const Attention& attn, const StepwiseGoals<Scalar>& goals) {
  auto w = ad::softmax(attention_scores(m, attn, goals.hiddens, goals.count));
  return {ad::weighted_sum(w, goals.hiddens, m.config.embed_dim), w};
}

template <typename Scalar>
LatentGaussian<Scalar> cvae_recognition(ModelBinding<Scalar>& m, Var<Scalar> h_e, Var<Scalar> h_y) {
  return split_gaussian(m.layout.recognition(m.params, ad::concat<Scalar>({h_e, h_y}, Axis::kCols)),
                        m.config.latent_dim);
}

template <typename Scalar>
LatentGaussian<Scalar> cvae_prior(ModelBinding<Scalar>& m, Var<Scalar> h_e) {
  return split_gaussian(m.layout.prior(m.params, h_e), m.config.latent_dim);
}

template <typename Scalar>
Var<Scalar> target_encoder(ModelBinding<Scalar>& m, Var<Scalar> targets, bool training) {
  if (!training) throw UsageError("target_encoder is only available in training");
  const int n = m.config.pred_len;
  if (targets.cols() != 4 * n) {
    throw DimensionError("target_encoder: expected " + std::to_string(4 * n) + " columns, got " +
                         shape_string(targets.value()));
  }
  Var<Scalar> h = zeros(m.graph(), targets.rows(), m.config.hidden_dim);
  for (int t = 0; t < n; ++t) {
    auto x = relu_linear(m, m.layout.target_embed, ad::slice_cols(targets, 4 * t, 4));
    h = gru_cell(m.params, m.layout.target_gru, x, h);
  }
  return h;
}

template <typename Scalar>
Var<Scalar> sample_latent(const LatentGaussian<Scalar>& g, Rng& rng, bool deterministic) {
  if (deterministic) return g.mu;
  Tensor<Scalar> eps(g.mu.rows(), g.mu.cols());
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = static_cast<Scalar>(rng.normal());
  auto& graph = g.mu.graph();
  return ad::add(g.mu, ad::mul(ad::exp(g.log_sigma), graph.constant(std::move(eps))));
}

template <typename Scalar>
ForwardInput<Scalar> forward_input(const Batch& batch, bool with_targets) {
  ForwardInput<Scalar> in;
  in.boxes = batch.boxes.cast<Scalar>();
  in.pose = batch.pose.cast<Scalar>();
  if (with_targets) in.targets = batch.targets.cast<Scalar>();
  return in;
}

template <typename Scalar>
ForwardOutput<Scalar> forward(ModelBinding<Scalar>& m, const ForwardInput<Scalar>& input, Mode mode, Rng& rng,
                              const ForwardOptions& options) {
  const ModelConfig& c = m.config;
  const bool training = mode == Mode::kTrain;
  const Eigen::Index B = input.boxes.rows();
  const int K = options.k;
  const int n = c.pred_len;
  const int d = c.embed_dim;
  if (K < 1) throw UsageError("forward: K must be >= 1");
  if (B < 1) throw DimensionError("forward: empty batch");
  if (input.boxes.cols() != 4 * c.obs_len) {
    throw DimensionError("forward: boxes " + shape_string(input.boxes) + " do not match obs_len " +
                         std::to_string(c.obs_len));
  }
  if (c.uses_pose() && (input.pose.rows() != B || input.pose.cols() != c.obs_len * c.pose_dim())) {
    throw DimensionError("forward: pose " + shape_string(input.pose) + " does not match " + to_string(c.features));
  }
  if (training && !input.targets) throw UsageError("forward: train mode needs targets");
  if (input.targets && (input.targets->rows() != B || input.targets->cols() != 4 * n)) {
    throw DimensionError("forward: targets " + shape_string(*input.targets) + " do not match pred_len " +
                         std::to_string(n));
  }

  auto& g = m.graph();
  ForwardOutput<Scalar> out;
  out.batch = static_cast<int>(B);
  out.k = K;

  // Box encoder with per-step goal feedback.
  auto boxes = g.constant(input.boxes);
  Var<Scalar> h = zeros(g, B, c.hidden_dim);
  Var<Scalar> x_tilde = zeros(g, B, d);
  StepwiseGoals<Scalar> goals;
  for (int t = 0; t < c.obs_len; ++t) {
    h = encoder_step(m, h, embed_bbox(m, ad::slice_cols(boxes, 4 * t, 4)), x_tilde);
    goals = sge_predict(m, h, n);
    x_tilde = goal_aggregate(m, m.layout.enc_attention, goals).context;
    out.encoder_goals.push_back(goals.positions);
  }
  const Var<Scalar> h_e = h;

  std::optional<Var<Scalar>> h_pose;
  if (c.uses_pose()) h_pose = pose_encoder(m, g.constant(input.pose), rng, training);

  // Latent: recognition net in training, prior otherwise.
  out.p = cvae_prior(m, h_e);
  LatentGaussian<Scalar> source = out.p;
  if (training) {
    out.q = cvae_recognition(m, h_e, target_encoder(m, g.constant(*input.targets), true));
    source = *out.q;
  }
  const LatentGaussian<Scalar> repeated{ad::repeat_rows(source.mu, K), ad::repeat_rows(source.log_sigma, K)};
  auto z = sample_latent(repeated, rng, options.deterministic_latent);
  auto h_e_k = ad::repeat_rows(h_e, K);
  Var<Scalar> h_d = m.layout.generation(m.params, ad::concat<Scalar>({z, h_e_k}, Axis::kCols));
  if (h_pose) h_d = m.layout.dec_init(m.params, ad::concat<Scalar>({h_d, ad::repeat_rows(*h_pose, K)}, Axis::kCols));

  // Decoder over the goals of the last encoder step; step i sees goals i..n-1.
  auto scores = ad::repeat_rows(attention_scores(m, m.layout.dec_attention, goals.hiddens, n), K);
  auto goal_hiddens = ad::repeat_rows(goals.hiddens, K);
  Var<Scalar> prev = ad::repeat_rows(ad::slice_cols(boxes, 4 * (c.obs_len - 1), 4), K);
  std::vector<Var<Scalar>> steps;
  steps.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int remaining = n - i;
    auto w = ad::softmax(ad::slice_cols(scores, i, remaining));
    auto ctx = ad::weighted_sum(w, ad::slice_cols(goal_hiddens, static_cast<Eigen::Index>(i) * d,
                                                  static_cast<Eigen::Index>(remaining) * d), d);
    auto x = relu_linear(m, m.layout.dec_input_embed, prev);
    h_d = gru_cell(m.params, m.layout.dec_gru, ad::concat<Scalar>({x, ctx}, Axis::kCols), h_d);
    prev = m.layout.traj_regressor(m.params, h_d);
    steps.push_back(prev);
    out.decoder_attention.push_back(w.value());
    out.decoder_goal_counts.push_back(remaining);
  }
  out.predictions = ad::concat(steps, Axis::kCols);
  return out;
}

#define SGPOSE_INSTANTIATE(S)                                                                                     \
  template Model<S> create_model<S>(const ModelConfig&, Rng&);                                                   \
  template Model<S> bind_model<S>(const ModelConfig&, ParamStore<S>);                                            \
  template Var<S> embed_bbox<S>(ModelBinding<S>&, Var<S>);                                                       \
  template Var<S> encoder_step<S>(ModelBinding<S>&, Var<S>, Var<S>, Var<S>);                                     \
  template Var<S> pose_encoder<S>(ModelBinding<S>&, Var<S>, Rng&, bool);                                         \
  template StepwiseGoals<S> sge_predict<S>(ModelBinding<S>&, Var<S>, int);                                       \
  template Var<S> attention_scores<S>(ModelBinding<S>&, const Attention&, Var<S>, int);                          \
  template Aggregated<S> goal_aggregate<S>(ModelBinding<S>&, const Attention&, const StepwiseGoals<S>&);         \
  template LatentGaussian<S> cvae_recognition<S>(ModelBinding<S>&, Var<S>, Var<S>);                              \
  template LatentGaussian<S> cvae_prior<S>(ModelBinding<S>&, Var<S>);                                            \
  template Var<S> target_encoder<S>(ModelBinding<S>&, Var<S>, bool);                                             \
  template Var<S> sample_latent<S>(const LatentGaussian<S>&, Rng&, bool);                                        \
  template ForwardInput<S> forward_input<S>(const Batch&, bool);                                                 \
  template ForwardOutput<S> forward<S>(ModelBinding<S>&, const ForwardInput<S>&, Mode, Rng&, const ForwardOptions&);

SGPOSE_INSTANTIATE(float)
SGPOSE_INSTANTIATE(double)

#undef SGPOSE_INSTANTIATE

}  // namespace sgpose
