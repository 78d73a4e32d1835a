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

#include "sgpose/train_eval.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "sgpose/error.hpp"

namespace sgpose {

using ad::Axis;
using ad::Var;

// ---------------------------------------------------------------------------
// Loss

template <typename Scalar>
Var<Scalar> best_of_k_rmse(Var<Scalar> predictions, Var<Scalar> targets, int k) {
  if (k < 1) throw UsageError("best-of-K loss needs K >= 1");
  if (predictions.rows() != targets.rows() * k || predictions.cols() != targets.cols()) {
    throw DimensionError("best_of_k_rmse: predictions " + shape_string(predictions.value()) + " vs targets " +
                         shape_string(targets.value()) + " at K=" + std::to_string(k));
  }
  auto sq = ad::square(ad::sub(predictions, ad::repeat_rows(targets, k)));
  auto rmse = ad::sqrt(ad::scale(ad::row_sum(sq), Scalar(1) / static_cast<Scalar>(targets.cols())));
  return ad::mean(ad::row_min(ad::reshape(rmse, targets.rows(), k)));
}

template <typename Scalar>
Var<Scalar> kl_divergence(const LatentGaussian<Scalar>& q, const LatentGaussian<Scalar>& p) {
  // log sp - log sq + (sq^2 + (mq - mp)^2) / (2 sp^2) - 1/2
  auto ratio = ad::mul(ad::add(ad::exp(ad::scale(q.log_sigma, Scalar(2))), ad::square(ad::sub(q.mu, p.mu))),
                       ad::exp(ad::scale(p.log_sigma, Scalar(-2))));
  auto per_dim = ad::add_scalar(ad::add(ad::sub(p.log_sigma, q.log_sigma), ad::scale(ratio, Scalar(0.5))),
                                Scalar(-0.5));
  return ad::row_sum(per_dim);
}

template <typename Scalar>
Var<Scalar> goal_loss(const std::vector<Var<Scalar>>& encoder_goals, Var<Scalar> observed, Var<Scalar> targets) {
  if (encoder_goals.empty()) throw UsageError("goal_loss: no encoder goals");
  const Eigen::Index width = targets.cols();
  auto all = ad::concat<Scalar>({observed, targets}, Axis::kCols);
  std::vector<Var<Scalar>> sums;
  for (std::size_t t = 0; t < encoder_goals.size(); ++t) {
    const Eigen::Index start = 4 * static_cast<Eigen::Index>(t + 1);
    if (encoder_goals[t].cols() != width || start + width > all.cols()) {
      throw DimensionError("goal_loss: goals " + shape_string(encoder_goals[t].value()) + " at step " +
                           std::to_string(t) + " do not fit the ground truth");
    }
    sums.push_back(ad::sum(ad::square(ad::sub(encoder_goals[t], ad::slice_cols(all, start, width)))));
  }
  const auto count = static_cast<Scalar>(encoder_goals.size()) * static_cast<Scalar>(targets.value().size());
  return ad::scale(ad::sum(ad::concat(sums, Axis::kCols)), Scalar(1) / count);
}

template <typename Scalar>
LossTerms<Scalar> compute_loss(const ForwardOutput<Scalar>& out, Var<Scalar> observed, Var<Scalar> targets,
                               const LossWeights& weights) {
  if (out.k < 1) throw UsageError("compute_loss: K must be >= 1");
  auto& g = targets.graph();
  LossTerms<Scalar> t;
  t.trajectory = best_of_k_rmse(out.predictions, targets, out.k);
  t.goal = out.encoder_goals.empty() ? g.constant(Tensor<Scalar>::Zero(1, 1))
                                     : goal_loss(out.encoder_goals, observed, targets);
  t.kl = out.q ? ad::mean(kl_divergence(*out.q, out.p)) : g.constant(Tensor<Scalar>::Zero(1, 1));
  t.total = ad::add(t.trajectory, ad::add(ad::scale(t.goal, static_cast<Scalar>(weights.goal)),
                                          ad::scale(t.kl, static_cast<Scalar>(weights.kl))));
  return t;
}

#define SGPOSE_INSTANTIATE(S)                                                                      \
  template Var<S> best_of_k_rmse<S>(Var<S>, Var<S>, int);                                          \
  template Var<S> kl_divergence<S>(const LatentGaussian<S>&, const LatentGaussian<S>&);            \
  template Var<S> goal_loss<S>(const std::vector<Var<S>>&, Var<S>, Var<S>);                        \
  template LossTerms<S> compute_loss<S>(const ForwardOutput<S>&, Var<S>, Var<S>, const LossWeights&);

SGPOSE_INSTANTIATE(float)
SGPOSE_INSTANTIATE(double)

#undef SGPOSE_INSTANTIATE

// ---------------------------------------------------------------------------
// Metrics

std::string to_string(CornerPoint c) { return c == CornerPoint::kTopLeft ? "top_left" : "centroid"; }

CornerPoint parse_corner(const std::string& s) {
  if (s == "top_left") return CornerPoint::kTopLeft;
  if (s == "centroid") return CornerPoint::kCentroid;
  throw ConfigError("unknown corner point '" + s + "' (expected top_left or centroid)");
}

namespace {

bool same(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

std::array<double, 2> corner_of(const BoundingBox& b, CornerPoint c) {
  if (c == CornerPoint::kTopLeft) return {b.x_min, b.y_min};
  return {b.center_x(), b.center_y()};
}

}  // namespace

bool MetricsReport::operator==(const MetricsReport& o) const {
  return same(mse15, o.mse15) && same(mse30, o.mse30) && same(mse45, o.mse45) && same(fmse, o.fmse) &&
         same(cmse, o.cmse) && same(cfmse, o.cfmse) && same(full_mse, o.full_mse) && samples == o.samples &&
         pred_len == o.pred_len && corner == o.corner && config_hash == o.config_hash;
}

MetricAccumulator::MetricAccumulator(int pred_len, CornerPoint corner)
    : pred_len_(pred_len), corner_(corner), box_sq_(static_cast<std::size_t>(pred_len), 0.0),
      corner_sq_(static_cast<std::size_t>(pred_len), 0.0) {
  if (pred_len < 1) throw ConfigError("metrics need pred_len >= 1");
}

void MetricAccumulator::add(const std::vector<BoundingBox>& predicted, const std::vector<BoundingBox>& truth) {
  if (static_cast<int>(predicted.size()) != pred_len_ || static_cast<int>(truth.size()) != pred_len_) {
    throw DimensionError("metrics: expected " + std::to_string(pred_len_) + " frames, got " +
                         std::to_string(predicted.size()) + " predicted and " + std::to_string(truth.size()) +
                         " ground truth");
  }
  for (std::size_t t = 0; t < predicted.size(); ++t) {
    const auto& p = predicted[t];
    const auto& y = truth[t];
    const double dx0 = p.x_min - y.x_min, dy0 = p.y_min - y.y_min, dx1 = p.x_max - y.x_max, dy1 = p.y_max - y.y_max;
    box_sq_[t] += (dx0 * dx0 + dy0 * dy0 + dx1 * dx1 + dy1 * dy1) / 4.0;
    const auto cp = corner_of(p, corner_), cy = corner_of(y, corner_);
    const double cx = cp[0] - cy[0], cyd = cp[1] - cy[1];
    corner_sq_[t] += (cx * cx + cyd * cyd) / 2.0;
  }
  ++samples_;
}

MetricsReport MetricAccumulator::report() const {
  MetricsReport r;
  r.samples = samples_;
  r.pred_len = pred_len_;
  r.corner = corner_;
  if (samples_ == 0) return r;
  const double n = samples_;
  auto horizon = [&](int k) {
    if (k > pred_len_) return kNaN;
    double s = 0.0;
    for (int t = 0; t < k; ++t) s += box_sq_[static_cast<std::size_t>(t)];
    return s / (n * k);
  };
  r.mse15 = horizon(15);
  r.mse30 = horizon(30);
  r.mse45 = horizon(45);
  r.full_mse = horizon(pred_len_);
  r.fmse = box_sq_.back() / n;
  double c = 0.0;
  for (double v : corner_sq_) c += v;
  r.cmse = c / (n * pred_len_);
  r.cfmse = corner_sq_.back() / n;
  return r;
}

double box_mse(const std::vector<BoundingBox>& a, const std::vector<BoundingBox>& b) {
  if (a.size() != b.size() || a.empty()) throw DimensionError("box_mse: sequences differ in length or are empty");
  double s = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    const double d[4] = {a[t].x_min - b[t].x_min, a[t].y_min - b[t].y_min, a[t].x_max - b[t].x_max,
                         a[t].y_max - b[t].y_max};
    for (double v : d) s += v * v;
  }
  return s / (4.0 * static_cast<double>(a.size()));
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string metrics_csv(const MetricsReport& r, const std::string& split) {
  std::ostringstream out;
  out << "metric,value,unit,split,config_hash\n";
  const std::string corner_unit = "px^2/" + to_string(r.corner);
  const std::vector<std::tuple<const char*, double, std::string>> rows = {
      {"mse_15", r.mse15, "px^2"}, {"mse_30", r.mse30, "px^2"}, {"mse_45", r.mse45, "px^2"},
      {"fmse", r.fmse, "px^2"},    {"cmse", r.cmse, corner_unit}, {"cfmse", r.cfmse, corner_unit}};
  for (const auto& [name, value, unit] : rows) {
    if (std::isnan(value)) continue;
    out << name << ',' << format_number(value) << ',' << unit << ',' << split << ',' << r.config_hash << '\n';
  }
  out << "samples," << r.samples << ",count," << split << ',' << r.config_hash << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Prediction and evaluation

namespace {

void check_lengths(const ModelConfig& c, const std::vector<TrajectorySample>& samples, bool need_future) {
  for (const auto& s : samples) {
    if (s.obs_len() != c.obs_len || (need_future && s.pred_len() != c.pred_len)) {
      throw ConfigError("dataset windows are " + std::to_string(s.obs_len()) + "+" + std::to_string(s.pred_len()) +
                        " frames but the model expects " + std::to_string(c.obs_len) + "+" +
                        std::to_string(c.pred_len));
    }
  }
}

}  // namespace

std::vector<std::vector<std::vector<BoundingBox>>> predict_samples(const Model<float>& model,
                                                                   const std::vector<TrajectorySample>& samples,
                                                                   const PredictOptions& options) {
  const ModelConfig& c = model.config;
  check_lengths(c, samples, false);
  if (options.k < 1) throw UsageError("predict: K must be >= 1");
  Rng rng(options.seed);
  std::vector<std::vector<std::vector<BoundingBox>>> out(samples.size());
  for (const auto& idx : batch_indices(samples.size(), options.batch_size, rng, false)) {
    const Batch batch = make_batch(samples, idx, c.features);
    ad::Graph<float> g;
    ModelBinding<float> m(model, g);
    const auto fwd = forward(m, forward_input<float>(batch, false), Mode::kInfer, rng,
                             {.k = options.k, .deterministic_latent = options.deterministic_latent});
    const TensorF& pred = fwd.predictions.value();
    for (std::size_t b = 0; b < idx.size(); ++b) {
      auto& cands = out[idx[b]];
      cands.resize(static_cast<std::size_t>(options.k));
      for (int k = 0; k < options.k; ++k) {
        const Eigen::Index row = static_cast<Eigen::Index>(b) * options.k + k;
        auto& seq = cands[static_cast<std::size_t>(k)];
        for (int t = 0; t < c.pred_len; ++t) {
          std::array<double, 4> v{};
          for (int j = 0; j < 4; ++j) v[static_cast<std::size_t>(j)] = pred(row, 4 * t + j);
          seq.push_back(denormalize_box(v, batch.frame_width[b], batch.frame_height[b]));
        }
      }
    }
  }
  return out;
}

std::size_t best_candidate(const std::vector<std::vector<BoundingBox>>& candidates,
                           const std::vector<BoundingBox>& truth) {
  if (candidates.empty()) throw UsageError("best_candidate: no candidates");
  std::size_t best = 0;
  double best_mse = box_mse(candidates[0], truth);
  for (std::size_t k = 1; k < candidates.size(); ++k) {
    const double v = box_mse(candidates[k], truth);
    if (v < best_mse) {
      best_mse = v;
      best = k;
    }
  }
  return best;
}

MetricsReport evaluate(const Model<float>& model, const std::vector<TrajectorySample>& samples,
                       const PredictOptions& options, CornerPoint corner) {
  if (samples.empty()) throw DataError("evaluate: the split has no samples");
  check_lengths(model.config, samples, true);
  const auto preds = predict_samples(model, samples, options);
  MetricAccumulator acc(model.config.pred_len, corner);
  for (std::size_t s = 0; s < samples.size(); ++s) {
    acc.add(preds[s][best_candidate(preds[s], samples[s].future_boxes)], samples[s].future_boxes);
  }
  return acc.report();
}

// ---------------------------------------------------------------------------
// Training

double kl_weight(const TrainOptions& o, int epoch) {
  if (o.kl_warmup_epochs <= 0) return o.weights.kl;
  return o.weights.kl * std::min(1.0, static_cast<double>(epoch) / o.kl_warmup_epochs);
}

double learning_rate(const TrainOptions& o, int epoch) {
  if (o.epochs <= 1 || o.lr_final_fraction == 1.0) return o.lr;
  const double progress = static_cast<double>(epoch - 1) / static_cast<double>(o.epochs - 1);
  const double f = o.lr_final_fraction;
  return o.lr * (f + (1.0 - f) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));
}

TrainResult train(const ModelConfig& config, const std::vector<TrajectorySample>& train_set,
                  const std::vector<TrajectorySample>& val_set, const TrainOptions& options, std::ostream* log) {
  config.validate();
  if (options.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (options.batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (options.train_k < 1) throw ConfigError("training K must be >= 1");
  if (!(options.lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(options.lr_final_fraction >= 0.0 && options.lr_final_fraction <= 1.0)) {
    throw ConfigError("final learning-rate fraction must lie in [0, 1]");
  }
  check_lengths(config, train_set, true);
  check_lengths(config, val_set, true);
  if (options.epochs > 0 && train_set.empty()) throw DataError("train: the training split has no samples");

  Rng root(options.seed);
  Rng init = root.fork();
  Rng order = root.fork();
  Rng noise = root.fork();

  TrainResult result;
  Model<float> model = create_model<float>(config, init);
  result.model = model;
  auto state = AdamState<float>::zeros_like(model.params);
  AdamOptions adam;
  adam.lr = options.lr;
  int since_best = 0;

  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    LossWeights w = options.weights;
    w.kl = kl_weight(options, epoch);
    adam.lr = learning_rate(options, epoch);
    EpochRecord rec;
    rec.epoch = epoch;
    for (const auto& idx : batch_indices(train_set.size(), options.batch_size, order, true)) {
      const Batch batch = make_batch(train_set, idx, config.features);
      ad::Graph<float> g;
      ModelBinding<float> m(model, g);
      const auto in = forward_input<float>(batch, true);
      const auto out = forward(m, in, Mode::kTrain, noise, {.k = options.train_k, .deterministic_latent = false});
      const auto terms = compute_loss(out, g.constant(in.boxes), g.constant(*in.targets), w);
      const auto v = values(terms);
      if (!std::isfinite(v.total)) throw Error("training diverged at epoch " + std::to_string(epoch));
      g.backward(terms.total);
      auto grads = m.params.gradients();
      clip_grad_norm(grads, options.clip_norm);
      adam_step(model.params, grads, state, adam);
      const double share = static_cast<double>(idx.size()) / static_cast<double>(train_set.size());
      rec.train_total += share * v.total;
      rec.train_traj += share * v.trajectory;
      rec.train_goal += share * v.goal;
      rec.train_kl += share * v.kl;
    }

    bool improved = false;
    if (val_set.empty()) {
      result.model = model;
      result.best_epoch = epoch;
    } else {
      PredictOptions po;
      po.k = 1;
      po.deterministic_latent = true;
      po.batch_size = options.eval_batch_size;
      po.seed = options.seed;
      rec.val_mse45 = evaluate(model, val_set, po).full_mse;
      if (std::isfinite(rec.val_mse45) && (std::isnan(result.best_val) || rec.val_mse45 < result.best_val)) {
        result.best_val = rec.val_mse45;
        result.best_epoch = epoch;
        result.model = model;
        improved = true;
      }
    }
    result.curve.push_back(rec);
    if (log) {
      *log << "epoch " << epoch << " total " << format_number(rec.train_total) << " traj "
           << format_number(rec.train_traj) << " goal " << format_number(rec.train_goal) << " kl "
           << format_number(rec.train_kl) << " val_mse " << format_number(rec.val_mse45) << (improved ? " *" : "")
           << '\n';
    }
    if (!val_set.empty()) {
      since_best = improved ? 0 : since_best + 1;
      if (options.patience > 0 && since_best >= options.patience) break;
    }
  }
  return result;
}

std::string curve_csv(const std::vector<EpochRecord>& curve) {
  std::ostringstream out;
  out << "epoch,train_total,train_traj,train_goal,train_kl,val_mse45\n";
  for (const auto& r : curve) {
    out << r.epoch << ',' << format_number(r.train_total) << ',' << format_number(r.train_traj) << ','
        << format_number(r.train_goal) << ',' << format_number(r.train_kl) << ',' << format_number(r.val_mse45)
        << '\n';
  }
  return out.str();
}

std::string run_hash(const ModelConfig& config, const TrainOptions& o, const std::string& dataset_hash) {
  const nlohmann::json j = {{"model", nlohmann::json::parse(config_to_json(config))},
                            {"epochs", o.epochs},
                            {"batch_size", o.batch_size},
                            {"lr", o.lr},
                            {"lr_final_fraction", o.lr_final_fraction},
                            {"seed", o.seed},
                            {"goal_weight", o.weights.goal},
                            {"kl_weight", o.weights.kl},
                            {"kl_warmup_epochs", o.kl_warmup_epochs},
                            {"patience", o.patience},
                            {"train_k", o.train_k},
                            {"clip_norm", o.clip_norm},
                            {"dataset", dataset_hash}};
  return fnv1a_hex(j.dump());
}

// ---------------------------------------------------------------------------
// Ablation

std::vector<AblationRow> ablation_run(const std::filesystem::path& dataset_dir, const AblationOptions& options,
                                      std::ostream* log) {
  if (options.modes.empty()) throw ConfigError("ablation needs at least one feature mode");
  if (options.seeds.empty()) throw ConfigError("ablation needs at least one seed");
  const DatasetManifest manifest = read_manifest(dataset_dir);
  const auto train_set = read_split(dataset_dir, Split::kTrain);
  const auto val_set = read_split(dataset_dir, Split::kVal);
  const auto test_set = read_split(dataset_dir, Split::kTest);
  std::vector<AblationRow> rows;
  for (FeatureMode mode : options.modes) {
    AblationRow row;
    row.features = mode;
    ModelConfig cfg = options.base;
    cfg.features = mode;
    cfg.obs_len = manifest.obs_len;
    cfg.pred_len = manifest.pred_len;
    for (std::uint64_t seed : options.seeds) {
      TrainOptions to = options.train;
      to.seed = seed;
      const auto trained = train(cfg, train_set, val_set, to);
      PredictOptions po = options.eval;
      po.seed = seed;
      MetricsReport rep = evaluate(trained.model, test_set, po, options.corner);
      rep.config_hash = run_hash(cfg, to, manifest.config_hash);
      if (log) {
        *log << to_string(mode) << " seed " << seed << " best_epoch " << trained.best_epoch << " test mse_45 "
             << format_number(rep.mse45) << " full " << format_number(rep.full_mse) << '\n';
      }
      row.runs.push_back(rep);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  using Getter = double (*)(const MetricsReport&);
  const std::vector<std::pair<const char*, Getter>> metrics = {
      {"mse_15", [](const MetricsReport& r) { return r.mse15; }},
      {"mse_30", [](const MetricsReport& r) { return r.mse30; }},
      {"mse_45", [](const MetricsReport& r) { return r.mse45; }},
      {"fmse", [](const MetricsReport& r) { return r.fmse; }},
      {"cmse", [](const MetricsReport& r) { return r.cmse; }},
      {"cfmse", [](const MetricsReport& r) { return r.cfmse; }}};
  std::ostringstream out;
  out << "features,seeds";
  for (const auto& [name, get] : metrics) out << ',' << name << "_mean," << name << "_std";
  out << '\n';
  for (const auto& row : rows) {
    out << to_string(row.features) << ',' << row.runs.size();
    for (const auto& [name, get] : metrics) {
      double mean = 0.0;
      for (const auto& r : row.runs) mean += get(r);
      mean /= static_cast<double>(row.runs.size());
      double var = 0.0;
      for (const auto& r : row.runs) var += (get(r) - mean) * (get(r) - mean);
      const double sd = row.runs.size() > 1 ? std::sqrt(var / static_cast<double>(row.runs.size() - 1)) : 0.0;
      out << ',' << format_number(mean) << ',' << format_number(sd);
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace sgpose
