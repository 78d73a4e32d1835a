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

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "sgpose/adam.hpp"
#include "sgpose/dataset.hpp"
#include "sgpose/model.hpp"

namespace sgpose {

// ---------------------------------------------------------------------------
// Loss

struct LossWeights {
  double goal = 1.0;
  double kl = 1.0;
};

template <typename Scalar>
struct LossTerms {
  ad::Var<Scalar> total;
  ad::Var<Scalar> trajectory;
  ad::Var<Scalar> goal;
  ad::Var<Scalar> kl;
};

struct LossBreakdown {
  double total = 0.0;
  double trajectory = 0.0;
  double goal = 0.0;
  double kl = 0.0;
};

// Per-row RMSE of predictions [B*K x n] against targets [B x n] (row b*K+k
// pairs with row b), then the minimum over k and the mean over b.
template <typename Scalar>
ad::Var<Scalar> best_of_k_rmse(ad::Var<Scalar> predictions, ad::Var<Scalar> targets, int k);

// Closed-form KL(q || p) for diagonal Gaussians, summed over latent dims: [B x 1].
template <typename Scalar>
ad::Var<Scalar> kl_divergence(const LatentGaussian<Scalar>& q, const LatentGaussian<Scalar>& p);

// Goal term: MSE of each encoder step's goals against the boxes that follow
// that step. observed: [B x L_o*4], targets: [B x n*4].
template <typename Scalar>
ad::Var<Scalar> goal_loss(const std::vector<ad::Var<Scalar>>& encoder_goals, ad::Var<Scalar> observed,
                          ad::Var<Scalar> targets);

// trajectory + w.goal * goal + w.kl * kl. KL is 0 without a recognition
// distribution. Throws UsageError when K < 1.
template <typename Scalar>
LossTerms<Scalar> compute_loss(const ForwardOutput<Scalar>& out, ad::Var<Scalar> observed, ad::Var<Scalar> targets,
                               const LossWeights& weights);

template <typename Scalar>
LossBreakdown values(const LossTerms<Scalar>& t) {
  return {static_cast<double>(t.total.value()(0, 0)), static_cast<double>(t.trajectory.value()(0, 0)),
          static_cast<double>(t.goal.value()(0, 0)), static_cast<double>(t.kl.value()(0, 0))};
}

// ---------------------------------------------------------------------------
// Metrics

enum class CornerPoint { kTopLeft, kCentroid };
std::string to_string(CornerPoint c);
CornerPoint parse_corner(const std::string& s);

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct MetricsReport {
  double mse15 = kNaN;  // NaN when the horizon exceeds pred_len
  double mse30 = kNaN;
  double mse45 = kNaN;
  double fmse = kNaN;
  double cmse = kNaN;
  double cfmse = kNaN;
  double full_mse = kNaN;  // mean over the whole predicted horizon
  int samples = 0;
  int pred_len = 0;
  CornerPoint corner = CornerPoint::kTopLeft;
  std::string config_hash;

  bool operator==(const MetricsReport& o) const;
};

// Squared pixel errors summed per frame over samples; metrics come out in
// squared pixels.
class MetricAccumulator {
 public:
  MetricAccumulator(int pred_len, CornerPoint corner);
  void add(const std::vector<BoundingBox>& predicted, const std::vector<BoundingBox>& truth);
  MetricsReport report() const;
  int samples() const { return samples_; }

 private:
  int pred_len_;
  CornerPoint corner_;
  int samples_ = 0;
  std::vector<double> box_sq_;     // per frame, mean over 4 coordinates
  std::vector<double> corner_sq_;  // per frame, mean over 2 coordinates
};

double box_mse(const std::vector<BoundingBox>& a, const std::vector<BoundingBox>& b);

// Metric CSV: metric,value,unit,split,config_hash. Rows only for defined metrics.
std::string metrics_csv(const MetricsReport& r, const std::string& split);

// ---------------------------------------------------------------------------
// Prediction and evaluation

struct PredictOptions {
  int k = 20;
  bool deterministic_latent = false;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
};

// Per sample, K candidate futures in pixel space: result[s][k][t].
std::vector<std::vector<std::vector<BoundingBox>>> predict_samples(const Model<float>& model,
                                                                   const std::vector<TrajectorySample>& samples,
                                                                   const PredictOptions& options);

// Index of the candidate with the lowest full-horizon MSE; ties keep the first.
std::size_t best_candidate(const std::vector<std::vector<BoundingBox>>& candidates,
                           const std::vector<BoundingBox>& truth);

// Best-of-K by full-horizon MSE, then all metrics on that one candidate.
// Throws DataError on an empty split.
MetricsReport evaluate(const Model<float>& model, const std::vector<TrajectorySample>& samples,
                       const PredictOptions& options, CornerPoint corner = CornerPoint::kTopLeft);

// ---------------------------------------------------------------------------
// Training

struct TrainOptions {
  int epochs = 40;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  double lr_final_fraction = 1.0;  // cosine decay to lr * fraction by the last epoch; 1 keeps lr constant
  std::uint64_t seed = 0;
  LossWeights weights;
  int kl_warmup_epochs = 10;
  int patience = 10;
  int train_k = 1;
  double clip_norm = 5.0;
  std::size_t eval_batch_size = 64;
};

struct EpochRecord {
  int epoch = 0;
  double train_total = 0.0;
  double train_traj = 0.0;
  double train_goal = 0.0;
  double train_kl = 0.0;
  double val_mse45 = kNaN;  // full-horizon validation MSE, squared pixels
};

struct TrainResult {
  Model<float> model;  // best validation epoch, or last epoch without validation data
  std::vector<EpochRecord> curve;
  int best_epoch = 0;
  double best_val = kNaN;
};

// KL weight for a 1-based epoch under linear warm-up.
double kl_weight(const TrainOptions& o, int epoch);

// Learning rate for a 1-based epoch under cosine decay.
double learning_rate(const TrainOptions& o, int epoch);

// Logs one line per epoch when `log` is set.
TrainResult train(const ModelConfig& config, const std::vector<TrajectorySample>& train_set,
                  const std::vector<TrajectorySample>& val_set, const TrainOptions& options,
                  std::ostream* log = nullptr);

std::string curve_csv(const std::vector<EpochRecord>& curve);

// Six significant digits, as used in every CSV.
std::string format_number(double v);

// Hash of everything that determines a training run.
std::string run_hash(const ModelConfig& config, const TrainOptions& options, const std::string& dataset_hash);

// ---------------------------------------------------------------------------
// Ablation over feature modes and seeds

struct AblationRow {
  FeatureMode features = FeatureMode::kBox;
  std::vector<MetricsReport> runs;  // one per seed
};

struct AblationOptions {
  std::vector<FeatureMode> modes;
  std::vector<std::uint64_t> seeds;
  ModelConfig base;
  TrainOptions train;
  PredictOptions eval;
  CornerPoint corner = CornerPoint::kTopLeft;
};

std::vector<AblationRow> ablation_run(const std::filesystem::path& dataset_dir, const AblationOptions& options,
                                      std::ostream* log = nullptr);

// One row per mode: features,seeds, then mean and sample std of each metric.
std::string ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace sgpose
