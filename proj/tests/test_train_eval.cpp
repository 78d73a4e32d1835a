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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "doctest.h"
#include "json.hpp"
#include "fd_oracle.hpp"
#include "metric_oracle.hpp"
#include "sgpose/checkpoint.hpp"
#include "sgpose/error.hpp"
#include "sgpose/train_eval.hpp"

using namespace sgpose;
using ad::Graph;
using ad::Var;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("sgpose_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ModelConfig small_config(FeatureMode mode = FeatureMode::kBoxPose) {
  ModelConfig c;
  c.obs_len = 4;
  c.pred_len = 6;
  c.features = mode;
  c.embed_dim = 6;
  c.hidden_dim = 10;
  c.latent_dim = 4;
  c.k_samples = 3;
  return c;
}

std::vector<TrajectorySample> small_samples(std::uint64_t seed, int tracks = 6) {
  SynthOptions so;
  so.tracks = tracks;
  so.track_len = 80;
  Rng rng(seed);
  WindowOptions wo;
  wo.obs_len = 4;
  wo.pred_len = 6;
  wo.stride = 15;
  return build_samples(synth_generate(so, rng), wo);
}

BoundingBox random_box(Rng& rng) {
  const double x = rng.uniform(0, 1800), y = rng.uniform(0, 900);
  return {x, y, x + rng.uniform(10, 120), y + rng.uniform(20, 180)};
}

std::vector<BoundingBox> random_seq(Rng& rng, int n) {
  std::vector<BoundingBox> s;
  for (int i = 0; i < n; ++i) s.push_back(random_box(rng));
  return s;
}

bool params_equal(const Model<float>& a, const Model<float>& b) {
  if (a.params.size() != b.params.size()) return false;
  for (std::size_t i = 0; i < a.params.size(); ++i) {
    if (a.params.name(i) != b.params.name(i) || a.params[i] != b.params[i]) return false;
  }
  return true;
}

double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

}  // namespace

TEST_CASE("kl divergence matches the closed form") {
  Graph<double> g;
  SUBCASE("unit shift in the mean gives one half") {
    LatentGaussian<double> q{g.constant(TensorD::Ones(1, 1)), g.constant(TensorD::Zero(1, 1))};
    LatentGaussian<double> p{g.constant(TensorD::Zero(1, 1)), g.constant(TensorD::Zero(1, 1))};
    CHECK(kl_divergence(q, p).value()(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("identical distributions give zero") {
    Rng rng(3);
    auto mu = g.constant(fd::random_uniform(4, 6, rng, -2, 2));
    auto ls = g.constant(fd::random_uniform(4, 6, rng, -1, 1));
    const TensorD kl = kl_divergence<double>({mu, ls}, {mu, ls}).value();
    CHECK(kl.cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("random pairs agree with a scalar loop and are non-negative") {
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
      const TensorD mq = fd::random_uniform(3, 5, rng, -3, 3), sq = fd::random_uniform(3, 5, rng, -2, 2);
      const TensorD mp = fd::random_uniform(3, 5, rng, -3, 3), sp = fd::random_uniform(3, 5, rng, -2, 2);
      const TensorD kl = kl_divergence<double>({g.constant(mq), g.constant(sq)}, {g.constant(mp), g.constant(sp)})
                             .value();
      REQUIRE(kl.rows() == 3);
      REQUIRE(kl.cols() == 1);
      for (int b = 0; b < 3; ++b) {
        double want = 0.0;
        for (int j = 0; j < 5; ++j) {
          const double vq = std::exp(2 * sq(b, j)), vp = std::exp(2 * sp(b, j));
          want += 0.5 * (std::log(vp / vq) + (vq + (mq(b, j) - mp(b, j)) * (mq(b, j) - mp(b, j))) / vp - 1.0);
        }
        CHECK(kl(b, 0) == doctest::Approx(want).epsilon(1e-12));
        CHECK(kl(b, 0) >= -1e-12);
      }
    }
  }
}

TEST_CASE("best-of-K RMSE against a brute-force minimum") {
  Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const int b = 1 + static_cast<int>(rng.below(4)), k = 1 + static_cast<int>(rng.below(5)), n = 8;
    const TensorD pred = fd::random_uniform(b * k, n, rng, 0, 1), tgt = fd::random_uniform(b, n, rng, 0, 1);
    Graph<double> g;
    const double got = best_of_k_rmse(g.constant(pred), g.constant(tgt), k).value()(0, 0);
    double want = 0.0;
    for (int i = 0; i < b; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int j = 0; j < k; ++j) {
        double s = 0.0;
        for (int c = 0; c < n; ++c) s += std::pow(pred(i * k + j, c) - tgt(i, c), 2);
        best = std::min(best, std::sqrt(s / n));
      }
      want += best / b;
    }
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("best-of-K is monotone in K and exact on a perfect candidate") {
  Rng rng(12);
  const int b = 3, n = 12, kmax = 6;
  const TensorD pool = fd::random_uniform(b * kmax, n, rng, 0, 1), tgt = fd::random_uniform(b, n, rng, 0, 1);
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= kmax; ++k) {
    TensorD pred(b * k, n);
    for (int i = 0; i < b; ++i) {
      for (int j = 0; j < k; ++j) pred.row(i * k + j) = pool.row(i * kmax + j);
    }
    Graph<double> g;
    const double v = best_of_k_rmse(g.constant(pred), g.constant(tgt), k).value()(0, 0);
    CHECK(v <= prev + 1e-15);
    prev = v;
  }
  TensorD pred = pool.topRows(b * 2);
  for (int i = 0; i < b; ++i) pred.row(i * 2 + 1) = tgt.row(i);
  Graph<double> g;
  CHECK(best_of_k_rmse(g.constant(pred), g.constant(tgt), 2).value()(0, 0) == 0.0);
  CHECK_THROWS_AS(best_of_k_rmse(g.constant(pred), g.constant(tgt), 0), UsageError);
  CHECK_THROWS_AS(best_of_k_rmse(g.constant(pred), g.constant(tgt), 3), DimensionError);
}

TEST_CASE("goal loss against the shifted ground truth") {
  Rng rng(13);
  const int b = 2, lo = 3, n = 4;
  const TensorD obs = fd::random_uniform(b, 4 * lo, rng, 0, 1), tgt = fd::random_uniform(b, 4 * n, rng, 0, 1);
  Graph<double> g;
  std::vector<TensorD> goals;
  std::vector<Var<double>> vars;
  for (int t = 0; t < lo; ++t) {
    goals.push_back(fd::random_uniform(b, 4 * n, rng, 0, 1));
    vars.push_back(g.constant(goals.back()));
  }
  const double got = goal_loss(vars, g.constant(obs), g.constant(tgt)).value()(0, 0);
  // Frame f of the full sequence: observed for f < lo, future otherwise.
  auto truth = [&](int row, int f, int c) { return f < lo ? obs(row, 4 * f + c) : tgt(row, 4 * (f - lo) + c); };
  double s = 0.0;
  for (int t = 0; t < lo; ++t) {
    for (int row = 0; row < b; ++row) {
      for (int j = 0; j < n; ++j) {
        for (int c = 0; c < 4; ++c) s += std::pow(goals[t](row, 4 * j + c) - truth(row, t + 1 + j, c), 2);
      }
    }
  }
  CHECK(got == doctest::Approx(s / (lo * b * 4 * n)).epsilon(1e-12));

  // Perfect goals give zero.
  std::vector<Var<double>> perfect;
  for (int t = 0; t < lo; ++t) {
    TensorD p(b, 4 * n);
    for (int row = 0; row < b; ++row) {
      for (int j = 0; j < n; ++j) {
        for (int c = 0; c < 4; ++c) p(row, 4 * j + c) = truth(row, t + 1 + j, c);
      }
    }
    perfect.push_back(g.constant(p));
  }
  CHECK(goal_loss(perfect, g.constant(obs), g.constant(tgt)).value()(0, 0) == 0.0);
}

TEST_CASE("compute_loss of a perfect prediction without a recognition distribution is zero") {
  Graph<double> g;
  Rng rng(14);
  const TensorD obs = fd::random_uniform(2, 12, rng, 0, 1), tgt = fd::random_uniform(2, 16, rng, 0, 1);
  ForwardOutput<double> out;
  out.predictions = g.constant(tgt);
  out.k = 1;
  out.batch = 2;
  out.p = {g.constant(TensorD::Zero(2, 3)), g.constant(TensorD::Zero(2, 3))};
  const auto terms = values(compute_loss(out, g.constant(obs), g.constant(tgt), LossWeights{}));
  CHECK(terms.total == 0.0);
  CHECK(terms.goal == 0.0);
  CHECK(terms.kl == 0.0);
  out.k = 0;
  CHECK_THROWS_AS(compute_loss(out, g.constant(obs), g.constant(tgt), LossWeights{}), UsageError);
}

TEST_CASE("metric accumulator matches the brute-force oracle") {
  for (bool centroid : {false, true}) {
    const CornerPoint corner = centroid ? CornerPoint::kCentroid : CornerPoint::kTopLeft;
    Rng rng(centroid ? 21 : 20);
    for (int trial = 0; trial < 40; ++trial) {
      const int n = 1 + static_cast<int>(rng.below(5));
      std::vector<std::vector<BoundingBox>> pred, truth;
      MetricAccumulator acc(45, corner);
      for (int s = 0; s < n; ++s) {
        pred.push_back(random_seq(rng, 45));
        truth.push_back(random_seq(rng, 45));
        acc.add(pred.back(), truth.back());
      }
      const auto want = oracle::metrics(pred, truth, centroid);
      const auto got = acc.report();
      CHECK(got.samples == n);
      CHECK(rel(got.mse15, want.mse15) < 1e-6);
      CHECK(rel(got.mse30, want.mse30) < 1e-6);
      CHECK(rel(got.mse45, want.mse45) < 1e-6);
      CHECK(rel(got.fmse, want.fmse) < 1e-6);
      CHECK(rel(got.cmse, want.cmse) < 1e-6);
      CHECK(rel(got.cfmse, want.cfmse) < 1e-6);
      CHECK(got.full_mse == got.mse45);
    }
  }
}

TEST_CASE("metric accumulator on hand-made fixtures") {
  Rng rng(22);
  const auto truth = random_seq(rng, 45);
  SUBCASE("perfect predictions give zero") {
    MetricAccumulator acc(45, CornerPoint::kCentroid);
    acc.add(truth, truth);
    const auto r = acc.report();
    CHECK(r.mse15 == 0.0);
    CHECK(r.mse45 == 0.0);
    CHECK(r.fmse == 0.0);
    CHECK(r.cmse == 0.0);
    CHECK(r.cfmse == 0.0);
  }
  SUBCASE("a one pixel shift of every coordinate gives exactly one") {
    auto shifted = truth;
    for (auto& b : shifted) b = {b.x_min + 1, b.y_min - 1, b.x_max + 1, b.y_max - 1};
    for (CornerPoint c : {CornerPoint::kTopLeft, CornerPoint::kCentroid}) {
      MetricAccumulator acc(45, c);
      acc.add(shifted, truth);
      acc.add(shifted, truth);
      const auto r = acc.report();
      CHECK(r.mse15 == 1.0);
      CHECK(r.mse30 == 1.0);
      CHECK(r.mse45 == 1.0);
      CHECK(r.fmse == 1.0);
      CHECK(r.cmse == 1.0);
      CHECK(r.cfmse == 1.0);
    }
  }
  SUBCASE("an error only in the last frame") {
    auto pred = truth;
    pred[44].x_max += 4;  // squared error 16 on one of four coordinates
    MetricAccumulator acc(45, CornerPoint::kTopLeft);
    acc.add(pred, truth);
    const auto r = acc.report();
    CHECK(r.mse15 == 0.0);
    CHECK(r.mse30 == 0.0);
    CHECK(r.mse45 == doctest::Approx(4.0 / 45));
    CHECK(r.fmse == 4.0);
    CHECK(r.cmse == 0.0);  // the top-left corner is untouched
    CHECK(r.cfmse == 0.0);
  }
  SUBCASE("sample order does not matter") {
    std::vector<std::vector<BoundingBox>> p, t;
    for (int i = 0; i < 5; ++i) {
      p.push_back(random_seq(rng, 45));
      t.push_back(random_seq(rng, 45));
    }
    MetricAccumulator a(45, CornerPoint::kTopLeft), b(45, CornerPoint::kTopLeft);
    for (int i = 0; i < 5; ++i) a.add(p[i], t[i]);
    for (int i = 4; i >= 0; --i) b.add(p[i], t[i]);
    CHECK(rel(a.report().mse45, b.report().mse45) < 1e-12);
    CHECK(rel(a.report().cfmse, b.report().cfmse) < 1e-12);
  }
  SUBCASE("horizons beyond the prediction length are undefined") {
    MetricAccumulator acc(20, CornerPoint::kTopLeft);
    acc.add(random_seq(rng, 20), random_seq(rng, 20));
    const auto r = acc.report();
    CHECK(std::isfinite(r.mse15));
    CHECK(std::isnan(r.mse30));
    CHECK(std::isnan(r.mse45));
    CHECK(std::isfinite(r.full_mse));
    const std::string csv = metrics_csv(r, "test");
    CHECK(csv.find("mse_15,") != std::string::npos);
    CHECK(csv.find("mse_30") == std::string::npos);
  }
  SUBCASE("length mismatch is rejected") {
    MetricAccumulator acc(45, CornerPoint::kTopLeft);
    CHECK_THROWS(acc.add(random_seq(rng, 44), truth));
  }
}

TEST_CASE("metrics csv layout") {
  MetricsReport r;
  r.mse15 = 1.5;
  r.mse30 = 2;
  r.mse45 = 3;
  r.fmse = 4;
  r.cmse = 5;
  r.cfmse = 6;
  r.full_mse = 3;
  r.samples = 7;
  r.pred_len = 45;
  r.corner = CornerPoint::kCentroid;
  r.config_hash = "abc";
  const std::string csv = metrics_csv(r, "test");
  CHECK(csv.rfind("metric,value,unit,split,config_hash\n", 0) == 0);
  CHECK(csv.find("mse_15,1.5,px^2,test,abc\n") != std::string::npos);
  CHECK(csv.find("cfmse,6,px^2/centroid,test,abc\n") != std::string::npos);
  CHECK(csv.find("samples,7,") != std::string::npos);
  CHECK(format_number(kNaN) == "nan");
  CHECK(parse_corner("top_left") == CornerPoint::kTopLeft);
  CHECK_THROWS_AS(parse_corner("middle"), ConfigError);
}

TEST_CASE("best candidate picks the lowest full-horizon error") {
  Rng rng(23);
  const auto truth = random_seq(rng, 10);
  std::vector<std::vector<BoundingBox>> cands;
  for (int k = 0; k < 6; ++k) cands.push_back(random_seq(rng, 10));
  std::size_t want = 0;
  for (std::size_t k = 1; k < cands.size(); ++k) {
    if (box_mse(cands[k], truth) < box_mse(cands[want], truth)) want = k;
  }
  CHECK(best_candidate(cands, truth) == want);
  cands.push_back(truth);
  cands.push_back(truth);
  CHECK(best_candidate(cands, truth) == 6);  // ties keep the first
  CHECK_THROWS_AS(best_candidate({}, truth), UsageError);
}

TEST_CASE("schedules") {
  TrainOptions o;
  o.kl_warmup_epochs = 10;
  o.weights.kl = 2.0;
  CHECK(kl_weight(o, 1) == doctest::Approx(0.2));
  CHECK(kl_weight(o, 10) == 2.0);
  CHECK(kl_weight(o, 30) == 2.0);
  o.kl_warmup_epochs = 0;
  CHECK(kl_weight(o, 1) == 2.0);
  o.epochs = 11;
  o.lr = 1e-2;
  CHECK(learning_rate(o, 5) == 1e-2);
  o.lr_final_fraction = 0.1;
  CHECK(learning_rate(o, 1) == doctest::Approx(1e-2));
  CHECK(learning_rate(o, 6) == doctest::Approx(0.55e-2));
  CHECK(learning_rate(o, 11) == doctest::Approx(1e-3));
}

TEST_CASE("prediction and evaluation") {
  const auto samples = small_samples(1);
  REQUIRE(samples.size() >= 6);
  Rng rng(5);
  const auto model = create_model<float>(small_config(), rng);
  PredictOptions po;
  po.k = 3;
  po.batch_size = 4;
  po.seed = 9;
  const auto preds = predict_samples(model, samples, po);
  REQUIRE(preds.size() == samples.size());
  for (const auto& cands : preds) {
    REQUIRE(cands.size() == 3);
    for (const auto& seq : cands) CHECK(seq.size() == 6);
  }
  CHECK(predict_samples(model, samples, po) == preds);

  // The report equals the oracle-free recomputation on the chosen candidates.
  MetricAccumulator acc(6, CornerPoint::kTopLeft);
  for (std::size_t s = 0; s < samples.size(); ++s) {
    acc.add(preds[s][best_candidate(preds[s], samples[s].future_boxes)], samples[s].future_boxes);
  }
  CHECK(evaluate(model, samples, po) == acc.report());

  // Batch size does not change deterministic predictions.
  PredictOptions det = po;
  det.deterministic_latent = true;
  PredictOptions det1 = det;
  det1.batch_size = 1;
  const auto a = evaluate(model, samples, det), b = evaluate(model, samples, det1);
  CHECK(rel(a.full_mse, b.full_mse) < 1e-5);

  CHECK_THROWS_AS(evaluate(model, {}, po), DataError);
  ModelConfig other = small_config();
  other.pred_len = 5;
  Rng r2(5);
  CHECK_THROWS_AS(evaluate(create_model<float>(other, r2), samples, po), ConfigError);
  po.k = 0;
  CHECK_THROWS_AS(predict_samples(model, samples, po), UsageError);
}

TEST_CASE("training") {
  const auto train_set = small_samples(2);
  const auto val_set = small_samples(3, 3);
  REQUIRE(!val_set.empty());
  TrainOptions o;
  o.epochs = 3;
  o.batch_size = 4;
  o.lr = 5e-3;
  o.seed = 17;

  SUBCASE("zero epochs returns the initial model") {
    TrainOptions z = o;
    z.epochs = 0;
    const auto r = train(small_config(), train_set, val_set, z);
    CHECK(r.curve.empty());
    Rng root(17);
    Rng init = root.fork();
    CHECK(params_equal(r.model, create_model<float>(small_config(), init)));
  }
  SUBCASE("runs are reproducible and the loss goes down") {
    std::ostringstream log1, log2;
    const auto a = train(small_config(), train_set, val_set, o, &log1);
    const auto b = train(small_config(), train_set, val_set, o, &log2);
    CHECK(curve_csv(a.curve) == curve_csv(b.curve));
    CHECK(log1.str() == log2.str());
    CHECK(params_equal(a.model, b.model));
    REQUIRE(a.curve.size() == 3);
    CHECK(a.curve.back().train_traj < a.curve.front().train_traj);
    CHECK(a.best_epoch >= 1);
    CHECK(std::isfinite(a.best_val));
    CHECK(curve_csv(a.curve).rfind("epoch,train_total,train_traj,train_goal,train_kl,val_mse45\n", 0) == 0);
    TrainOptions other = o;
    other.seed = 18;
    CHECK(!params_equal(a.model, train(small_config(), train_set, val_set, other).model));
  }
  SUBCASE("without validation data the last epoch is kept") {
    const auto r = train(small_config(FeatureMode::kBox), train_set, {}, o);
    CHECK(r.best_epoch == 3);
    CHECK(std::isnan(r.curve.back().val_mse45));
  }
  SUBCASE("bad inputs") {
    ModelConfig c = small_config();
    c.obs_len = 5;
    CHECK_THROWS_AS(train(c, train_set, val_set, o), ConfigError);
    TrainOptions bad = o;
    bad.lr = 0;
    CHECK_THROWS_AS(train(small_config(), train_set, val_set, bad), ConfigError);
    CHECK_THROWS_AS(train(small_config(), {}, val_set, o), DataError);
  }
  SUBCASE("run hash tracks every option") {
    const auto h = run_hash(small_config(), o, "d");
    CHECK(h == run_hash(small_config(), o, "d"));
    CHECK(h != run_hash(small_config(), o, "e"));
    TrainOptions o2 = o;
    o2.lr_final_fraction = 0.5;
    CHECK(h != run_hash(small_config(), o2, "d"));
  }
}

TEST_CASE("ablation with one mode and one seed equals train plus evaluate") {
  SynthOptions so;
  so.tracks = 12;
  so.track_len = 80;
  Rng rng(4);
  PrepareOptions po;
  po.window.obs_len = 4;
  po.window.pred_len = 6;
  po.window.stride = 15;
  const auto dir = temp_dir("ablation");
  prepare_dataset(synth_generate(so, rng), po, dir);

  AblationOptions ao;
  ao.modes = {FeatureMode::kBoxAngle, FeatureMode::kBox};
  ao.seeds = {7};
  ao.base = small_config();
  ao.train.epochs = 2;
  ao.train.batch_size = 8;
  ao.eval.k = 2;
  const auto rows = ablation_run(dir, ao);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].features == FeatureMode::kBoxAngle);
  REQUIRE(rows[0].runs.size() == 1);

  ModelConfig cfg = small_config(FeatureMode::kBoxAngle);
  TrainOptions to = ao.train;
  to.seed = 7;
  const auto trained = train(cfg, read_split(dir, Split::kTrain), read_split(dir, Split::kVal), to);
  PredictOptions ev = ao.eval;
  ev.seed = 7;
  auto want = evaluate(trained.model, read_split(dir, Split::kTest), ev);
  want.config_hash = run_hash(cfg, to, read_manifest(dir).config_hash);
  CHECK(rows[0].runs[0] == want);

  const std::string csv = ablation_csv(rows);
  CHECK(csv.rfind("features,seeds,mse_15_mean,mse_15_std,", 0) == 0);
  CHECK(csv.find("\nbbox+angle,1,") != std::string::npos);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);

  ao.seeds.clear();
  CHECK_THROWS_AS(ablation_run(dir, ao), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("ablation csv statistics") {
  AblationRow row;
  row.features = FeatureMode::kBox;
  for (double v : {1.0, 2.0, 3.0}) {
    MetricsReport r;
    r.mse15 = r.mse30 = r.mse45 = r.fmse = r.cmse = r.cfmse = v;
    row.runs.push_back(r);
  }
  const std::string csv = ablation_csv({row});
  CHECK(csv.find("\nbbox,3,2,1,2,1,2,1,2,1,2,1,2,1\n") != std::string::npos);
}

TEST_CASE("checkpoint round trip") {
  Rng rng(31);
  Checkpoint ck{create_model<float>(small_config(FeatureMode::kBoxAngle), rng), "cafe", 4};
  const auto dir = temp_dir("ckpt");
  save_checkpoint(dir, ck);
  const auto back = load_checkpoint(dir);
  CHECK(back.model.config == ck.model.config);
  CHECK(back.config_hash == "cafe");
  CHECK(back.best_epoch == 4);
  CHECK(params_equal(back.model, ck.model));

  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  const auto dir2 = temp_dir("ckpt2");
  save_checkpoint(dir2, back);
  CHECK(slurp(dir / "params.bin") == slurp(dir2 / "params.bin"));
  CHECK(slurp(dir / "manifest.json") == slurp(dir2 / "manifest.json"));

  SUBCASE("unknown version") {
    auto j = nlohmann::json::parse(slurp(dir2 / "manifest.json"));
    j["format_version"] = 99;
    std::ofstream(dir2 / "manifest.json") << j.dump(2);
    CHECK_THROWS_AS(load_checkpoint(dir2), DataError);
  }
  SUBCASE("truncated parameters") {
    const std::string blob = slurp(dir2 / "params.bin");
    std::ofstream(dir2 / "params.bin", std::ios::binary) << blob.substr(0, blob.size() - 4);
    CHECK_THROWS_AS(load_checkpoint(dir2), DataError);
  }
  SUBCASE("shape disagrees with the config") {
    auto j = nlohmann::json::parse(slurp(dir2 / "manifest.json"));
    j["config"]["hidden_dim"] = 11;
    std::ofstream(dir2 / "manifest.json") << j.dump(2);
    CHECK_THROWS_AS(load_checkpoint(dir2), ConfigError);
  }
  SUBCASE("missing directory") { CHECK_THROWS_AS(load_checkpoint(dir2 / "nope"), DataError); }
  fs::remove_all(dir);
  fs::remove_all(dir2);
}
