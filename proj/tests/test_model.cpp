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

#include "doctest.h"
#include "fd_oracle.hpp"
#include "reference_model.hpp"
#include "sgpose/error.hpp"
#include "sgpose/model.hpp"

using namespace sgpose;
using ad::Graph;
using ad::Var;

namespace {

ModelConfig tiny(FeatureMode mode = FeatureMode::kBoxPose) {
  ModelConfig c;
  c.obs_len = 3;
  c.pred_len = 4;
  c.features = mode;
  c.embed_dim = 5;
  c.hidden_dim = 8;
  c.latent_dim = 4;
  c.dropout = 0.0;
  return c;
}

template <typename Scalar>
ForwardInput<Scalar> random_input(const ModelConfig& c, int batch, Rng& rng) {
  ForwardInput<Scalar> in;
  in.boxes = fd::random_uniform(batch, 4 * c.obs_len, rng, 0.0, 1.0).cast<Scalar>();
  if (c.uses_pose()) in.pose = fd::random_uniform(batch, c.obs_len * c.pose_dim(), rng, 0.0, 1.0).cast<Scalar>();
  in.targets = fd::random_uniform(batch, 4 * c.pred_len, rng, 0.0, 1.0).cast<Scalar>();
  return in;
}

template <typename Scalar>
void zero_params(Model<Scalar>& m) {
  for (auto& v : m.params.values()) v.setZero();
}

}  // namespace

TEST_CASE("config validation and json round trip") {
  ModelConfig c = tiny(FeatureMode::kBoxAngle);
  CHECK(config_from_json(config_to_json(c)) == c);
  CHECK(c.pose_dim() == 12);
  c.hidden_dim = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny();
  c.dropout = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(config_from_json("{\"obs_len\": 3}"), ConfigError);
  std::string bad = config_to_json(tiny());
  bad.replace(bad.find("\"pose_width\":26"), 15, "\"pose_width\":12");
  CHECK_THROWS_AS(config_from_json(bad), ConfigError);
}

TEST_CASE("parameter sets follow the feature mode") {
  Rng rng(1);
  const auto box = create_model<float>(tiny(FeatureMode::kBox), rng);
  const auto pose = create_model<float>(tiny(FeatureMode::kBoxPose), rng);
  CHECK_FALSE(box.params.contains("pose_embed.weight"));
  CHECK_FALSE(box.params.contains("dec_init.weight"));
  CHECK(pose.params.contains("pose_gru.gates.weight"));
  CHECK(pose.params[static_cast<std::size_t>(pose.params.index("pose_embed.weight"))].rows() == 26);
  for (const auto& v : pose.params.values()) CHECK(all_finite(v));

  auto store = pose.params;
  CHECK_NOTHROW(bind_model(pose.config, store));
  CHECK_THROWS_AS(bind_model(tiny(FeatureMode::kBoxAngle), store), ConfigError);
  CHECK_THROWS_AS(bind_model(box.config, store), ConfigError);
}

TEST_CASE("zero parameters give zero fixed points") {
  Rng rng(2);
  auto model = create_model<double>(tiny(), rng);
  zero_params(model);
  Graph<double> g;
  ModelBinding<double> m(model, g);
  auto x = g.constant(fd::random_tensor(3, 4, rng));
  CHECK(embed_bbox(m, x).value().isZero(0.0));

  // First encoder step from the zero state.
  auto h0 = g.constant(TensorD::Zero(3, 8));
  auto xe = g.constant(TensorD::Zero(3, 5));
  CHECK(encoder_step(m, h0, xe, xe).value().isZero(0.0));
  auto h1 = g.constant(fd::random_tensor(3, 8, rng));
  CHECK(encoder_step(m, h1, xe, xe).value().isApprox(0.5 * h1.value()));

  CHECK(pose_encoder(m, g.constant(TensorD::Zero(3, 3 * 26)), rng, false).value().isZero(0.0));
  CHECK(sge_predict(m, h1, 4).positions.value().isZero(0.0));
  const auto q = cvae_recognition(m, h1, h1);
  CHECK(q.mu.value().isZero(0.0));
  CHECK(q.log_sigma.value().isZero(0.0));
  CHECK(q.mu.cols() == 4);
  const auto p = cvae_prior(m, h1);
  CHECK(p.mu.value().isZero(0.0));
  CHECK(p.log_sigma.value().isZero(0.0));
  CHECK(target_encoder(m, g.constant(TensorD::Zero(3, 16)), true).value().isZero(0.0));
}

TEST_CASE("recognition and prior output 2*d_z regardless of d_h") {
  for (int hidden : {3, 8, 17}) {
    ModelConfig c = tiny();
    c.hidden_dim = hidden;
    Rng rng(3);
    auto model = create_model<double>(c, rng);
    Graph<double> g;
    ModelBinding<double> m(model, g);
    auto h = g.constant(fd::random_tensor(2, hidden, rng));
    CHECK(cvae_recognition(m, h, h).log_sigma.cols() == 4);
    CHECK(cvae_prior(m, h).mu.cols() == 4);
  }
}

TEST_CASE("log sigma is clamped") {
  Rng rng(4);
  auto model = create_model<double>(tiny(), rng);
  zero_params(model);
  auto& bias = model.params[static_cast<std::size_t>(model.params.index("prior.bias"))];
  bias.rightCols(4).setConstant(50.0);
  Graph<double> g;
  ModelBinding<double> m(model, g);
  const auto p = cvae_prior(m, g.constant(TensorD::Zero(1, 8)));
  CHECK((p.log_sigma.value().array() == 8.0).all());
}

TEST_CASE("stepwise goals and attention") {
  Rng rng(5);
  auto model = create_model<double>(tiny(), rng);
  Graph<double> g;
  ModelBinding<double> m(model, g);
  auto h = g.constant(fd::random_tensor(2, 8, rng));
  const auto one = sge_predict(m, h, 1);
  CHECK(one.count == 1);
  CHECK(one.positions.cols() == 4);
  CHECK(one.hiddens.cols() == 5);
  // The trailing goal of a full prediction.
  CHECK(one.positions.value() == sge_predict(m, h, 4).positions.value().rightCols(4));
  CHECK_THROWS_AS(sge_predict(m, h, 0), DimensionError);
  CHECK_THROWS_AS(sge_predict(m, h, 5), DimensionError);

  SUBCASE("singleton attention returns the goal hidden exactly") {
    const auto agg = goal_aggregate(m, model.layout.dec_attention, one);
    CHECK(agg.weights.value()(0, 0) == 1.0);
    CHECK(agg.context.value() == one.hiddens.value());
  }

  SUBCASE("identical goals give uniform weights") {
    const TensorD row = fd::random_tensor(2, 5, rng);
    TensorD same(2, 15);
    for (int s = 0; s < 3; ++s) same.middleCols(5 * s, 5) = row;
    StepwiseGoals<double> goals{g.constant(TensorD::Zero(2, 12)), g.constant(same), 3};
    const auto agg = goal_aggregate(m, model.layout.enc_attention, goals);
    CHECK((agg.weights.value().array() - 1.0 / 3.0).abs().maxCoeff() <= 1e-15);
    CHECK((agg.context.value() - row).cwiseAbs().maxCoeff() <= 1e-12);
  }

  SUBCASE("attention matches a brute-force weighted sum") {
    const reference::Net net{model.params, model.config};
    for (int trial = 0; trial < 200; ++trial) {
      const int count = 1 + static_cast<int>(rng.below(6));
      const TensorD hid = fd::random_uniform(3, 5 * count, rng, -2.0, 2.0);
      StepwiseGoals<double> goals{g.constant(TensorD::Zero(3, 4 * count)), g.constant(hid), count};
      const auto agg = goal_aggregate(m, model.layout.dec_attention, goals);
      for (int b = 0; b < 3; ++b) {
        reference::Mat emb(count, 5);
        for (int s = 0; s < count; ++s) emb.row(s) = hid.row(b).segment(5 * s, 5);
        std::vector<double> w;
        const reference::Vec want = net.aggregate("dec_attention", emb, 0, &w);
        for (int j = 0; j < 5; ++j) CHECK(std::abs(agg.context.value()(b, j) - want(j)) <= 1e-6);
        for (int s = 0; s < count; ++s) CHECK(std::abs(agg.weights.value()(b, s) - w[static_cast<std::size_t>(s)]) <= 1e-12);
      }
    }
  }
}

TEST_CASE("sample_latent") {
  Rng rng(6);
  Graph<double> g;
  const TensorD mu = fd::random_tensor(4, 3, rng);
  LatentGaussian<double> lg{g.constant(mu), g.constant(fd::random_tensor(4, 3, rng))};
  CHECK(sample_latent(lg, rng, true).value() == mu);

  LatentGaussian<double> tight{g.constant(mu), g.constant(TensorD::Constant(4, 3, -8.0))};
  CHECK((sample_latent(tight, rng, false).value() - mu).cwiseAbs().maxCoeff() < 0.01);

  LatentGaussian<double> unit{g.constant(TensorD::Zero(10000, 1)), g.constant(TensorD::Zero(10000, 1))};
  const TensorD z = sample_latent(unit, rng, false).value();
  const double m = z.mean();
  const double var = (z.array() - m).square().sum() / (static_cast<double>(z.size()) - 1.0);
  CHECK(std::abs(m) < 0.05);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("usage errors") {
  Rng rng(7);
  auto box = create_model<double>(tiny(FeatureMode::kBox), rng);
  Graph<double> g;
  ModelBinding<double> m(box, g);
  CHECK_THROWS_AS(pose_encoder(m, g.constant(TensorD::Zero(1, 3)), rng, false), UsageError);
  CHECK_THROWS_AS(target_encoder(m, g.constant(TensorD::Zero(1, 16)), false), UsageError);

  auto in = random_input<double>(box.config, 2, rng);
  in.targets.reset();
  CHECK_THROWS_AS(forward(m, in, Mode::kTrain, rng, {}), UsageError);
  CHECK_NOTHROW(forward(m, in, Mode::kInfer, rng, {}));
  CHECK_THROWS_AS(forward(m, in, Mode::kInfer, rng, {.k = 0}), UsageError);
  in.boxes = TensorD::Zero(2, 8);
  CHECK_THROWS_AS(forward(m, in, Mode::kInfer, rng, {}), DimensionError);
}

TEST_CASE("forward shapes, attention sums and goal counts") {
  for (FeatureMode mode : {FeatureMode::kBox, FeatureMode::kBoxPose, FeatureMode::kBoxAngle}) {
    ModelConfig c;
    c.features = mode;
    c.embed_dim = 8;
    c.hidden_dim = 12;
    c.latent_dim = 3;
    Rng rng(8);
    auto model = create_model<float>(c, rng);
    for (Mode fm : {Mode::kTrain, Mode::kInfer}) {
      Graph<float> g;
      ModelBinding<float> m(model, g);
      const auto out = forward(m, random_input<float>(c, 3, rng), fm, rng, {.k = 5});
      CHECK(out.predictions.rows() == 15);
      CHECK(out.predictions.cols() == 45 * 4);
      CHECK(out.encoder_goals.size() == 15);
      CHECK(out.encoder_goals[0].cols() == 45 * 4);
      CHECK(out.q.has_value() == (fm == Mode::kTrain));
      REQUIRE(out.decoder_attention.size() == 45);
      for (int i = 0; i < 45; ++i) {
        CHECK(out.decoder_goal_counts[static_cast<std::size_t>(i)] == 45 - i);
        const auto& w = out.decoder_attention[static_cast<std::size_t>(i)];
        CHECK(w.cols() == 45 - i);
        CHECK((w.rowwise().sum().array() - 1.0f).abs().maxCoeff() <= 1e-6f);
      }
      CHECK(all_finite(out.predictions.value()));
    }
  }
}

TEST_CASE("forward matches the per-sample reference implementation") {
  for (FeatureMode mode : {FeatureMode::kBox, FeatureMode::kBoxPose, FeatureMode::kBoxAngle}) {
    Rng rng(9);
    const ModelConfig c = tiny(mode);
    const auto model = create_model<double>(c, rng);
    const reference::Net net{model.params, model.config};
    const auto in = random_input<double>(c, 3, rng);
    for (Mode fm : {Mode::kInfer, Mode::kTrain}) {
      Graph<double> g;
      ModelBinding<double> m(model, g);
      const auto out = forward(m, in, fm, rng, {.k = 2, .deterministic_latent = true});
      for (int b = 0; b < 3; ++b) {
        const reference::Vec target = in.targets->row(b);
        const reference::Vec want =
            net.predict(in.boxes.row(b), c.uses_pose() ? reference::Vec(in.pose.row(b)) : reference::Vec(),
                        fm == Mode::kTrain ? &target : nullptr);
        for (int k = 0; k < 2; ++k) {
          const double err = (out.predictions.value().row(2 * b + k) - want).cwiseAbs().maxCoeff();
          CHECK(err <= 1e-12);
        }
      }
    }
  }
}

TEST_CASE("forward is deterministic") {
  Rng init(10);
  const auto model = create_model<float>(tiny(), init);
  Rng data(11);
  const auto in = random_input<float>(model.config, 4, data);
  auto run = [&](Mode mode, bool det) {
    Graph<float> g;
    ModelBinding<float> m(model, g);
    Rng rng(99);
    return TensorF(forward(m, in, mode, rng, {.k = 3, .deterministic_latent = det}).predictions.value());
  };
  CHECK(run(Mode::kInfer, true) == run(Mode::kInfer, true));
  CHECK(run(Mode::kTrain, false) == run(Mode::kTrain, false));
  // Stochastic samples differ across k.
  const TensorF s = run(Mode::kInfer, false);
  CHECK(s.row(0) != s.row(1));
  const TensorF d = run(Mode::kInfer, true);
  CHECK(d.row(0) == d.row(1));
}

TEST_CASE("every parameter receives gradient") {
  for (FeatureMode mode : {FeatureMode::kBox, FeatureMode::kBoxPose}) {
    ModelConfig c = tiny(mode);
    c.dropout = 0.1;
    Rng rng(12);
    const auto model = create_model<double>(c, rng);
    Graph<double> g;
    ModelBinding<double> m(model, g);
    const auto in = random_input<double>(c, 2, rng);
    const auto out = forward(m, in, Mode::kTrain, rng, {.k = 2});
    // Touch every output kind: predictions, goals and both latents.
    std::vector<Var<double>> terms = {ad::sum(ad::square(out.predictions))};
    for (const auto& goal : out.encoder_goals) terms.push_back(ad::sum(ad::square(goal)));
    terms.push_back(ad::sum(ad::square(ad::sub(out.q->mu, out.p.mu))));
    terms.push_back(ad::sum(ad::square(ad::sub(out.q->log_sigma, out.p.log_sigma))));
    auto loss = ad::sum(ad::concat(terms, ad::Axis::kCols));
    g.backward(loss);
    const auto grads = m.params.gradients();
    for (std::size_t i = 0; i < grads.size(); ++i) {
      const std::string& name = model.params.name(i);
      CAPTURE(name);
      // Softmax is shift invariant, so attention biases get zero gradient up to round-off.
      if (name.ends_with("attention.bias")) {
        CHECK(grads[i].cwiseAbs().maxCoeff() <= 1e-12);
        continue;
      }
      CHECK_FALSE(grads[i].isZero(0.0));
    }
  }
}
