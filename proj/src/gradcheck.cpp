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

#include "sgpose/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "sgpose/error.hpp"
#include "sgpose/train_eval.hpp"

namespace sgpose {

ModelConfig GradcheckOptions::tiny_config() {
  ModelConfig c;
  c.obs_len = 3;
  c.pred_len = 4;
  c.embed_dim = 4;
  c.hidden_dim = 8;
  c.latent_dim = 4;
  c.dropout = 0.1;
  c.k_samples = 2;
  return c;
}

namespace {

struct Eval {
  double loss = 0.0;
  std::uint64_t kinks = 0;
};

class LossFunction {
 public:
  LossFunction(const ModelConfig& config, std::uint64_t seed, int batch, int k) : k_(k), noise_seed_(seed ^ 0x5eedu) {
    Rng rng(seed);
    model_ = create_model<double>(config, rng);
    auto uniform = [&](Eigen::Index r, Eigen::Index c) {
      TensorD t(r, c);
      for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(0.05, 0.95);
      return t;
    };
    input_.boxes = uniform(batch, 4 * config.obs_len);
    if (config.uses_pose()) input_.pose = uniform(batch, config.obs_len * config.pose_dim());
    input_.targets = uniform(batch, 4 * config.pred_len);
  }

  Model<double>& model() { return model_; }

  // Loss value, kink signature and (optionally) parameter gradients.
  Eval run(std::vector<TensorD>* grads) {
    ad::Graph<double> g;
    g.set_track_kinks(true);
    ModelBinding<double> m(model_, g);
    Rng noise(noise_seed_);
    const auto out = forward(m, input_, Mode::kTrain, noise, {.k = k_, .deterministic_latent = false});
    const auto terms = compute_loss(out, g.constant(input_.boxes), g.constant(*input_.targets), LossWeights{});
    Eval e{terms.total.value()(0, 0), g.kink_signature()};
    if (grads) {
      g.backward(terms.total);
      *grads = m.params.gradients();
    }
    return e;
  }

 private:
  Model<double> model_;
  ForwardInput<double> input_;
  int k_;
  std::uint64_t noise_seed_;
};

}  // namespace

GradcheckSeed gradcheck_seed(const ModelConfig& config, std::uint64_t seed, const GradcheckOptions& o) {
  LossFunction f(config, seed, o.batch, o.k);
  std::vector<TensorD> analytic;
  const Eval base = f.run(&analytic);
  if (!std::isfinite(base.loss)) throw Error("gradcheck: non-finite loss at seed " + std::to_string(seed));

  GradcheckSeed r;
  r.seed = seed;
  r.features = config.features;
  auto& params = f.model().params;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (Eigen::Index j = 0; j < params[p].size(); ++j) {
      double& x = params[p].data()[j];
      const double x0 = x;
      bool ok = false;
      double numeric = 0.0;
      // Shrink the step while either side lands on a different branch.
      for (double h = o.step; h >= o.step * 1e-2 && !ok; h /= 10.0) {
        x = x0 + h;
        const Eval up = f.run(nullptr);
        x = x0 - h;
        const Eval down = f.run(nullptr);
        x = x0;
        if (up.kinks == base.kinks && down.kinks == base.kinks) {
          numeric = (up.loss - down.loss) / (2.0 * h);
          ok = true;
        }
      }
      if (!ok) {
        ++r.skipped;
        continue;
      }
      const double a = analytic[p].data()[j];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), o.floor});
      ++r.checked;
      if (rel >= r.max_rel) {
        r.max_rel = rel;
        r.worst = params.name(p) + "[" + std::to_string(j) + "]";
      }
    }
  }
  return r;
}

GradcheckReport run_gradcheck(const GradcheckOptions& o) {
  if (o.seeds < 1) throw ConfigError("gradcheck needs at least one seed");
  if (!(o.step > 0.0)) throw ConfigError("gradcheck step must be positive");
  const auto start = std::chrono::steady_clock::now();
  GradcheckReport rep;
  rep.tolerance = o.tolerance;
  const FeatureMode modes[] = {FeatureMode::kBoxPose, FeatureMode::kBox, FeatureMode::kBoxAngle};
  for (int i = 0; i < o.seeds; ++i) {
    ModelConfig c = o.config;
    c.features = modes[i % 3];
    const auto s = gradcheck_seed(c, o.first_seed + static_cast<std::uint64_t>(i), o);
    rep.max_rel = std::max(rep.max_rel, s.max_rel);
    rep.checked += s.checked;
    rep.skipped += s.skipped;
    rep.seeds.push_back(s);
  }
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

}  // namespace sgpose
