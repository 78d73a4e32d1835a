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

// Acceptance run: one PASS/FAIL line per criterion.
//
//   sgpose_acceptance [--only 1,2,...]
//
// Exit code 0 when every selected criterion passes, 4 otherwise.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "metric_oracle.hpp"
#include "sgpose/gradcheck.hpp"
#include "sgpose/train_eval.hpp"
#include "skeleton_oracle.hpp"
#include "window_oracle.hpp"

namespace fs = std::filesystem;
using namespace sgpose;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(double v) { return format_number(v); }

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("sgpose_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

TensorD uniform(Eigen::Index r, Eigen::Index c, Rng& rng, double lo, double hi) {
  TensorD t(r, c);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(lo, hi);
  return t;
}

// 1. Full-model finite-difference check.
Outcome gradients() {
  GradcheckOptions o;
  const auto r = run_gradcheck(o);
  return {r.passed() && r.seeds.size() >= 20 && r.seconds < 60.0,
          std::to_string(r.seeds.size()) + " seeds, " + std::to_string(r.checked) + " entries, max rel err " +
              fmt(r.max_rel) + " (< " + fmt(o.tolerance) + "), " + std::to_string(r.skipped) + " skipped, " +
              fmt(r.seconds) + " s"};
}

// 2. Attention weights sum to one over a 45-step rollout, KL is non-negative,
// a single goal aggregates to itself.
Outcome invariants() {
  Rng rng(2);
  ModelConfig c;  // 15 observed, 45 predicted frames
  const auto model = create_model<float>(c, rng);
  double worst_sum = 0.0;
  bool counts_ok = true;
  double min_kl = std::numeric_limits<double>::infinity();
  for (Mode mode : {Mode::kInfer, Mode::kTrain}) {
    ForwardInput<float> in;
    in.boxes = uniform(4, 4 * c.obs_len, rng, 0, 1).cast<float>();
    in.pose = uniform(4, c.obs_len * c.pose_dim(), rng, 0, 1).cast<float>();
    in.targets = uniform(4, 4 * c.pred_len, rng, 0, 1).cast<float>();
    ad::Graph<float> g;
    ModelBinding<float> m(model, g);
    const auto out = forward(m, in, mode, rng, {.k = 5, .deterministic_latent = false});
    counts_ok = counts_ok && out.decoder_attention.size() == 45;
    for (std::size_t i = 0; i < out.decoder_attention.size(); ++i) {
      const TensorF& w = out.decoder_attention[i];
      counts_ok = counts_ok && w.cols() == 45 - static_cast<Eigen::Index>(i);
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        worst_sum = std::max(worst_sum, std::abs(static_cast<double>(w.row(r).cast<double>().sum()) - 1.0));
      }
    }
    if (out.q) min_kl = std::min(min_kl, static_cast<double>(kl_divergence(*out.q, out.p).value().minCoeff()));
  }
  {
    ad::Graph<double> g;
    for (int trial = 0; trial < 2000; ++trial) {
      const TensorD mu = uniform(4, 16, rng, -5, 5), ls = uniform(4, 16, rng, -kLogSigmaBound, kLogSigmaBound);
      const bool same = trial % 4 == 0;
      const TensorD mu2 = same ? mu : uniform(4, 16, rng, -5, 5);
      const TensorD ls2 = same ? ls : uniform(4, 16, rng, -kLogSigmaBound, kLogSigmaBound);
      const auto kl = kl_divergence<double>({g.constant(mu), g.constant(ls)}, {g.constant(mu2), g.constant(ls2)});
      min_kl = std::min(min_kl, kl.value().minCoeff());
    }
  }
  bool singleton = true;
  {
    Rng r2(3);
    const auto md = create_model<double>(c, r2);
    ad::Graph<double> g;
    ModelBinding<double> m(md, g);
    for (int trial = 0; trial < 100; ++trial) {
      const TensorD hid = uniform(3, c.embed_dim, r2, -3, 3);
      StepwiseGoals<double> one{g.constant(TensorD::Zero(3, 4)), g.constant(hid), 1};
      for (const Attention* a : {&md.layout.enc_attention, &md.layout.dec_attention}) {
        const auto agg = goal_aggregate(m, *a, one);
        singleton = singleton && agg.context.value() == hid && (agg.weights.value().array() == 1.0).all();
      }
    }
  }
  return {worst_sum <= 1e-6 && counts_ok && min_kl >= -1e-6 && singleton,
          "max |sum w - 1| " + fmt(worst_sum) + " over 45 steps, min KL " + fmt(min_kl) + ", singleton " +
              (singleton ? "exact" : "inexact")};
}

// 3. Geometry suite.
Outcome geometry() {
  Rng rng(3);
  double oracle_err = 0.0, mirror_err = 0.0;
  bool range_ok = true, involution = true;
  for (int i = 0; i < 1000; ++i) {
    const Keypoints13 kp = oracle::random_skeleton(rng, 1920, 1080);
    const auto got = compute_angles(kp);
    const auto want = oracle::angles(kp);
    for (std::size_t s = 0; s < kNumAngles; ++s) {
      oracle_err = std::max(oracle_err, std::abs(got.degrees[s] - want[s]));
      range_ok = range_ok && got.degrees[s] >= 0.0 && got.degrees[s] <= 180.0;
    }
    const double w = static_cast<double>(320 + rng.below(3000));
    const Keypoints13 g = oracle::random_skeleton_on_grid(rng, w, 1080);
    const BoundingBox box = oracle::random_box_on_grid(rng, w, 1080);
    const auto once = flip_horizontal(g, box, w);
    const auto twice = flip_horizontal(once.keypoints, once.box, w);
    involution = involution && twice.keypoints == g && twice.box == box;
    const auto mirrored = mirror_angles(compute_angles(g));
    const auto flipped = compute_angles(once.keypoints);
    for (std::size_t s = 0; s < kNumAngles; ++s) {
      mirror_err = std::max(mirror_err, std::abs(flipped.degrees[s] - mirrored.degrees[s]));
    }
  }
  Keypoints13 kp = oracle::random_skeleton_on_grid(rng, 1920, 1080);
  kp[kLeftShoulder] = {0, 0, 1};
  kp[kLeftElbow] = {0, 1, 1};
  kp[kLeftWrist] = {0, 2, 1};
  const bool straight = compute_angles(kp).degrees[kElbowL] == 180.0;
  kp[kLeftWrist] = {1, 1, 1};
  const bool right = compute_angles(kp).degrees[kElbowL] == 90.0;
  return {oracle_err <= 1e-9 && mirror_err <= 1e-9 && range_ok && involution && straight && right,
          "1000 skeletons: oracle err " + fmt(oracle_err) + " deg, mirror err " + fmt(mirror_err) +
              " deg, involution " + (involution ? "exact" : "inexact") + ", fixtures " +
              (straight && right ? "exact" : "wrong")};
}

// 4. Metrics against the brute-force accumulator.
Outcome metrics() {
  Rng rng(4);
  auto box = [&] {
    const double x = rng.uniform(0, 1800), y = rng.uniform(0, 900);
    return BoundingBox{x, y, x + rng.uniform(10, 120), y + rng.uniform(20, 180)};
  };
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const bool centroid = trial % 2 == 1;
    std::vector<std::vector<BoundingBox>> pred(3), truth(3);
    MetricAccumulator acc(45, centroid ? CornerPoint::kCentroid : CornerPoint::kTopLeft);
    for (int s = 0; s < 3; ++s) {
      for (int t = 0; t < 45; ++t) {
        pred[s].push_back(box());
        truth[s].push_back(box());
      }
      acc.add(pred[s], truth[s]);
    }
    const auto want = oracle::metrics(pred, truth, centroid);
    const auto got = acc.report();
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); };
    for (double e : {rel(got.mse15, want.mse15), rel(got.mse30, want.mse30), rel(got.mse45, want.mse45),
                     rel(got.fmse, want.fmse), rel(got.cmse, want.cmse), rel(got.cfmse, want.cfmse)}) {
      worst = std::max(worst, e);
    }
  }
  bool unit = true;
  for (CornerPoint c : {CornerPoint::kTopLeft, CornerPoint::kCentroid}) {
    MetricAccumulator acc(45, c);
    for (int s = 0; s < 3; ++s) {
      std::vector<BoundingBox> t, p;
      for (int f = 0; f < 45; ++f) {
        t.push_back(oracle::random_box_on_grid(rng, 1920, 1080));
        p.push_back({t.back().x_min + 1, t.back().y_min - 1, t.back().x_max + 1, t.back().y_max - 1});
      }
      acc.add(p, t);
    }
    const auto r = acc.report();
    for (double v : {r.mse15, r.mse30, r.mse45, r.fmse, r.cmse, r.cfmse}) unit = unit && v == 1.0;
  }
  return {worst <= 1e-6 && unit,
          "200 random 3-sample fixtures: max rel err " + fmt(worst) + ", unit offset " + (unit ? "exactly 1" : "not 1")};
}

// 5. Flip doubling and window counts on gappy synthetic tracks.
Outcome pipeline() {
  Rng rng(5);
  SynthOptions so;
  so.tracks = 59;
  so.track_len = 60;
  so.missing_pose_rate = 0.0;
  const auto base = build_samples(synth_generate(so, rng), WindowOptions{});
  const auto aug = augment_flip(base);
  const bool doubled = base.size() == 59 && aug.size() == 118;

  int trials = 0, mismatches = 0;
  long windows = 0;
  for (; trials < 100; ++trials) {
    SynthOptions g;
    g.tracks = 1 + static_cast<int>(rng.below(4));
    g.track_len = 20 + static_cast<int>(rng.below(100));
    Rng r(rng.next_u64());
    std::vector<FrameAnnotation> gappy;
    for (auto& a : synth_generate(g, r)) {
      if (rng.uniform() >= 0.03) gappy.push_back(std::move(a));
    }
    WindowOptions o;
    o.obs_len = 1 + static_cast<int>(rng.below(15));
    o.pred_len = 1 + static_cast<int>(rng.below(45));
    o.stride = 1 + static_cast<int>(rng.below(4));
    o.require_pose = false;
    const auto got = build_samples(gappy, o);
    const auto want = oracle::brute_windows(gappy, o.obs_len + o.pred_len, o.stride);
    bool same = got.size() == want.size();
    for (std::size_t i = 0; same && i < got.size(); ++i) {
      const auto& p = got[i].provenance;
      same = oracle::WindowStart{p.video_id, p.track_id, p.start_frame} == want[i];
    }
    mismatches += same ? 0 : 1;
    windows += static_cast<long>(want.size());
  }
  return {doubled && mismatches == 0, std::to_string(base.size()) + " -> " + std::to_string(aug.size()) +
                                          " after flip, " + std::to_string(trials) + " gappy trials (" +
                                          std::to_string(windows) + " windows), " + std::to_string(mismatches) +
                                          " mismatches"};
}

// 6. Overfit eight samples.
Outcome overfit() {
  SynthOptions so;
  so.tracks = 30;
  Rng rng(1);
  WindowOptions wo;
  wo.stride = 1000;  // one window per track
  auto samples = build_samples(synth_generate(so, rng), wo);
  if (samples.size() < 8) return {false, "only " + std::to_string(samples.size()) + " samples"};
  samples.resize(8);
  ModelConfig c;
  c.dropout = 0.0;
  TrainOptions t;
  t.epochs = 300;
  t.batch_size = 8;
  t.lr = 1e-2;
  t.lr_final_fraction = 0.0;
  t.clip_norm = 0.0;
  t.weights.kl = 0.0;
  t.patience = 0;
  const auto start = Clock::now();
  const auto r = train(c, samples, {}, t);
  const double secs = seconds_since(start);
  const double ratio = r.curve.back().train_traj / r.curve.front().train_traj;
  return {ratio < 0.02 && secs < 120.0, "8 samples, 300 epochs, d_h 64: final/epoch-1 trajectory loss " +
                                            fmt(100.0 * ratio) + "%, " + fmt(secs) + " s"};
}

// 7. Pose features beat box-only features on the planted lean signal.
Outcome pose_benefit() {
  const auto start = Clock::now();
  SynthOptions so;
  so.tracks = 200;
  Rng rng(0);
  PrepareOptions po;
  po.window.stride = 10;
  po.flip_augment = true;
  const auto dir = scratch("ablation");
  const auto rep = prepare_dataset(synth_generate(so, rng), po, dir);
  AblationOptions ao;
  ao.modes = {FeatureMode::kBox, FeatureMode::kBoxPose, FeatureMode::kBoxAngle};
  ao.seeds = {1, 2, 3, 4, 5};
  ao.train.epochs = 20;
  ao.train.lr = 3e-3;
  ao.train.lr_final_fraction = 0.1;
  ao.eval.k = 20;
  const auto rows = ablation_run(dir, ao, std::getenv("SGPOSE_LOG") && std::string(std::getenv("SGPOSE_LOG")) == "debug"
                                              ? &std::cerr
                                              : nullptr);
  fs::remove_all(dir);
  const double secs = seconds_since(start);
  std::vector<double> means;
  std::string detail = "train/val/test " + std::to_string(rep.train) + "/" + std::to_string(rep.val) + "/" +
                       std::to_string(rep.test) + ", mean mse_45:";
  for (const auto& row : rows) {
    double m = 0.0;
    for (const auto& r : row.runs) m += r.mse45;
    m /= static_cast<double>(row.runs.size());
    means.push_back(m);
    detail += " " + to_string(row.features) + " " + fmt(m);
  }
  detail += ", " + fmt(secs / 60.0) + " min";
  return {means[1] < means[0] && secs < 1800.0, detail};
}

// 8. Byte-identical artifacts from repeated CLI runs.
Outcome determinism() {
  const std::string cli = SGPOSE_CLI_PATH;
  const std::vector<std::string> steps = {
      "synth --tracks 12 --seed 8 --out d.jsonl",
      "prepare --input d.jsonl --out ds --stride 5 --flip-augment",
      "train --data ds --out model --epochs 2 --hidden-dim 16 --embed-dim 8 --latent-dim 4 --seed 3",
      "evaluate --checkpoint model --data ds --k 5 --seed 3 --out metrics.csv",
      "predict --checkpoint model --data ds --k 2 --seed 3 --out predictions.jsonl",
      "ablate --data ds --modes bbox,bbox+pose --seeds 1,2 --epochs 1 --hidden-dim 8 --embed-dim 4 --latent-dim 2 "
      "--k 2 --out ablation.csv"};
  std::vector<fs::path> dirs = {scratch("det_a"), scratch("det_b")};
  for (const auto& d : dirs) {
    for (const auto& s : steps) {
      const std::string cmd = "cd '" + d.string() + "' && SGPOSE_LOG=quiet '" + cli + "' " + s + " >/dev/null";
      const int status = std::system(cmd.c_str());
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) return {false, "command failed: " + s};
    }
  }
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  int files = 0, differing = 0;
  for (const auto& e : fs::recursive_directory_iterator(dirs[0])) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), dirs[0]);
    ++files;
    if (slurp(e.path()) != slurp(dirs[1] / rel)) ++differing;
  }
  for (const auto& d : dirs) fs::remove_all(d);
  return {files > 0 && differing == 0, std::to_string(steps.size()) + " subcommands run twice, " +
                                           std::to_string(files) + " artifacts, " + std::to_string(differing) +
                                           " differ"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> only;
  app.add_option("--only", only, "criteria to run, default all")->delimiter(',')->check(CLI::Range(1, 8));
  CLI11_PARSE(app, argc, argv);
  const std::set<int> selected(only.begin(), only.end());

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient correctness", gradients}, {"attention and CVAE invariants", invariants},
      {"geometry suite", geometry},        {"metric oracle", metrics},
      {"pipeline counting", pipeline},     {"learning sanity (overfit)", overfit},
      {"directional pose benefit", pose_benefit}, {"determinism", determinism}};
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.contains(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    all = all && o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << criteria[i].first << ": " << o.detail
              << std::endl;
  }
  return all ? 0 : 4;
}
