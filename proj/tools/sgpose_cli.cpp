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

// Command-line entry point: synth, prepare, train, evaluate, ablate, predict, gradcheck.
//
// Exit codes: 0 success, 2 usage or configuration error, 3 data error,
// 4 internal check failure. SGPOSE_LOG=quiet|info|debug sets log verbosity.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <tuple>

#include "CLI11.hpp"
#include "json.hpp"
#include "sgpose/checkpoint.hpp"
#include "sgpose/error.hpp"
#include "sgpose/gradcheck.hpp"
#include "sgpose/train_eval.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sgpose;

namespace {

// ---------------------------------------------------------------------------
// Logging

enum class LogLevel { kQuiet, kInfo, kDebug };

LogLevel log_level() {
  const char* env = std::getenv("SGPOSE_LOG");
  const std::string v = env ? env : "info";
  if (v == "quiet" || v == "error") return LogLevel::kQuiet;
  if (v == "info" || v.empty()) return LogLevel::kInfo;
  if (v == "debug") return LogLevel::kDebug;
  throw UsageError("SGPOSE_LOG must be quiet, info or debug, got '" + v + "'");
}

std::ostream* log_stream(LogLevel min) { return log_level() >= min ? &std::cerr : nullptr; }

void log(LogLevel min, const std::string& msg) {
  if (auto* s = log_stream(min)) *s << msg << '\n';
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

// Writes to `path`, or to stdout when it is empty or "-".
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    write_file(path, text);
    log(LogLevel::kInfo, "wrote " + path);
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shared flag groups

struct ModelFlags {
  std::string features = "bbox+pose";
  ModelConfig config;

  void add(CLI::App* app, bool with_features = true) {
    if (with_features) app->add_option("--features", features, "bbox, bbox+pose or bbox+angle");
    app->add_option("--embed-dim", config.embed_dim, "embedding width");
    app->add_option("--hidden-dim", config.hidden_dim, "recurrent state width");
    app->add_option("--latent-dim", config.latent_dim, "latent width");
    app->add_option("--dropout", config.dropout, "dropout on the pose branch");
    app->add_option("--k-samples", config.k_samples, "latent samples stored with the model");
  }

  ModelConfig resolve(const DatasetManifest& m) const {
    ModelConfig c = config;
    c.features = parse_feature_mode(features);
    c.obs_len = m.obs_len;
    c.pred_len = m.pred_len;
    c.validate();
    return c;
  }
};

struct TrainFlags {
  TrainOptions o;

  void add(CLI::App* app, bool with_seed = true) {
    app->add_option("--epochs", o.epochs, "training epochs");
    app->add_option("--batch-size", o.batch_size, "samples per step");
    app->add_option("--lr", o.lr, "Adam learning rate");
    app->add_option("--lr-final-fraction", o.lr_final_fraction, "cosine decay floor as a fraction of --lr");
    if (with_seed) app->add_option("--seed", o.seed, "training seed");
    app->add_option("--goal-weight", o.weights.goal, "goal loss weight");
    app->add_option("--kl-weight", o.weights.kl, "KL loss weight");
    app->add_option("--kl-warmup", o.kl_warmup_epochs, "epochs of linear KL warm-up");
    app->add_option("--patience", o.patience, "early stopping patience in epochs, 0 disables");
    app->add_option("--train-k", o.train_k, "latent samples per training example");
    app->add_option("--clip-norm", o.clip_norm, "global gradient norm clip, 0 disables");
  }
};

// Pose modes need every observed frame to carry keypoints.
void check_dataset_features(const ModelConfig& c, const DatasetManifest& m) {
  if (c.uses_pose() && !m.require_pose) {
    throw ConfigError("features " + to_string(c.features) +
                      " need a dataset prepared with pose filtering; this one was prepared with --no-require-pose");
  }
}

void check_windows(const ModelConfig& c, const DatasetManifest& m) {
  if (c.obs_len != m.obs_len || c.pred_len != m.pred_len) {
    throw ConfigError("checkpoint expects " + std::to_string(c.obs_len) + "+" + std::to_string(c.pred_len) +
                      " frame windows but the dataset has " + std::to_string(m.obs_len) + "+" +
                      std::to_string(m.pred_len));
  }
}

// ---------------------------------------------------------------------------
// Prediction files: one JSON object per window.

using WindowKey = std::tuple<std::string, std::string, int, bool>;

WindowKey key_of(const Provenance& p) { return {p.video_id, p.track_id, p.start_frame, p.flipped}; }

std::string format_prediction(const TrajectorySample& s, const std::vector<std::vector<BoundingBox>>& cands) {
  json boxes = json::array();
  for (const auto& seq : cands) {
    json frames = json::array();
    for (const auto& b : seq) frames.push_back({b.x_min, b.y_min, b.x_max, b.y_max});
    boxes.push_back(std::move(frames));
  }
  const json j = {{"video_id", s.provenance.video_id},
                  {"track_id", s.provenance.track_id},
                  {"start_frame", s.provenance.start_frame},
                  {"flipped", s.provenance.flipped},
                  {"first_predicted_frame", s.provenance.start_frame + s.obs_len()},
                  {"k", cands.size()},
                  {"boxes", std::move(boxes)}};
  return j.dump();
}

std::map<WindowKey, std::vector<std::vector<BoundingBox>>> read_predictions(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::map<WindowKey, std::vector<std::vector<BoundingBox>>> out;
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      std::vector<std::vector<BoundingBox>> cands;
      for (const auto& seq : j.at("boxes")) {
        std::vector<BoundingBox> frames;
        for (const auto& b : seq) {
          frames.push_back({b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(),
                            b.at(3).get<double>()});
        }
        cands.push_back(std::move(frames));
      }
      if (cands.empty()) throw DataError("no candidates");
      const WindowKey key{j.at("video_id").get<std::string>(), j.at("track_id").get<std::string>(),
                          j.at("start_frame").get<int>(), j.value("flipped", false)};
      if (!out.emplace(key, std::move(cands)).second) throw DataError("duplicate window");
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Subcommands

struct SynthCmd {
  SynthOptions o;
  std::uint64_t seed = 0;
  std::string out = "data/synth.jsonl";

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("synth", "generate synthetic pedestrian tracks as JSONL");
    c->add_option("--out", out, "output JSONL");
    c->add_option("--tracks", o.tracks, "number of tracks");
    c->add_option("--seed", seed, "generator seed");
    c->add_option("--width", o.width, "frame width in pixels");
    c->add_option("--height", o.height, "frame height in pixels");
    c->add_option("--lean-lead", o.lean_lead, "frames of lean before each turn");
    c->add_option("--track-len", o.track_len, "frames per track");
    c->add_option("--missing-pose-rate", o.missing_pose_rate, "per-frame probability of null keypoints");
    c->callback([this] { run(); });
  }

  void run() {
    if (o.tracks < 1) throw UsageError("--tracks must be >= 1");
    if (o.width < 1 || o.height < 1) throw UsageError("--width and --height must be positive");
    Rng rng(seed);
    const auto anns = synth_generate(o, rng);
    if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
    write_annotations(out, anns);
    std::cout << "tracks " << o.tracks << " frames " << anns.size() << " -> " << out << '\n';
  }
};

struct PrepareCmd {
  PrepareOptions o;
  std::string input = "data/synth.jsonl";
  std::string out = "data/prepared";
  bool no_require_pose = false;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("prepare", "window annotations into a train/val/test dataset");
    c->add_option("--input", input, "annotation JSONL")->check(CLI::ExistingFile);
    c->add_option("--out", out, "output dataset directory");
    c->add_option("--obs-len", o.window.obs_len, "observed frames");
    c->add_option("--pred-len", o.window.pred_len, "predicted frames");
    c->add_option("--stride", o.window.stride, "window stride");
    c->add_option("--min-confidence", o.window.min_confidence, "mean keypoint confidence for a pose frame");
    c->add_flag("--no-require-pose", no_require_pose, "keep windows with missing pose");
    c->add_flag("--flip-augment", o.flip_augment, "add mirrored training samples");
    c->add_flag("--flip-all-splits", o.flip_all_splits, "also mirror val and test");
    c->add_option("--train-fraction", o.train_fraction, "share of videos in train");
    c->add_option("--val-fraction", o.val_fraction, "share of videos in val");
    c->add_option("--split-seed", o.split_seed, "video split seed");
    c->callback([this] { run(); });
  }

  void run() {
    o.window.require_pose = !no_require_pose;
    const IngestResult in = ingest(input);
    for (const auto& issue : in.issues) log(LogLevel::kDebug, input + ":" + std::to_string(issue.line) + ": " + issue.message);
    if (in.rejected() > 0) log(LogLevel::kInfo, "rejected " + std::to_string(in.rejected()) + " lines of " + input);
    const PrepareReport r = prepare_dataset(in.annotations, o, out, in.rejected());
    std::cout << "annotations " << r.annotations << "\nrejected_lines " << r.rejected_lines << "\nclamped "
              << in.clamped << "\ncandidate_windows " << r.candidate_windows << "\ndropped_for_pose "
              << r.dropped_for_pose << "\nretained_windows " << r.retained_windows << "\ntrain " << r.train
              << "\nval " << r.val << "\ntest " << r.test << "\nconfig_hash " << r.config_hash << '\n';
  }
};

struct TrainCmd {
  ModelFlags model;
  TrainFlags train;
  std::string data = "data/prepared";
  std::string out = "runs/model";

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("train", "train a model and write a checkpoint plus curve.csv");
    c->add_option("--data", data, "prepared dataset directory")->check(CLI::ExistingDirectory);
    c->add_option("--out", out, "checkpoint directory");
    model.add(c);
    train.add(c);
    c->callback([this] { run(); });
  }

  void run() {
    const DatasetManifest m = read_manifest(data);
    const ModelConfig cfg = model.resolve(m);
    check_dataset_features(cfg, m);
    const auto train_set = read_split(data, Split::kTrain);
    const auto val_set = read_split(data, Split::kVal);
    const std::string hash = run_hash(cfg, train.o, m.config_hash);
    log(LogLevel::kInfo, "train " + std::to_string(train_set.size()) + " val " + std::to_string(val_set.size()) +
                             " features " + to_string(cfg.features) + " config_hash " + hash);
    TrainResult r = sgpose::train(cfg, train_set, val_set, train.o, log_stream(LogLevel::kInfo));
    save_checkpoint(out, Checkpoint{std::move(r.model), hash, r.best_epoch});
    write_file(fs::path(out) / "curve.csv", curve_csv(r.curve));
    std::cout << "best_epoch " << r.best_epoch << "\nbest_val_mse " << format_number(r.best_val)
              << "\nconfig_hash " << hash << "\ncheckpoint " << out << '\n';
  }
};

struct EvaluateCmd {
  std::string checkpoint;
  std::string predictions;
  std::string data = "data/prepared";
  std::string split = "test";
  std::string corner = "top_left";
  std::string out;
  PredictOptions po;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("evaluate", "best-of-K metrics on a dataset split");
    auto* ck = c->add_option("--checkpoint", checkpoint, "checkpoint directory")->check(CLI::ExistingDirectory);
    auto* pr = c->add_option("--predictions", predictions, "score a predictions JSONL instead of a checkpoint")
                   ->check(CLI::ExistingFile);
    ck->excludes(pr);
    c->add_option("--data", data, "prepared dataset directory")->check(CLI::ExistingDirectory);
    c->add_option("--split", split, "train, val or test");
    c->add_option("--k", po.k, "latent samples per window");
    c->add_option("--seed", po.seed, "sampling seed");
    c->add_flag("--deterministic", po.deterministic_latent, "use the latent mean instead of sampling");
    c->add_option("--batch-size", po.batch_size, "windows per forward pass");
    c->add_option("--corner", corner, "corner metric point: top_left or centroid");
    c->add_option("--out", out, "metrics CSV, stdout when omitted");
    c->callback([this] { run(); });
  }

  void run() {
    if (checkpoint.empty() == predictions.empty()) throw UsageError("evaluate needs --checkpoint or --predictions");
    const CornerPoint cp = parse_corner(corner);
    const Split sp = parse_split(split);
    const DatasetManifest m = read_manifest(data);
    const auto samples = read_split(data, sp);
    log(LogLevel::kInfo, "corner metrics track the " + to_string(cp) + " point");
    MetricsReport r;
    if (!checkpoint.empty()) {
      const Checkpoint ck = load_checkpoint(checkpoint);
      check_windows(ck.model.config, m);
      check_dataset_features(ck.model.config, m);
      r = evaluate(ck.model, samples, po, cp);
      r.config_hash = ck.config_hash;
    } else {
      if (samples.empty()) throw DataError("evaluate: split " + split + " has no samples");
      const auto preds = read_predictions(predictions);
      MetricAccumulator acc(m.pred_len, cp);
      for (const auto& s : samples) {
        const auto it = preds.find(key_of(s.provenance));
        if (it == preds.end()) {
          throw DataError(predictions + " has no prediction for " + s.provenance.video_id + "/" +
                          s.provenance.track_id + " frame " + std::to_string(s.provenance.start_frame));
        }
        for (const auto& seq : it->second) {
          if (seq.size() != s.future_boxes.size()) throw DataError(predictions + ": wrong prediction length");
        }
        acc.add(it->second[best_candidate(it->second, s.future_boxes)], s.future_boxes);
      }
      r = acc.report();
      std::ifstream in(predictions, std::ios::binary);
      r.config_hash = fnv1a_hex(std::string(std::istreambuf_iterator<char>(in), {}));
    }
    emit(out, metrics_csv(r, split));
  }
};

struct AblateCmd {
  ModelFlags model;
  TrainFlags train;
  std::string data = "data/prepared";
  std::string modes = "bbox,bbox+pose,bbox+angle";
  std::string seeds = "1,2,3,4,5";
  std::string corner = "top_left";
  std::string out;
  PredictOptions po;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("ablate", "train and test every feature mode over several seeds");
    c->add_option("--data", data, "prepared dataset directory")->check(CLI::ExistingDirectory);
    c->add_option("--modes", modes, "comma-separated feature modes");
    c->add_option("--seeds", seeds, "comma-separated seeds");
    c->add_option("--k", po.k, "latent samples per test window");
    c->add_option("--corner", corner, "corner metric point: top_left or centroid");
    c->add_option("--out", out, "ablation CSV, stdout when omitted");
    model.add(c, false);
    train.add(c, false);
    c->callback([this] { run(); });
  }

  void run() {
    AblationOptions ao;
    for (const auto& m : split_list(modes)) ao.modes.push_back(parse_feature_mode(m));
    for (const auto& s : split_list(seeds)) {
      try {
        ao.seeds.push_back(std::stoull(s));
      } catch (const std::exception&) {
        throw UsageError("--seeds: '" + s + "' is not a seed");
      }
    }
    const DatasetManifest m = read_manifest(data);
    for (FeatureMode f : ao.modes) {
      ModelConfig c = model.config;
      c.features = f;
      check_dataset_features(c, m);
    }
    ao.base = model.config;
    ao.train = train.o;
    ao.eval = po;
    ao.corner = parse_corner(corner);
    const auto rows = ablation_run(data, ao, log_stream(LogLevel::kInfo));
    emit(out, ablation_csv(rows));
  }
};

struct PredictCmd {
  std::string checkpoint = "runs/model";
  std::string input;
  std::string data;
  std::string split = "test";
  std::string out;
  int stride = 1;
  PredictOptions po;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("predict", "predict future boxes for observation windows");
    c->add_option("--checkpoint", checkpoint, "checkpoint directory")->check(CLI::ExistingDirectory);
    auto* in = c->add_option("--input", input, "annotation JSONL to cut observation windows from")
                   ->check(CLI::ExistingFile);
    auto* d = c->add_option("--data", data, "prepared dataset directory")->check(CLI::ExistingDirectory);
    in->excludes(d);
    c->add_option("--split", split, "split to read with --data");
    c->add_option("--stride", stride, "window stride with --input");
    c->add_option("--k", po.k, "latent samples per window");
    c->add_option("--seed", po.seed, "sampling seed");
    c->add_flag("--deterministic", po.deterministic_latent, "use the latent mean instead of sampling");
    c->add_option("--batch-size", po.batch_size, "windows per forward pass");
    c->add_option("--out", out, "predictions JSONL, stdout when omitted");
    c->callback([this] { run(); });
  }

  void run() {
    if (input.empty() == data.empty()) throw UsageError("predict needs --input or --data");
    const Checkpoint ck = load_checkpoint(checkpoint);
    std::vector<TrajectorySample> windows;
    if (!input.empty()) {
      const IngestResult in = ingest(input);
      if (in.rejected() > 0) log(LogLevel::kInfo, "rejected " + std::to_string(in.rejected()) + " lines of " + input);
      WindowOptions wo;
      wo.obs_len = ck.model.config.obs_len;
      wo.pred_len = 0;
      wo.stride = stride;
      wo.require_pose = ck.model.config.uses_pose();
      windows = build_samples(in.annotations, wo);
    } else {
      const DatasetManifest m = read_manifest(data);
      check_windows(ck.model.config, m);
      check_dataset_features(ck.model.config, m);
      windows = read_split(data, parse_split(split));
    }
    log(LogLevel::kInfo, std::to_string(windows.size()) + " observation windows");
    std::string text;
    if (!windows.empty()) {
      const auto preds = predict_samples(ck.model, windows, po);
      for (std::size_t i = 0; i < windows.size(); ++i) text += format_prediction(windows[i], preds[i]) + '\n';
    }
    emit(out, text);
  }
};

struct GradcheckCmd {
  GradcheckOptions o;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("gradcheck", "finite-difference check of every model gradient");
    c->add_option("--seed", o.first_seed, "first seed");
    c->add_option("--seeds", o.seeds, "number of seeds, cycling through feature modes");
    c->add_option("--tolerance", o.tolerance, "maximum relative error");
    c->add_option("--step", o.step, "central difference step");
    c->callback([this] { run(); });
  }

  void run() {
    const GradcheckReport r = run_gradcheck(o);
    for (const auto& s : r.seeds) {
      log(LogLevel::kInfo, "seed " + std::to_string(s.seed) + " " + to_string(s.features) + " max_rel " +
                               format_number(s.max_rel) + " at " + s.worst + " checked " +
                               std::to_string(s.checked) + " skipped " + std::to_string(s.skipped));
    }
    std::cout << "seeds " << r.seeds.size() << "\nchecked " << r.checked << "\nskipped " << r.skipped
              << "\nmax_rel_err " << format_number(r.max_rel) << "\ntolerance " << format_number(r.tolerance)
              << "\nseconds " << format_number(r.seconds) << '\n'
              << (r.passed() ? "PASS" : "FAIL") << '\n';
    if (!r.passed()) throw Error("gradient check failed: max relative error " + format_number(r.max_rel));
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SGNetPose+ trajectory prediction"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  SynthCmd synth;
  PrepareCmd prepare;
  TrainCmd train;
  EvaluateCmd evaluate;
  AblateCmd ablate;
  PredictCmd predict;
  GradcheckCmd gradcheck;
  synth.add(app);
  prepare.add(app);
  train.add(app);
  evaluate.add(app);
  ablate.add(app);
  predict.add(app);
  gradcheck.add(app);
  try {
    log_level();  // reject a bad SGPOSE_LOG before doing any work
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kUsage);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kInternal);
  }
  return 0;
}
