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

#include "sgpose/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <tuple>

#include "json.hpp"
#include "sgpose/error.hpp"

namespace sgpose {

using nlohmann::json;
namespace fs = std::filesystem;

std::string to_string(FeatureMode mode) {
  switch (mode) {
    case FeatureMode::kBox:
      return "bbox";
    case FeatureMode::kBoxPose:
      return "bbox+pose";
    case FeatureMode::kBoxAngle:
      return "bbox+angle";
  }
  return "?";
}

FeatureMode parse_feature_mode(const std::string& s) {
  if (s == "bbox") return FeatureMode::kBox;
  if (s == "bbox+pose") return FeatureMode::kBoxPose;
  if (s == "bbox+angle") return FeatureMode::kBoxAngle;
  throw ConfigError("unknown feature mode '" + s + "' (expected bbox, bbox+pose or bbox+angle)");
}

int pose_width(FeatureMode mode) {
  switch (mode) {
    case FeatureMode::kBox:
      return 0;
    case FeatureMode::kBoxPose:
      return static_cast<int>(kKeypointFeatures);
    case FeatureMode::kBoxAngle:
      return static_cast<int>(kAngleFeatures);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Wire format

namespace {

double finite_number(const json& v, const char* what) {
  if (!v.is_number()) throw DataError(std::string(what) + " must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw DataError(std::string(what) + " must be finite");
  return d;
}

json box_json(const BoundingBox& b) { return json::array({b.x_min, b.y_min, b.x_max, b.y_max}); }

BoundingBox box_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) throw DataError("bbox must be an array of 4 numbers");
  return BoundingBox{finite_number(j[0], "bbox"), finite_number(j[1], "bbox"), finite_number(j[2], "bbox"),
                     finite_number(j[3], "bbox")};
}

json keypoints_json(const std::optional<Keypoints13>& kp) {
  if (!kp) return nullptr;
  json arr = json::array();
  for (const auto& p : kp->points) arr.push_back(json::array({p.x, p.y, p.confidence}));
  return arr;
}

std::optional<Keypoints13> keypoints_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  if (!j.is_array() || j.size() != kNumJoints) throw DataError("keypoints must be null or 13 [x, y, confidence] triples");
  Keypoints13 kp;
  for (std::size_t i = 0; i < kNumJoints; ++i) {
    const json& t = j[i];
    if (!t.is_array() || t.size() != 3) throw DataError("keypoint " + std::to_string(i) + " must be [x, y, confidence]");
    kp.points[i] = Keypoint{finite_number(t[0], "keypoint x"), finite_number(t[1], "keypoint y"),
                            finite_number(t[2], "keypoint confidence")};
    if (kp.points[i].confidence < 0.0 || kp.points[i].confidence > 1.0) {
      throw DataError("keypoint confidence must lie in [0, 1]");
    }
  }
  return kp;
}

const std::set<std::string> kFields = {"video_id", "frame", "width", "height", "track_id", "bbox", "keypoints"};

int integer_field(const json& j, const char* name) {
  const json& v = j.at(name);
  if (!v.is_number_integer()) throw DataError(std::string(name) + " must be an integer");
  return v.get<int>();
}

std::string string_field(const json& j, const char* name) {
  const json& v = j.at(name);
  if (!v.is_string()) throw DataError(std::string(name) + " must be a string");
  return v.get<std::string>();
}

bool clamp_into(double& v, double hi) {
  const double c = std::clamp(v, 0.0, hi);
  const bool changed = c != v;
  v = c;
  return changed;
}

}  // namespace

FrameAnnotation parse_annotation(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw DataError("record must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!kFields.contains(key)) throw DataError("unknown field '" + key + "'");
  }
  for (const auto& f : kFields) {
    if (!j.contains(f)) throw DataError("missing field '" + f + "'");
  }
  FrameAnnotation a;
  a.video_id = string_field(j, "video_id");
  a.track_id = string_field(j, "track_id");
  a.frame = integer_field(j, "frame");
  a.width = integer_field(j, "width");
  a.height = integer_field(j, "height");
  if (a.frame < 0) throw DataError("frame must be >= 0");
  if (a.width <= 0 || a.height <= 0) throw DataError("width and height must be positive");
  a.box = box_from_json(j.at("bbox"));
  a.keypoints = keypoints_from_json(j.at("keypoints"));
  return a;
}

std::string format_annotation(const FrameAnnotation& a) {
  json j;
  j["video_id"] = a.video_id;
  j["frame"] = a.frame;
  j["width"] = a.width;
  j["height"] = a.height;
  j["track_id"] = a.track_id;
  j["bbox"] = box_json(a.box);
  j["keypoints"] = keypoints_json(a.keypoints);
  return j.dump();
}

IngestResult ingest_lines(std::istream& in) {
  IngestResult r;
  std::set<std::tuple<std::string, std::string, int>> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    FrameAnnotation a;
    try {
      a = parse_annotation(line);
    } catch (const DataError& e) {
      ++r.malformed;
      r.issues.push_back({lineno, e.what()});
      continue;
    }
    if (!a.box.ordered()) {
      ++r.bad_boxes;
      r.issues.push_back({lineno, "bbox ordering violated (x_min <= x_max, y_min <= y_max)"});
      continue;
    }
    if (!seen.insert({a.video_id, a.track_id, a.frame}).second) {
      ++r.malformed;
      r.issues.push_back({lineno, "duplicate (video_id, track_id, frame)"});
      continue;
    }
    const double w = a.width, h = a.height;
    bool clamped = false;
    clamped |= clamp_into(a.box.x_min, w);
    clamped |= clamp_into(a.box.x_max, w);
    clamped |= clamp_into(a.box.y_min, h);
    clamped |= clamp_into(a.box.y_max, h);
    a.box = BoundingBox{quantize_coordinate(a.box.x_min), quantize_coordinate(a.box.y_min),
                        quantize_coordinate(a.box.x_max), quantize_coordinate(a.box.y_max)};
    if (a.keypoints) {
      for (auto& p : a.keypoints->points) {
        clamped |= clamp_into(p.x, w);
        clamped |= clamp_into(p.y, h);
        p.x = quantize_coordinate(p.x);
        p.y = quantize_coordinate(p.y);
      }
    }
    if (clamped) ++r.clamped;
    r.annotations.push_back(std::move(a));
  }
  return r;
}

IngestResult ingest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open input file: " + path.string());
  return ingest_lines(in);
}

void write_annotations(const fs::path& path, const std::vector<FrameAnnotation>& annotations) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& a : annotations) out << format_annotation(a) << '\n';
}

// ---------------------------------------------------------------------------
// Windowing

bool pose_present(const std::optional<Keypoints13>& kp, double min_confidence) {
  return kp.has_value() && kp->mean_confidence() >= min_confidence;
}

bool TrajectorySample::has_pose() const {
  return std::all_of(observed_keypoints.begin(), observed_keypoints.end(),
                     [](const auto& k) { return k.has_value(); });
}

std::vector<TrajectorySample> build_samples(const std::vector<FrameAnnotation>& annotations,
                                            const WindowOptions& options, WindowStats* stats) {
  if (options.obs_len < 1 || options.pred_len < 0) throw ConfigError("obs_len must be >= 1 and pred_len >= 0");
  if (options.stride < 1) throw ConfigError("stride must be >= 1");
  std::map<std::pair<std::string, std::string>, std::vector<const FrameAnnotation*>> tracks;
  for (const auto& a : annotations) tracks[{a.video_id, a.track_id}].push_back(&a);

  const int total = options.obs_len + options.pred_len;
  WindowStats local;
  std::vector<TrajectorySample> out;
  for (auto& [key, frames] : tracks) {
    std::sort(frames.begin(), frames.end(), [](auto* a, auto* b) { return a->frame < b->frame; });
    std::size_t run_start = 0;
    while (run_start < frames.size()) {
      std::size_t run_end = run_start + 1;
      while (run_end < frames.size() && frames[run_end]->frame == frames[run_end - 1]->frame + 1 &&
             frames[run_end]->width == frames[run_start]->width &&
             frames[run_end]->height == frames[run_start]->height) {
        ++run_end;
      }
      for (std::size_t s = run_start; s + static_cast<std::size_t>(total) <= run_end;
           s += static_cast<std::size_t>(options.stride)) {
        ++local.candidate_windows;
        TrajectorySample sample;
        bool pose_ok = true;
        for (int k = 0; k < options.obs_len; ++k) {
          const FrameAnnotation& f = *frames[s + static_cast<std::size_t>(k)];
          sample.observed_boxes.push_back(f.box);
          if (pose_present(f.keypoints, options.min_confidence)) {
            sample.observed_keypoints.push_back(f.keypoints);
          } else {
            sample.observed_keypoints.push_back(std::nullopt);
            pose_ok = false;
          }
        }
        if (options.require_pose && !pose_ok) {
          ++local.dropped_for_pose;
          continue;
        }
        for (int k = options.obs_len; k < total; ++k) {
          sample.future_boxes.push_back(frames[s + static_cast<std::size_t>(k)]->box);
        }
        sample.frame_width = frames[s]->width;
        sample.frame_height = frames[s]->height;
        sample.provenance = Provenance{key.first, key.second, frames[s]->frame, false};
        out.push_back(std::move(sample));
      }
      run_start = run_end;
    }
  }
  if (stats) *stats = local;
  return out;
}

TrajectorySample flip_sample(const TrajectorySample& s) {
  TrajectorySample f = s;
  const double w = s.frame_width;
  for (auto& b : f.observed_boxes) b = flip_box(b, w);
  for (auto& b : f.future_boxes) b = flip_box(b, w);
  for (auto& k : f.observed_keypoints) {
    if (k) k = flip_keypoints(*k, w);
  }
  f.provenance.flipped = !s.provenance.flipped;
  return f;
}

std::vector<TrajectorySample> augment_flip(const std::vector<TrajectorySample>& samples) {
  std::vector<TrajectorySample> out;
  out.reserve(2 * samples.size());
  for (const auto& s : samples) {
    out.push_back(s);
    out.push_back(flip_sample(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Batching

std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, std::size_t batch_size, Rng& rng, bool shuffle) {
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  if (shuffle) rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < n; i += batch_size) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + batch_size)));
  }
  return out;
}

std::vector<double> pose_features(const Keypoints13& kp, FeatureMode mode, int frame_width, int frame_height) {
  switch (mode) {
    case FeatureMode::kBoxPose: {
      const auto v = normalize_keypoints(kp, frame_width, frame_height);
      return {v.begin(), v.end()};
    }
    case FeatureMode::kBoxAngle: {
      const auto v = normalize_angles(compute_angles(kp));
      return {v.begin(), v.end()};
    }
    case FeatureMode::kBox:
      break;
  }
  return {};
}

Batch make_batch(const std::vector<TrajectorySample>& samples, const std::vector<std::size_t>& indices,
                 FeatureMode mode) {
  if (indices.empty()) throw UsageError("make_batch: empty index list");
  const auto& first = samples.at(indices.front());
  const int obs = first.obs_len(), pred = first.pred_len();
  const int pw = pose_width(mode);
  const auto b = static_cast<Eigen::Index>(indices.size());
  Batch batch;
  batch.obs_len = obs;
  batch.pred_len = pred;
  batch.boxes.resize(b, obs * 4);
  batch.targets.resize(b, pred * 4);
  if (pw > 0) batch.pose.resize(b, obs * pw);
  for (Eigen::Index r = 0; r < b; ++r) {
    const std::size_t idx = indices[static_cast<std::size_t>(r)];
    const auto& s = samples.at(idx);
    if (s.obs_len() != obs || s.pred_len() != pred) throw DataError("make_batch: samples disagree on window lengths");
    const double w = s.frame_width, h = s.frame_height;
    for (int t = 0; t < obs; ++t) {
      const auto v = normalize_box(s.observed_boxes[static_cast<std::size_t>(t)], w, h);
      for (int c = 0; c < 4; ++c) batch.boxes(r, t * 4 + c) = static_cast<float>(v[static_cast<std::size_t>(c)]);
      if (pw > 0) {
        const auto& kp = s.observed_keypoints[static_cast<std::size_t>(t)];
        if (!kp) {
          throw DataError("sample " + s.provenance.video_id + "/" + s.provenance.track_id + "@" +
                          std::to_string(s.provenance.start_frame) + " lacks pose data required by feature mode " +
                          to_string(mode));
        }
        const auto f = pose_features(*kp, mode, s.frame_width, s.frame_height);
        for (int c = 0; c < pw; ++c) batch.pose(r, t * pw + c) = static_cast<float>(f[static_cast<std::size_t>(c)]);
      }
    }
    for (int t = 0; t < pred; ++t) {
      const auto v = normalize_box(s.future_boxes[static_cast<std::size_t>(t)], w, h);
      for (int c = 0; c < 4; ++c) batch.targets(r, t * 4 + c) = static_cast<float>(v[static_cast<std::size_t>(c)]);
    }
    batch.frame_width.push_back(s.frame_width);
    batch.frame_height.push_back(s.frame_height);
    batch.sample_index.push_back(idx);
  }
  return batch;
}

std::vector<Batch> make_batches(const std::vector<TrajectorySample>& samples, std::size_t batch_size, Rng& rng,
                                bool shuffle, FeatureMode mode) {
  std::vector<Batch> out;
  for (const auto& idx : batch_indices(samples.size(), batch_size, rng, shuffle)) {
    out.push_back(make_batch(samples, idx, mode));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic pedestrians

namespace {

struct TemplateJoint {
  double fx;  // fraction of box width
  double fy;  // fraction of box height
};

// Upright frontal skeleton in box-relative coordinates.
constexpr std::array<TemplateJoint, kNumJoints> kTemplate = {{
    {0.50, 0.08},                  // nose
    {0.28, 0.20}, {0.72, 0.20},    // shoulders
    {0.22, 0.35}, {0.78, 0.35},    // elbows
    {0.22, 0.48}, {0.78, 0.48},    // wrists
    {0.38, 0.52}, {0.62, 0.52},    // hips
    {0.38, 0.73}, {0.62, 0.73},    // knees
    {0.38, 0.95}, {0.62, 0.95},    // ankles
}};

int uniform_int(Rng& rng, int lo, int hi) {
  if (hi <= lo) return lo;
  return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

// Even multiple of the coordinate quantum, so half-extents stay on the grid.
double quantize_extent(double v) { return 2.0 * quantize_coordinate(0.5 * v); }

struct PlannedEvent {
  SynthEvent event;
  double heading_change = 0.0;
  int stop_len = 0;
};

}  // namespace

std::vector<SynthTrack> synth_tracks(const SynthOptions& o, Rng& rng) {
  if (o.tracks < 1) throw ConfigError("synth: tracks must be >= 1");
  if (o.width <= 0 || o.height <= 0) throw ConfigError("synth: frame dimensions must be positive");
  if (o.track_len < 2) throw ConfigError("synth: track_len must be >= 2");
  if (o.lean_lead < 1) throw ConfigError("synth: lean_lead must be >= 1");
  const double W = o.width, H = o.height;
  const double deg = std::numbers::pi / 180.0;
  std::vector<SynthTrack> out;
  for (int i = 0; i < o.tracks; ++i) {
    Rng r = rng.fork();
    SynthTrack track;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "synth_%05d", i);
    track.video_id = buf;
    track.track_id = "ped_0";

    const double h0 = r.uniform(140.0, 240.0);
    const double size_phase = r.uniform(0.0, 2.0 * std::numbers::pi);
    double cx = quantize_coordinate(r.uniform(0.3 * W, 0.7 * W));
    double cy = quantize_coordinate(r.uniform(0.45 * H, 0.6 * H));
    const double speed = r.uniform(1.2, 2.8);
    double heading = (r.uniform() < 0.5 ? 0.0 : std::numbers::pi) + r.uniform(-0.3, 0.3);
    double gait = r.uniform(0.0, 2.0 * std::numbers::pi);

    // Plan events up front so lean can precede each turn.
    std::vector<PlannedEvent> plan;
    {
      int f = uniform_int(r, o.first_event_min, o.first_event_max);
      double hd = heading;
      while (f < o.track_len) {
        PlannedEvent p;
        p.event.frame = f;
        if (r.uniform() < o.stop_fraction) {
          p.event.kind = SynthEventKind::kStop;
          p.stop_len = uniform_int(r, 10, 25);
        } else {
          p.event.kind = SynthEventKind::kTurn;
          const double mag = r.uniform(o.turn_min_deg, o.turn_max_deg) * deg;
          p.heading_change = r.uniform() < 0.5 ? -mag : mag;
          const double dvx = std::cos(hd + p.heading_change) - std::cos(hd);
          p.event.direction = dvx >= 0.0 ? 1 : -1;
          hd += p.heading_change;
        }
        plan.push_back(p);
        f += uniform_int(r, o.event_gap_min, o.event_gap_max);
      }
    }

    std::vector<double> lean(static_cast<std::size_t>(o.track_len), 0.0);
    const int lead = o.lean_lead;
    for (const auto& p : plan) {
      if (p.event.kind != SynthEventKind::kTurn) continue;
      const int f = p.event.frame;
      for (int t = f - lead; t < f; ++t) {
        if (t >= 0 && t < o.track_len) lean[static_cast<std::size_t>(t)] = p.event.direction * (t - (f - lead) + 1) / double(lead);
      }
      for (int t = f; t < f + lead; ++t) {
        if (t >= 0 && t < o.track_len) lean[static_cast<std::size_t>(t)] = p.event.direction * (1.0 - (t - f + 1) / double(lead));
      }
    }

    std::size_t next_event = 0;
    int stopped_until = -1;
    auto velocity = [&](double hd) {
      return std::pair{quantize_coordinate(speed * std::cos(hd)), quantize_coordinate(0.4 * speed * std::sin(hd))};
    };
    auto [vx, vy] = velocity(heading);

    for (int t = 0; t < o.track_len; ++t) {
      if (t > 0) {
        const bool moving = t > stopped_until;
        if (moving) {
          cx += vx;
          cy += vy;
        }
      }
      // Events at frame t change the motion for steps after t.
      while (next_event < plan.size() && plan[next_event].event.frame == t) {
        const auto& p = plan[next_event];
        if (p.event.kind == SynthEventKind::kTurn) {
          heading += p.heading_change;
          std::tie(vx, vy) = velocity(heading);
        } else {
          stopped_until = t + p.stop_len;
        }
        track.events.push_back(p.event);
        ++next_event;
      }

      const double hgt = quantize_extent(h0 * (1.0 + 0.04 * std::sin(2.0 * std::numbers::pi * t / 90.0 + size_phase)));
      const double wid = quantize_extent(0.41 * hgt);
      BoundingBox box{cx - 0.5 * wid, cy - 0.5 * hgt, cx + 0.5 * wid, cy + 0.5 * hgt};
      if (box.x_min < 0.0 || box.y_min < 0.0 || box.x_max > W || box.y_max > H) break;

      const bool moving_now = t > stopped_until || t == 0;
      if (moving_now && t > 0) gait += 2.0 * std::numbers::pi * std::hypot(vx, vy) / (0.8 * hgt);
      const double swing = std::sin(gait);
      const double lean_px = lean[static_cast<std::size_t>(t)] * 0.2 * hgt;

      FrameAnnotation a;
      a.video_id = track.video_id;
      a.track_id = track.track_id;
      a.frame = t;
      a.width = o.width;
      a.height = o.height;
      a.box = box;
      if (r.uniform() >= o.missing_pose_rate) {
        Keypoints13 kp;
        for (int j = 0; j < static_cast<int>(kNumJoints); ++j) {
          const auto& tj = kTemplate[static_cast<std::size_t>(j)];
          double x = box.x_min + tj.fx * wid;
          const double y = box.y_min + tj.fy * hgt;
          const double side = (j % 2 == 1) ? 1.0 : -1.0;  // left joints odd
          switch (j) {
            case kNose:
              x += 1.2 * lean_px;
              break;
            case kLeftShoulder:
            case kRightShoulder:
              x += lean_px;
              break;
            case kLeftElbow:
            case kRightElbow:
              x += lean_px - side * 0.025 * hgt * swing;
              break;
            case kLeftWrist:
            case kRightWrist:
              x += lean_px - side * 0.05 * hgt * swing;
              break;
            case kLeftKnee:
            case kRightKnee:
              x += side * 0.04 * hgt * swing;
              break;
            case kLeftAnkle:
            case kRightAnkle:
              x += side * 0.08 * hgt * swing;
              break;
            default:
              break;
          }
          kp[j] = Keypoint{quantize_coordinate(std::clamp(x, 0.0, W)), quantize_coordinate(std::clamp(y, 0.0, H)),
                           0.75 + 0.2 * r.uniform()};
        }
        a.keypoints = kp;
      }
      track.frames.push_back(std::move(a));
    }
    track.lean = std::move(lean);
    track.lean.resize(track.frames.size());
    out.push_back(std::move(track));
  }
  return out;
}

std::vector<FrameAnnotation> synth_generate(const SynthOptions& options, Rng& rng) {
  std::vector<FrameAnnotation> out;
  for (auto& t : synth_tracks(options, rng)) {
    for (auto& f : t.frames) out.push_back(std::move(f));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Prepared dataset

std::string to_string(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kVal:
      return "val";
    case Split::kTest:
      return "test";
  }
  return "?";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw ConfigError("unknown split '" + s + "' (expected train, val or test)");
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

json sample_json(const TrajectorySample& s) {
  json j;
  j["video_id"] = s.provenance.video_id;
  j["track_id"] = s.provenance.track_id;
  j["start_frame"] = s.provenance.start_frame;
  j["flipped"] = s.provenance.flipped;
  j["width"] = s.frame_width;
  j["height"] = s.frame_height;
  json ob = json::array(), ok = json::array(), fb = json::array();
  for (const auto& b : s.observed_boxes) ob.push_back(box_json(b));
  for (const auto& k : s.observed_keypoints) ok.push_back(keypoints_json(k));
  for (const auto& b : s.future_boxes) fb.push_back(box_json(b));
  j["observed_boxes"] = std::move(ob);
  j["observed_keypoints"] = std::move(ok);
  j["future_boxes"] = std::move(fb);
  return j;
}

TrajectorySample sample_from_json(const json& j) {
  TrajectorySample s;
  s.provenance.video_id = j.at("video_id").get<std::string>();
  s.provenance.track_id = j.at("track_id").get<std::string>();
  s.provenance.start_frame = j.at("start_frame").get<int>();
  s.provenance.flipped = j.at("flipped").get<bool>();
  s.frame_width = j.at("width").get<int>();
  s.frame_height = j.at("height").get<int>();
  for (const auto& b : j.at("observed_boxes")) s.observed_boxes.push_back(box_from_json(b));
  for (const auto& k : j.at("observed_keypoints")) s.observed_keypoints.push_back(keypoints_from_json(k));
  for (const auto& b : j.at("future_boxes")) s.future_boxes.push_back(box_from_json(b));
  if (s.observed_keypoints.size() != s.observed_boxes.size()) throw DataError("sample keypoint/box count mismatch");
  return s;
}

std::string samples_text(const std::vector<TrajectorySample>& samples) {
  std::string out;
  for (const auto& s : samples) {
    out += sample_json(s).dump();
    out += '\n';
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

}  // namespace

void write_samples(const fs::path& path, const std::vector<TrajectorySample>& samples) {
  write_text(path, samples_text(samples));
}

std::vector<TrajectorySample> read_samples(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open sample file: " + path.string());
  std::vector<TrajectorySample> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(sample_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

PrepareReport prepare_dataset(const std::vector<FrameAnnotation>& annotations, const PrepareOptions& options,
                              const fs::path& out_dir, int rejected_lines) {
  if (options.train_fraction < 0.0 || options.val_fraction < 0.0 ||
      options.train_fraction + options.val_fraction > 1.0) {
    throw ConfigError("split fractions must be non-negative and sum to at most 1");
  }
  WindowStats stats;
  const auto samples = build_samples(annotations, options.window, &stats);

  // Split by video so no video contributes to two splits.
  std::vector<std::string> videos;
  for (const auto& a : annotations) videos.push_back(a.video_id);
  std::sort(videos.begin(), videos.end());
  videos.erase(std::unique(videos.begin(), videos.end()), videos.end());
  Rng split_rng(options.split_seed);
  split_rng.shuffle(std::span<std::string>(videos));
  const auto nv = static_cast<double>(videos.size());
  const auto n_train = static_cast<std::size_t>(std::llround(options.train_fraction * nv));
  const auto n_val = std::min(videos.size() - n_train, static_cast<std::size_t>(std::llround(options.val_fraction * nv)));
  std::map<std::string, Split> assignment;
  for (std::size_t i = 0; i < videos.size(); ++i) {
    assignment[videos[i]] = i < n_train ? Split::kTrain : (i < n_train + n_val ? Split::kVal : Split::kTest);
  }

  std::map<Split, std::vector<TrajectorySample>> parts;
  for (const auto& s : samples) parts[assignment.at(s.provenance.video_id)].push_back(s);
  if (options.flip_augment) {
    parts[Split::kTrain] = augment_flip(parts[Split::kTrain]);
    if (options.flip_all_splits) {
      parts[Split::kVal] = augment_flip(parts[Split::kVal]);
      parts[Split::kTest] = augment_flip(parts[Split::kTest]);
    }
  }

  fs::create_directories(out_dir);
  std::string content;
  for (Split sp : {Split::kTrain, Split::kVal, Split::kTest}) {
    fs::create_directories(out_dir / to_string(sp));
    const std::string text = samples_text(parts[sp]);
    write_text(out_dir / to_string(sp) / "samples.jsonl", text);
    content += text;
  }

  json cfg;
  cfg["obs_len"] = options.window.obs_len;
  cfg["pred_len"] = options.window.pred_len;
  cfg["stride"] = options.window.stride;
  cfg["require_pose"] = options.window.require_pose;
  cfg["min_confidence"] = options.window.min_confidence;
  cfg["flip_augment"] = options.flip_augment;
  cfg["flip_all_splits"] = options.flip_all_splits;
  cfg["train_fraction"] = options.train_fraction;
  cfg["val_fraction"] = options.val_fraction;
  cfg["split_seed"] = options.split_seed;

  PrepareReport rep;
  rep.annotations = static_cast<int>(annotations.size());
  rep.rejected_lines = rejected_lines;
  rep.candidate_windows = stats.candidate_windows;
  rep.dropped_for_pose = stats.dropped_for_pose;
  rep.retained_windows = static_cast<int>(samples.size());
  rep.train = static_cast<int>(parts[Split::kTrain].size());
  rep.val = static_cast<int>(parts[Split::kVal].size());
  rep.test = static_cast<int>(parts[Split::kTest].size());
  rep.config_hash = fnv1a_hex(cfg.dump() + content);

  json m = cfg;
  m["format_version"] = 1;
  m["counts"] = {{"train", rep.train}, {"val", rep.val}, {"test", rep.test}};
  m["windows"] = {{"candidate", rep.candidate_windows},
                  {"dropped_for_pose", rep.dropped_for_pose},
                  {"retained", rep.retained_windows}};
  m["annotations"] = rep.annotations;
  m["rejected_lines"] = rep.rejected_lines;
  m["config_hash"] = rep.config_hash;
  write_text(out_dir / "manifest.json", m.dump(2) + "\n");
  return rep;
}

DatasetManifest read_manifest(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw DataError("no manifest.json in " + dir.string());
  json m;
  try {
    m = json::parse(in);
    DatasetManifest d;
    d.format_version = m.at("format_version").get<int>();
    if (d.format_version != 1) throw DataError("unsupported dataset format version " + std::to_string(d.format_version));
    d.obs_len = m.at("obs_len").get<int>();
    d.pred_len = m.at("pred_len").get<int>();
    d.stride = m.at("stride").get<int>();
    d.require_pose = m.at("require_pose").get<bool>();
    d.min_confidence = m.at("min_confidence").get<double>();
    d.flip_augment = m.at("flip_augment").get<bool>();
    d.flip_all_splits = m.at("flip_all_splits").get<bool>();
    d.train = m.at("counts").at("train").get<int>();
    d.val = m.at("counts").at("val").get<int>();
    d.test = m.at("counts").at("test").get<int>();
    d.config_hash = m.at("config_hash").get<std::string>();
    return d;
  } catch (const json::exception& e) {
    throw DataError("bad manifest in " + dir.string() + ": " + e.what());
  }
}

std::vector<TrajectorySample> read_split(const fs::path& dir, Split split) {
  return read_samples(dir / to_string(split) / "samples.jsonl");
}

}  // namespace sgpose
