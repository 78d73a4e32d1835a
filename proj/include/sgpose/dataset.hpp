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
#include <optional>
#include <string>
#include <vector>

#include "sgpose/pose_features.hpp"
#include "sgpose/rng.hpp"
#include "sgpose/tensor.hpp"

namespace sgpose {

// Which pose stream, if any, feeds the second encoder.
enum class FeatureMode { kBox, kBoxPose, kBoxAngle };

std::string to_string(FeatureMode mode);
FeatureMode parse_feature_mode(const std::string& s);
// 0 for kBox, 26 for keypoints, 12 for angles.
int pose_width(FeatureMode mode);

struct FrameAnnotation {
  std::string video_id;
  int frame = 0;
  int width = 0;
  int height = 0;
  std::string track_id;
  BoundingBox box;
  std::optional<Keypoints13> keypoints;

  bool operator==(const FrameAnnotation&) const = default;
};

struct IngestIssue {
  int line = 0;
  std::string message;
};

struct IngestResult {
  std::vector<FrameAnnotation> annotations;
  int malformed = 0;     // unparseable or schema-violating lines
  int bad_boxes = 0;     // x_min > x_max or y_min > y_max
  int clamped = 0;       // records with at least one coordinate clamped into the frame
  std::vector<IngestIssue> issues;

  int rejected() const { return malformed + bad_boxes; }
};

// Parses one JSON record. Throws DataError on schema violations; box ordering
// is not checked here.
FrameAnnotation parse_annotation(const std::string& line);
std::string format_annotation(const FrameAnnotation& a);

// Reads line-delimited JSON. Throws DataError if the file cannot be opened;
// bad lines are counted and reported, never fatal.
IngestResult ingest(const std::filesystem::path& path);
IngestResult ingest_lines(std::istream& in);
void write_annotations(const std::filesystem::path& path, const std::vector<FrameAnnotation>& annotations);

struct Provenance {
  std::string video_id;
  std::string track_id;
  int start_frame = 0;
  bool flipped = false;

  bool operator==(const Provenance&) const = default;
};

// One window: obs_len observed frames followed by pred_len future frames.
struct TrajectorySample {
  std::vector<BoundingBox> observed_boxes;
  std::vector<std::optional<Keypoints13>> observed_keypoints;
  std::vector<BoundingBox> future_boxes;
  int frame_width = 0;
  int frame_height = 0;
  Provenance provenance;

  int obs_len() const { return static_cast<int>(observed_boxes.size()); }
  int pred_len() const { return static_cast<int>(future_boxes.size()); }
  bool has_pose() const;
  bool operator==(const TrajectorySample&) const = default;
};

struct WindowOptions {
  int obs_len = 15;
  int pred_len = 45;
  int stride = 1;
  bool require_pose = true;
  double min_confidence = 0.3;
};

struct WindowStats {
  int candidate_windows = 0;   // gap-free windows before pose filtering
  int dropped_for_pose = 0;
};

// Cuts every gap-free window of obs_len + pred_len frames per (video, track).
// Window starts step by `stride` from the beginning of each consecutive run.
// Output is ordered by video id, track id, start frame.
std::vector<TrajectorySample> build_samples(const std::vector<FrameAnnotation>& annotations,
                                            const WindowOptions& options, WindowStats* stats = nullptr);

// True when keypoints are present and their mean confidence reaches the threshold.
bool pose_present(const std::optional<Keypoints13>& kp, double min_confidence);

TrajectorySample flip_sample(const TrajectorySample& s);
// Each input sample followed by its mirror.
std::vector<TrajectorySample> augment_flip(const std::vector<TrajectorySample>& samples);

// Normalised, stacked features for a set of samples. Row r of each tensor
// holds sample r with its frames laid out contiguously.
struct Batch {
  TensorF boxes;      // [B x obs_len*4]
  TensorF pose;       // [B x obs_len*pose_width], empty in kBox mode
  TensorF targets;    // [B x pred_len*4]
  std::vector<int> frame_width;
  std::vector<int> frame_height;
  std::vector<std::size_t> sample_index;
  int obs_len = 0;
  int pred_len = 0;

  Eigen::Index size() const { return boxes.rows(); }
};

// Partitions [0, n) into batches of batch_size (last one may be short).
std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, std::size_t batch_size, Rng& rng, bool shuffle);

Batch make_batch(const std::vector<TrajectorySample>& samples, const std::vector<std::size_t>& indices,
                 FeatureMode mode);

std::vector<Batch> make_batches(const std::vector<TrajectorySample>& samples, std::size_t batch_size, Rng& rng,
                                bool shuffle, FeatureMode mode);

// Per-frame pose feature vector for one sample frame.
std::vector<double> pose_features(const Keypoints13& kp, FeatureMode mode, int frame_width, int frame_height);

// ---------------------------------------------------------------------------
// Synthetic pedestrians

struct SynthOptions {
  int tracks = 200;
  int width = 1920;
  int height = 1080;
  int track_len = 120;
  int lean_lead = 12;              // frames of lean before each turn
  double turn_min_deg = 60.0;
  double turn_max_deg = 110.0;
  int first_event_min = 20;
  int first_event_max = 70;
  int event_gap_min = 35;
  int event_gap_max = 70;
  double stop_fraction = 0.15;     // share of events that are stops rather than turns
  double missing_pose_rate = 0.01; // per-frame probability that keypoints are null
};

enum class SynthEventKind { kTurn, kStop };

struct SynthEvent {
  SynthEventKind kind = SynthEventKind::kTurn;
  int frame = 0;
  int direction = 0;  // sign of the horizontal velocity change for turns
};

struct SynthTrack {
  std::string video_id;
  std::string track_id;
  std::vector<SynthEvent> events;
  std::vector<double> lean;  // per-frame lean in [-1, 1]
  std::vector<FrameAnnotation> frames;
};

std::vector<SynthTrack> synth_tracks(const SynthOptions& options, Rng& rng);
std::vector<FrameAnnotation> synth_generate(const SynthOptions& options, Rng& rng);

// ---------------------------------------------------------------------------
// Prepared dataset directory: train/ val/ test/ sample files plus manifest.json.

enum class Split { kTrain, kVal, kTest };
std::string to_string(Split split);
Split parse_split(const std::string& s);

struct PrepareOptions {
  WindowOptions window;
  bool flip_augment = false;
  bool flip_all_splits = false;
  double train_fraction = 0.7;
  double val_fraction = 0.15;
  std::uint64_t split_seed = 0;
};

struct PrepareReport {
  int annotations = 0;
  int rejected_lines = 0;
  int candidate_windows = 0;
  int dropped_for_pose = 0;
  int retained_windows = 0;
  int train = 0;
  int val = 0;
  int test = 0;
  std::string config_hash;
};

struct DatasetManifest {
  int format_version = 1;
  int obs_len = 0;
  int pred_len = 0;
  int stride = 0;
  bool require_pose = false;
  double min_confidence = 0.0;
  bool flip_augment = false;
  bool flip_all_splits = false;
  int train = 0;
  int val = 0;
  int test = 0;
  std::string config_hash;
};

PrepareReport prepare_dataset(const std::vector<FrameAnnotation>& annotations, const PrepareOptions& options,
                              const std::filesystem::path& out_dir, int rejected_lines = 0);

DatasetManifest read_manifest(const std::filesystem::path& dir);
std::vector<TrajectorySample> read_split(const std::filesystem::path& dir, Split split);
void write_samples(const std::filesystem::path& path, const std::vector<TrajectorySample>& samples);
std::vector<TrajectorySample> read_samples(const std::filesystem::path& path);

// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace sgpose
