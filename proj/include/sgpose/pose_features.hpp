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

#include <array>
#include <cstddef>
#include <string_view>
#include <vector>

namespace sgpose {

// Canonical keypoint order: COCO order with eyes and ears removed.
enum Joint : int {
  kNose = 0,
  kLeftShoulder = 1,
  kRightShoulder = 2,
  kLeftElbow = 3,
  kRightElbow = 4,
  kLeftWrist = 5,
  kRightWrist = 6,
  kLeftHip = 7,
  kRightHip = 8,
  kLeftKnee = 9,
  kRightKnee = 10,
  kLeftAnkle = 11,
  kRightAnkle = 12,
};
inline constexpr std::size_t kNumJoints = 13;

// Angle slots, left/right interleaved.
enum AngleSlot : int {
  kNeckL = 0,
  kNeckR = 1,
  kArmpitL = 2,
  kArmpitR = 3,
  kElbowL = 4,
  kElbowR = 5,
  kTorsoL = 6,
  kTorsoR = 7,
  kThighL = 8,
  kThighR = 9,
  kKneeL = 10,
  kKneeR = 11,
};
inline constexpr std::size_t kNumAngles = 12;

std::string_view joint_name(int joint);
std::string_view angle_name(int slot);

// Index of the mirrored joint (left <-> right); the nose maps to itself.
int mirror_joint(int joint);

struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  double confidence = 0.0;

  bool operator==(const Keypoint&) const = default;
};

struct Keypoints13 {
  std::array<Keypoint, kNumJoints> points{};

  const Keypoint& operator[](int j) const { return points[static_cast<std::size_t>(j)]; }
  Keypoint& operator[](int j) { return points[static_cast<std::size_t>(j)]; }
  double mean_confidence() const;
  bool operator==(const Keypoints13&) const = default;
};

struct BodyAngles12 {
  std::array<double, kNumAngles> degrees{};
  std::array<bool, kNumAngles> valid{};

  bool all_valid() const;
};

struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  bool ordered() const { return x_min <= x_max && y_min <= y_max; }
  double center_x() const { return 0.5 * (x_min + x_max); }
  double center_y() const { return 0.5 * (y_min + y_max); }
  bool operator==(const BoundingBox&) const = default;
};

// Rays shorter than this are degenerate.
inline constexpr double kMinRayLength = 1e-6;

// Unsigned angle in degrees at `vertex` between rays to `a` and `b`. Returns
// 180 and sets `valid` false when either ray is degenerate.
double vertex_angle(const Keypoint& vertex, const Keypoint& a, const Keypoint& b, bool* valid);

BodyAngles12 compute_angles(const Keypoints13& kp);

// Coordinates are kept on a 1/256 px grid. On that grid W - x is exact in
// double precision, so mirroring is an exact involution.
inline constexpr double kCoordinateQuantum = 1.0 / 256.0;
double quantize_coordinate(double v);

struct Flipped {
  Keypoints13 keypoints;
  BoundingBox box;
};

// Mirrors about the vertical axis of a frame of the given width and swaps
// left/right joints.
Keypoints13 flip_keypoints(const Keypoints13& kp, double frame_width);
BoundingBox flip_box(const BoundingBox& box, double frame_width);
Flipped flip_horizontal(const Keypoints13& kp, const BoundingBox& box, double frame_width);

// Swaps left/right angle slots.
BodyAngles12 mirror_angles(const BodyAngles12& angles);

// Normalised features, all in [0, 1] for in-frame inputs.
inline constexpr std::size_t kBoxFeatures = 4;
inline constexpr std::size_t kKeypointFeatures = 2 * kNumJoints;
inline constexpr std::size_t kAngleFeatures = kNumAngles;

std::array<double, kBoxFeatures> normalize_box(const BoundingBox& box, double frame_width, double frame_height);
BoundingBox denormalize_box(const std::array<double, kBoxFeatures>& v, double frame_width, double frame_height);
std::array<double, kKeypointFeatures> normalize_keypoints(const Keypoints13& kp, double frame_width,
                                                          double frame_height);
std::array<double, kAngleFeatures> normalize_angles(const BodyAngles12& angles);

}  // namespace sgpose
