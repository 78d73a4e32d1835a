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

#include "sgpose/pose_features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sgpose/error.hpp"

namespace sgpose {

namespace {

constexpr std::array<std::string_view, kNumJoints> kJointNames = {
    "nose",       "left_shoulder", "right_shoulder", "left_elbow", "right_elbow", "left_wrist", "right_wrist",
    "left_hip",   "right_hip",     "left_knee",      "right_knee", "left_ankle",  "right_ankle",
};

constexpr std::array<std::string_view, kNumAngles> kAngleNames = {
    "neck_l",  "neck_r",  "armpit_l", "armpit_r", "elbow_l", "elbow_r",
    "torso_l", "torso_r", "thigh_l",  "thigh_r",  "knee_l",  "knee_r",
};

void check_dims(double w, double h) {
  if (!(w > 0.0) || !(h > 0.0)) throw ConfigError("frame dimensions must be positive");
}

}  // namespace

std::string_view joint_name(int joint) { return kJointNames.at(static_cast<std::size_t>(joint)); }
std::string_view angle_name(int slot) { return kAngleNames.at(static_cast<std::size_t>(slot)); }

int mirror_joint(int joint) {
  if (joint == kNose) return kNose;
  // Left joints are odd, right joints even.
  return joint % 2 == 1 ? joint + 1 : joint - 1;
}

double Keypoints13::mean_confidence() const {
  double s = 0.0;
  for (const auto& p : points) s += p.confidence;
  return s / static_cast<double>(kNumJoints);
}

bool BodyAngles12::all_valid() const {
  return std::all_of(valid.begin(), valid.end(), [](bool v) { return v; });
}

double vertex_angle(const Keypoint& vertex, const Keypoint& a, const Keypoint& b, bool* valid) {
  const double ax = a.x - vertex.x, ay = a.y - vertex.y;
  const double bx = b.x - vertex.x, by = b.y - vertex.y;
  const double la = std::hypot(ax, ay), lb = std::hypot(bx, by);
  if (la < kMinRayLength || lb < kMinRayLength) {
    if (valid) *valid = false;
    return 180.0;
  }
  if (valid) *valid = true;
  const double c = std::clamp((ax * bx + ay * by) / (la * lb), -1.0, 1.0);
  return std::acos(c) * (180.0 / std::numbers::pi);
}

BodyAngles12 compute_angles(const Keypoints13& kp) {
  BodyAngles12 out;
  auto set = [&](int slot, const Keypoint& v, const Keypoint& a, const Keypoint& b) {
    bool ok = true;
    out.degrees[static_cast<std::size_t>(slot)] = vertex_angle(v, a, b, &ok);
    out.valid[static_cast<std::size_t>(slot)] = ok;
  };
  const Keypoint mid{0.5 * (kp[kLeftShoulder].x + kp[kRightShoulder].x),
                     0.5 * (kp[kLeftShoulder].y + kp[kRightShoulder].y), 1.0};

  set(kNeckL, mid, kp[kNose], kp[kLeftShoulder]);
  set(kNeckR, mid, kp[kNose], kp[kRightShoulder]);
  set(kArmpitL, kp[kLeftShoulder], kp[kLeftElbow], kp[kRightShoulder]);
  set(kArmpitR, kp[kRightShoulder], kp[kRightElbow], kp[kLeftShoulder]);
  set(kElbowL, kp[kLeftElbow], kp[kLeftWrist], kp[kLeftShoulder]);
  set(kElbowR, kp[kRightElbow], kp[kRightWrist], kp[kRightShoulder]);
  set(kTorsoL, kp[kLeftHip], kp[kLeftShoulder], kp[kLeftKnee]);
  set(kTorsoR, kp[kRightHip], kp[kRightShoulder], kp[kRightKnee]);
  set(kThighL, kp[kLeftHip], kp[kLeftKnee], kp[kRightHip]);
  set(kThighR, kp[kRightHip], kp[kRightKnee], kp[kLeftHip]);
  set(kKneeL, kp[kLeftKnee], kp[kLeftAnkle], kp[kLeftHip]);
  set(kKneeR, kp[kRightKnee], kp[kRightAnkle], kp[kRightHip]);
  return out;
}

double quantize_coordinate(double v) { return std::round(v / kCoordinateQuantum) * kCoordinateQuantum; }

Keypoints13 flip_keypoints(const Keypoints13& kp, double frame_width) {
  if (!(frame_width > 0.0)) throw ConfigError("flip: frame width must be positive");
  Keypoints13 out;
  for (int j = 0; j < static_cast<int>(kNumJoints); ++j) {
    const Keypoint& src = kp[j];
    out[mirror_joint(j)] = Keypoint{frame_width - src.x, src.y, src.confidence};
  }
  return out;
}

BoundingBox flip_box(const BoundingBox& box, double frame_width) {
  if (!(frame_width > 0.0)) throw ConfigError("flip: frame width must be positive");
  return BoundingBox{frame_width - box.x_max, box.y_min, frame_width - box.x_min, box.y_max};
}

Flipped flip_horizontal(const Keypoints13& kp, const BoundingBox& box, double frame_width) {
  return Flipped{flip_keypoints(kp, frame_width), flip_box(box, frame_width)};
}

BodyAngles12 mirror_angles(const BodyAngles12& angles) {
  BodyAngles12 out;
  for (std::size_t s = 0; s < kNumAngles; s += 2) {
    out.degrees[s] = angles.degrees[s + 1];
    out.degrees[s + 1] = angles.degrees[s];
    out.valid[s] = angles.valid[s + 1];
    out.valid[s + 1] = angles.valid[s];
  }
  return out;
}

std::array<double, kBoxFeatures> normalize_box(const BoundingBox& box, double frame_width, double frame_height) {
  check_dims(frame_width, frame_height);
  return {box.x_min / frame_width, box.y_min / frame_height, box.x_max / frame_width, box.y_max / frame_height};
}

BoundingBox denormalize_box(const std::array<double, kBoxFeatures>& v, double frame_width, double frame_height) {
  check_dims(frame_width, frame_height);
  return BoundingBox{v[0] * frame_width, v[1] * frame_height, v[2] * frame_width, v[3] * frame_height};
}

std::array<double, kKeypointFeatures> normalize_keypoints(const Keypoints13& kp, double frame_width,
                                                          double frame_height) {
  check_dims(frame_width, frame_height);
  std::array<double, kKeypointFeatures> out{};
  for (std::size_t j = 0; j < kNumJoints; ++j) {
    out[2 * j] = kp.points[j].x / frame_width;
    out[2 * j + 1] = kp.points[j].y / frame_height;
  }
  return out;
}

std::array<double, kAngleFeatures> normalize_angles(const BodyAngles12& angles) {
  std::array<double, kAngleFeatures> out{};
  for (std::size_t s = 0; s < kNumAngles; ++s) out[s] = angles.degrees[s] / 180.0;
  return out;
}

}  // namespace sgpose
