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

// Independent angle oracle and random skeleton generators for tests. The
// vertex/ray table is written out from the joint definitions, not shared with
// the library.

#include <array>
#include <cmath>

#include "sgpose/pose_features.hpp"
#include "sgpose/rng.hpp"

namespace oracle {

using sgpose::Keypoint;
using sgpose::Keypoints13;

struct P {
  long double x, y;
};

inline P at(const Keypoints13& kp, int j) { return {kp.points[static_cast<std::size_t>(j)].x, kp.points[static_cast<std::size_t>(j)].y}; }

inline double angle(P v, P a, P b) {
  const long double ax = a.x - v.x, ay = a.y - v.y, bx = b.x - v.x, by = b.y - v.y;
  const long double na = std::sqrt(ax * ax + ay * ay), nb = std::sqrt(bx * bx + by * by);
  if (na < 1e-6L || nb < 1e-6L) return 180.0;
  long double c = (ax * bx + ay * by) / (na * nb);
  if (c > 1) c = 1;
  if (c < -1) c = -1;
  return static_cast<double>(std::acos(c) * 180.0L / 3.141592653589793238462643383279502884L);
}

// neck L/R, armpit L/R, elbow L/R, torso L/R, thigh L/R, knee L/R
inline std::array<double, 12> angles(const Keypoints13& kp) {
  // Joint indices: 0 nose, 1/2 shoulders, 3/4 elbows, 5/6 wrists, 7/8 hips,
  // 9/10 knees, 11/12 ankles (left first).
  const P mid{(at(kp, 1).x + at(kp, 2).x) / 2, (at(kp, 1).y + at(kp, 2).y) / 2};
  std::array<double, 12> out{};
  out[0] = angle(mid, at(kp, 0), at(kp, 1));
  out[1] = angle(mid, at(kp, 0), at(kp, 2));
  out[2] = angle(at(kp, 1), at(kp, 3), at(kp, 2));
  out[3] = angle(at(kp, 2), at(kp, 4), at(kp, 1));
  out[4] = angle(at(kp, 3), at(kp, 5), at(kp, 1));
  out[5] = angle(at(kp, 4), at(kp, 6), at(kp, 2));
  out[6] = angle(at(kp, 7), at(kp, 1), at(kp, 9));
  out[7] = angle(at(kp, 8), at(kp, 2), at(kp, 10));
  out[8] = angle(at(kp, 7), at(kp, 9), at(kp, 8));
  out[9] = angle(at(kp, 8), at(kp, 10), at(kp, 7));
  out[10] = angle(at(kp, 9), at(kp, 11), at(kp, 7));
  out[11] = angle(at(kp, 10), at(kp, 12), at(kp, 8));
  return out;
}

inline Keypoints13 random_skeleton(sgpose::Rng& rng, double w, double h) {
  Keypoints13 kp;
  for (auto& p : kp.points) p = Keypoint{rng.uniform(0, w), rng.uniform(0, h), rng.uniform()};
  return kp;
}

inline Keypoints13 random_skeleton_on_grid(sgpose::Rng& rng, double w, double h) {
  Keypoints13 kp = random_skeleton(rng, w, h);
  for (auto& p : kp.points) {
    p.x = sgpose::quantize_coordinate(p.x);
    p.y = sgpose::quantize_coordinate(p.y);
  }
  return kp;
}

inline sgpose::BoundingBox random_box_on_grid(sgpose::Rng& rng, double w, double h) {
  double x0 = sgpose::quantize_coordinate(rng.uniform(0, w)), x1 = sgpose::quantize_coordinate(rng.uniform(0, w));
  double y0 = sgpose::quantize_coordinate(rng.uniform(0, h)), y1 = sgpose::quantize_coordinate(rng.uniform(0, h));
  if (x0 > x1) std::swap(x0, x1);
  if (y0 > y1) std::swap(y0, y1);
  return {x0, y0, x1, y1};
}

}  // namespace oracle
