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
#include <string>
#include <vector>

#include "sgpose/model.hpp"

namespace sgpose {

// Full-model finite-difference check in double precision. Every parameter
// entry is compared against a central difference of the training loss.
struct GradcheckOptions {
  int seeds = 20;
  std::uint64_t first_seed = 0;
  double tolerance = 1e-4;
  double step = 1e-5;
  double floor = 1e-2;  // denominator floor of the relative error
  int batch = 2;
  int k = 2;
  ModelConfig config = tiny_config();

  static ModelConfig tiny_config();
};

struct GradcheckSeed {
  std::uint64_t seed = 0;
  FeatureMode features = FeatureMode::kBox;
  double max_rel = 0.0;
  std::string worst;  // parameter name and entry of max_rel
  long checked = 0;
  long skipped = 0;   // entries whose difference straddles a kink at every step size tried
};

struct GradcheckReport {
  std::vector<GradcheckSeed> seeds;
  double max_rel = 0.0;
  long checked = 0;
  long skipped = 0;
  double seconds = 0.0;
  double tolerance = 0.0;

  bool passed() const { return max_rel < tolerance && checked > 0; }
};

// Seeds cycle through the three feature modes.
GradcheckReport run_gradcheck(const GradcheckOptions& options);

GradcheckSeed gradcheck_seed(const ModelConfig& config, std::uint64_t seed, const GradcheckOptions& options);

}  // namespace sgpose
