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

#include <filesystem>
#include <string>

#include "sgpose/model.hpp"

namespace sgpose {

constexpr int kCheckpointVersion = 1;

// A checkpoint is a directory holding manifest.json (version, model config,
// per-tensor name/shape/offset/length) and params.bin (little-endian float32
// in manifest order).
struct Checkpoint {
  Model<float> model;
  std::string config_hash;
  int best_epoch = 0;
};

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt);

// Throws DataError for missing or corrupt files and unknown versions,
// ConfigError when tensor shapes disagree with the stored config.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace sgpose
