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

#include "sgpose/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "json.hpp"
#include "sgpose/error.hpp"

namespace sgpose {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kManifest = "manifest.json";
constexpr const char* kBlob = "params.bin";

void put_le32(std::string& out, float v) {
  std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

float get_le32(const std::string& in, std::size_t pos) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return std::bit_cast<float>(bits);
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + p.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing " + p.string());
}

}  // namespace

void save_checkpoint(const fs::path& dir, const Checkpoint& ckpt) {
  fs::create_directories(dir);
  const auto& params = ckpt.model.params;
  std::string blob;
  json entries = json::array();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = params[i];
    const std::size_t offset = blob.size();
    for (Eigen::Index j = 0; j < t.size(); ++j) put_le32(blob, t.data()[j]);
    entries.push_back({{"name", params.name(i)},
                       {"shape", {t.rows(), t.cols()}},
                       {"offset", offset},
                       {"length", blob.size() - offset}});
  }
  const json manifest = {{"format_version", kCheckpointVersion},
                         {"config", json::parse(config_to_json(ckpt.model.config))},
                         {"config_hash", ckpt.config_hash},
                         {"best_epoch", ckpt.best_epoch},
                         {"dtype", "float32_le"},
                         {"tensors", entries}};
  write_file(dir / kBlob, blob);
  write_file(dir / kManifest, manifest.dump(2) + "\n");
}

Checkpoint load_checkpoint(const fs::path& dir) {
  json manifest;
  try {
    manifest = json::parse(read_file(dir / kManifest));
  } catch (const json::exception& e) {
    throw DataError("checkpoint manifest is not valid JSON: " + std::string(e.what()));
  }
  const std::string blob = read_file(dir / kBlob);
  Checkpoint ckpt;
  ParamStore<float> store;
  ModelConfig config;
  try {
    const int version = manifest.at("format_version").get<int>();
    if (version != kCheckpointVersion) {
      throw DataError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                      std::to_string(kCheckpointVersion) + ")");
    }
    config = config_from_json(manifest.at("config").dump());
    ckpt.config_hash = manifest.at("config_hash").get<std::string>();
    ckpt.best_epoch = manifest.at("best_epoch").get<int>();
    for (const auto& e : manifest.at("tensors")) {
      const auto name = e.at("name").get<std::string>();
      const auto rows = e.at("shape").at(0).get<Eigen::Index>();
      const auto cols = e.at("shape").at(1).get<Eigen::Index>();
      const auto offset = e.at("offset").get<std::size_t>();
      const auto length = e.at("length").get<std::size_t>();
      if (rows < 0 || cols < 0 || length != static_cast<std::size_t>(rows * cols) * 4 || offset > blob.size() ||
          length > blob.size() - offset) {
        throw DataError("checkpoint entry " + name + " does not fit params.bin");
      }
      TensorF t(rows, cols);
      for (Eigen::Index j = 0; j < t.size(); ++j) t.data()[j] = get_le32(blob, offset + 4 * static_cast<std::size_t>(j));
      store.add(name, std::move(t));
    }
  } catch (const json::exception& e) {
    throw DataError("checkpoint manifest is malformed: " + std::string(e.what()));
  }
  ckpt.model = bind_model(config, std::move(store));
  return ckpt;
}

}  // namespace sgpose
