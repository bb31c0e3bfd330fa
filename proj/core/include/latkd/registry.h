// Copyright 2026 The LATKD Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LATKD_REGISTRY_H_
#define LATKD_REGISTRY_H_

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "latkd/model.h"

namespace latkd {

// Content-addressed blob store. Layout: <root>/blobs/<hash[0:2]>/<hash>.
class BlobStore {
 public:
  explicit BlobStore(std::filesystem::path root);

  // Returns the SHA-256 of `bytes`; identical bytes are stored once.
  std::string Put(std::string_view bytes);
  // Throws kNotFound for an unknown hash and kIntegrity when the stored
  // bytes no longer hash to `hash`.
  std::string Get(const std::string& hash) const;
  bool Contains(const std::string& hash) const;
  std::filesystem::path PathFor(const std::string& hash) const;
  BlobResolver Resolver() const;

  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
};

// Stores a model (and, for ensembles, every member) and returns its hash.
std::string StoreModel(BlobStore& store, const Model& model);
ModelPtr LoadModel(const BlobStore& store, const std::string& hash);

struct FrameEntry {
  int index = 0;               // time frame t
  std::string variant;         // e.g. "MLP", "MLP-XG-LATKD"
  std::uint64_t seed = 0;
  std::map<std::string, std::string> models;  // model kind -> content hash
  std::string window;          // training-window descriptor, e.g. "0..2"
  std::string config_hash;
  std::size_t rows_consumed = 0;
  nlohmann::json metrics = nlohmann::json::object();
  double wall_clock_seconds = 0.0;  // volatile; excluded from content hashes

  nlohmann::json ToJson() const;
  static FrameEntry FromJson(const nlohmann::json& doc);
};

struct RunManifest {
  static constexpr int kVersion = 1;

  std::string run_id;
  nlohmann::json config = nlohmann::json::object();
  std::vector<FrameEntry> frames;
  std::optional<std::string> parent_run;

  nlohmann::json ToJson() const;
  static RunManifest FromJson(const nlohmann::json& doc);
  static RunManifest Load(const std::filesystem::path& path);

  // SHA-256 over the canonical manifest without wall-clock timings or resume
  // lineage, so reruns and resumed runs of one config hash equal.
  std::string ContentHash() const;
  // Every model hash referenced by the manifest.
  std::vector<std::string> ReferencedBlobs() const;
};

// Single-writer handle on <root>/runs/<run_id>. Holds an advisory lock for its
// lifetime. Opening an existing run resumes it; the stored config must match.
class RunDirectory {
 public:
  RunDirectory(const std::filesystem::path& root, const std::string& run_id,
               const nlohmann::json& config);
  ~RunDirectory();
  RunDirectory(const RunDirectory&) = delete;
  RunDirectory& operator=(const RunDirectory&) = delete;

  const RunManifest& manifest() const { return manifest_; }
  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path manifest_path() const { return dir_ / "manifest.json"; }
  bool resumed() const { return resumed_; }

  // Atomically persists the manifest with `entry` appended. Referenced
  // models must already be in `store`.
  void AppendFrame(const FrameEntry& entry, const BlobStore& store);

  // Called between writing the new manifest and committing it.
  void SetFaultInjector(std::function<void()> hook) { fault_ = std::move(hook); }

 private:
  std::filesystem::path dir_;
  RunManifest manifest_;
  int lock_fd_ = -1;
  bool resumed_ = false;
  std::function<void()> fault_;
};

}  // namespace latkd

#endif  // LATKD_REGISTRY_H_
