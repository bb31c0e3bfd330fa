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

#include "latkd/registry.h"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>

#include "latkd/ensemble.h"
#include "latkd/errors.h"
#include "latkd/hash.h"
#include "latkd/io.h"

namespace latkd {

using nlohmann::json;

// ---------------------------------------------------------------------------
// BlobStore

BlobStore::BlobStore(std::filesystem::path root) : root_(std::move(root)) {
  std::filesystem::create_directories(root_ / "blobs");
}

std::filesystem::path BlobStore::PathFor(const std::string& hash) const {
  if (!IsHexDigest(hash)) {
    throw Error(ErrorCode::kInvalidArgument, "malformed content hash '" + hash + "'");
  }
  return root_ / "blobs" / hash.substr(0, 2) / hash;
}

std::string BlobStore::Put(std::string_view bytes) {
  const std::string hash = Sha256Hex(bytes);
  const std::filesystem::path path = PathFor(hash);
  if (!std::filesystem::exists(path)) WriteFileAtomic(path, bytes);
  return hash;
}

bool BlobStore::Contains(const std::string& hash) const {
  return std::filesystem::exists(PathFor(hash));
}

std::string BlobStore::Get(const std::string& hash) const {
  const std::filesystem::path path = PathFor(hash);
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::kNotFound, "unknown blob " + hash);
  }
  std::string bytes = ReadFile(path);
  if (Sha256Hex(bytes) != hash) {
    throw Error(ErrorCode::kIntegrity, "blob " + hash + " failed its hash check");
  }
  return bytes;
}

BlobResolver BlobStore::Resolver() const {
  return [this](const std::string& hash) { return Get(hash); };
}

std::string StoreModel(BlobStore& store, const Model& model) {
  if (const auto* ensemble = dynamic_cast<const EnsembleModel*>(&model)) {
    for (const ModelPtr& member : ensemble->members()) StoreModel(store, *member);
  }
  return store.Put(model.Serialize());
}

ModelPtr LoadModel(const BlobStore& store, const std::string& hash) {
  return DeserializeModel(store.Get(hash), store.Resolver());
}

// ---------------------------------------------------------------------------
// Manifest

json FrameEntry::ToJson() const {
  return {{"index", index},
          {"variant", variant},
          {"seed", seed},
          {"models", models},
          {"window", window},
          {"config_hash", config_hash},
          {"rows_consumed", rows_consumed},
          {"metrics", metrics},
          {"wall_clock_seconds", wall_clock_seconds}};
}

FrameEntry FrameEntry::FromJson(const json& doc) {
  FrameEntry e;
  e.index = doc.at("index").get<int>();
  e.variant = doc.value("variant", "");
  e.seed = doc.value("seed", std::uint64_t{0});
  e.models = doc.value("models", std::map<std::string, std::string>{});
  e.window = doc.value("window", "");
  e.config_hash = doc.value("config_hash", "");
  e.rows_consumed = doc.value("rows_consumed", std::size_t{0});
  e.metrics = doc.value("metrics", json::object());
  e.wall_clock_seconds = doc.value("wall_clock_seconds", 0.0);
  return e;
}

json RunManifest::ToJson() const {
  json frames_json = json::array();
  for (const FrameEntry& f : frames) frames_json.push_back(f.ToJson());
  return {{"version", kVersion},
          {"run_id", run_id},
          {"config", config},
          {"frames", std::move(frames_json)},
          {"parent_run", parent_run ? json(*parent_run) : json(nullptr)}};
}

RunManifest RunManifest::FromJson(const json& doc) {
  if (doc.value("version", 0) != kVersion) {
    throw Error(ErrorCode::kParse, "unsupported manifest version");
  }
  RunManifest m;
  m.run_id = doc.at("run_id").get<std::string>();
  m.config = doc.value("config", json::object());
  for (const json& f : doc.at("frames")) m.frames.push_back(FrameEntry::FromJson(f));
  if (doc.contains("parent_run") && !doc["parent_run"].is_null()) {
    m.parent_run = doc["parent_run"].get<std::string>();
  }
  return m;
}

RunManifest RunManifest::Load(const std::filesystem::path& path) {
  try {
    return FromJson(json::parse(ReadFile(path)));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
}

std::string RunManifest::ContentHash() const {
  json doc = ToJson();
  doc.erase("parent_run");
  for (json& f : doc["frames"]) f.erase("wall_clock_seconds");
  return Sha256Hex(doc.dump());
}

std::vector<std::string> RunManifest::ReferencedBlobs() const {
  std::vector<std::string> hashes;
  for (const FrameEntry& f : frames) {
    for (const auto& [kind, hash] : f.models) hashes.push_back(hash);
  }
  return hashes;
}

// ---------------------------------------------------------------------------
// RunDirectory

RunDirectory::RunDirectory(const std::filesystem::path& root,
                           const std::string& run_id, const json& config)
    : dir_(root / "runs" / run_id) {
  if (run_id.empty() || run_id.find('/') != std::string::npos) {
    throw Error(ErrorCode::kInvalidArgument, "invalid run id '" + run_id + "'");
  }
  std::filesystem::create_directories(dir_);
  const std::filesystem::path lock_path = dir_ / "LOCK";
  lock_fd_ = ::open(lock_path.c_str(), O_RDWR | O_CREAT, 0644);
  if (lock_fd_ < 0 || ::flock(lock_fd_, LOCK_EX | LOCK_NB) != 0) {
    if (lock_fd_ >= 0) ::close(lock_fd_);
    throw Error(ErrorCode::kIo, "run directory " + dir_.string() +
                                    " is locked by another writer");
  }
  if (std::filesystem::exists(manifest_path())) {
    manifest_ = RunManifest::Load(manifest_path());
    if (manifest_.config != config) {
      ::close(lock_fd_);
      throw Error(ErrorCode::kInvalidArgument,
                  "run " + run_id + " exists with a different configuration");
    }
    resumed_ = true;
  } else {
    manifest_.run_id = run_id;
    manifest_.config = config;
    WriteFileAtomic(manifest_path(), manifest_.ToJson().dump(2));
  }
}

RunDirectory::~RunDirectory() {
  if (lock_fd_ >= 0) {
    ::flock(lock_fd_, LOCK_UN);
    ::close(lock_fd_);
  }
}

void RunDirectory::AppendFrame(const FrameEntry& entry, const BlobStore& store) {
  for (const auto& [kind, hash] : entry.models) {
    if (!store.Contains(hash)) {
      throw Error(ErrorCode::kIntegrity,
                  "frame entry references missing blob " + hash);
    }
  }
  RunManifest next = manifest_;
  next.frames.push_back(entry);
  WriteFileAtomic(manifest_path(), next.ToJson().dump(2), fault_);
  manifest_ = std::move(next);
}

}  // namespace latkd
