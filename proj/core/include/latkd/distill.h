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

#ifndef LATKD_DISTILL_H_
#define LATKD_DISTILL_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "latkd/data.h"
#include "latkd/gbt.h"
#include "latkd/mlp.h"
#include "latkd/model.h"
#include "latkd/registry.h"

namespace latkd {

// Output of one earlier model on the current frame's rows.
struct SoftLabelMatrix {
  std::string model_id;             // content hash of the producing model
  std::string dataset_fingerprint;  // DesignMatrix::Fingerprint()
  ProbMatrix probs;

  void Validate(std::size_t expected_rows) const;
  // Binary record with a trailing SHA-256 checksum.
  std::string Serialize() const;
  static SoftLabelMatrix Deserialize(std::string_view bytes);
};

// Soft labels keyed by (model_id, dataset_fingerprint). Always memoized in
// memory; also persisted under <dir>/<model[0:2]>/<model>_<dataset>.bin when a
// directory is given.
class SoftLabelCache {
 public:
  explicit SoftLabelCache(std::optional<std::filesystem::path> dir = std::nullopt);

  SoftLabelMatrix Materialize(const Model& model, const std::string& model_id,
                              const DesignMatrix& data,
                              const std::string& dataset_fingerprint);

  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }
  // Disk entries that failed their checksum and were recomputed.
  std::size_t corrupt() const { return corrupt_; }
  std::size_t evaluations() const { return evaluations_; }
  void ClearMemory() { memory_.clear(); }
  std::optional<std::filesystem::path> PathFor(const std::string& model_id,
                                               const std::string& dataset) const;

 private:
  std::optional<std::filesystem::path> dir_;
  std::map<std::pair<std::string, std::string>, SoftLabelMatrix> memory_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
  std::size_t corrupt_ = 0;
  std::size_t evaluations_ = 0;
};

enum class TeacherSource { kSameLearner, kEnsembleChain };

std::string_view TeacherSourceName(TeacherSource source);
TeacherSource ParseTeacherSource(std::string_view name);

struct LatkdConfig {
  int truncation_start = 0;  // K: earliest frame whose model teaches
  double kl_weight = 1.0;
  double temperature = 1.0;
  ModelKind learner = ModelKind::kMlp;
  TeacherSource teacher_source = TeacherSource::kSameLearner;
  std::uint64_t seed = 0;
  MlpArchitecture mlp_architecture;
  MlpTrainOptions mlp_options;
  GbtConfig gbt_config;

  void Validate() const;
  nlohmann::json ToJson() const;
  static LatkdConfig FromJson(const nlohmann::json& doc);
  // Hash of the canonical JSON form.
  std::string Hash() const;
  // Learner option blocks with seeds derived from `seed`.
  MlpTrainOptions ResolvedMlpOptions() const;
  GbtConfig ResolvedGbtConfig() const;
};

struct TeacherEntry {
  int frame_index = 0;
  ModelKind kind = ModelKind::kMlp;
  std::string model_hash;
  std::string window;
  std::string config_hash;
  std::size_t created_at = 0;  // registration sequence number
};

// Ordered chain M_0 ... M_{t-1} per model kind.
class TeacherRegistry {
 public:
  // Throws kInvalidArgument unless frame_index is larger than every frame
  // already registered for the same kind.
  void Register(TeacherEntry entry);

  // Models of `kind` for frames K..t-1 in ascending order. Requires
  // 0 <= K <= t; throws kRegistryGap listing frames that are missing.
  std::vector<TeacherEntry> TeacherSet(int t, int truncation_start,
                                       ModelKind kind) const;

  const std::vector<TeacherEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::optional<int> LastFrame(ModelKind kind) const;

  // Chain recorded in a manifest for one (variant, seed).
  static TeacherRegistry FromManifest(const RunManifest& manifest,
                                      const std::string& variant,
                                      std::uint64_t seed);

 private:
  std::vector<TeacherEntry> entries_;
};

// Models trained for one frame. `primary` is the configured learner's model;
// `by_kind` holds every model that gets registered (both members and the
// averaged ensemble when two members were trained).
struct FrameTrainResult {
  ModelPtr primary;
  std::map<ModelKind, ModelPtr> by_kind;
  std::size_t rows_consumed = 0;
  double train_seconds = 0.0;
  std::vector<int> teacher_frames;
  std::vector<double> loss_trace;  // of the MLP member when present, else GBT
};

// Trains the configured learner on one dataset. Teacher outputs are
// row-aligned soft labels; for an ensemble learner the same teachers feed both
// members. With no teachers this is plain baseline training.
FrameTrainResult TrainLearner(const DesignMatrix& data,
                              const std::vector<ProbMatrix>& teachers,
                              const LatkdConfig& config);

// Per-kind teacher outputs, for learners whose members distil from different
// chains.
FrameTrainResult TrainLearner(const DesignMatrix& data,
                              const std::map<ModelKind, std::vector<ProbMatrix>>& teachers,
                              const LatkdConfig& config);

// Trains frame t on `frame` only, with teachers K..t-1 from `registry`.
FrameTrainResult TrainFrame(int t, const DesignMatrix& frame,
                            const TeacherRegistry& registry,
                            const LatkdConfig& config, const BlobStore& store,
                            SoftLabelCache& cache);

struct ScheduleOptions {
  std::string variant = "LATKD";
  const DesignMatrix* test_set = nullptr;
  // Stop (as if the process died) after this many frames have been committed
  // by this call.
  std::optional<int> stop_after;
};

struct FrameRecord {
  int index = 0;
  std::size_t rows_consumed = 0;
  double train_seconds = 0.0;
  std::optional<double> test_auprc;
  std::vector<int> teacher_frames;
  bool resumed = false;  // loaded from the manifest rather than trained
};

struct ScheduleResult {
  TeacherRegistry registry;
  std::vector<FrameRecord> frames;
};

// Trains frames in order, persisting each frame's models and manifest entry
// before moving on. Frames already recorded for (variant, seed) are skipped.
ScheduleResult RunSchedule(std::span<const DesignMatrix> frames,
                           const LatkdConfig& config, RunDirectory& run,
                           BlobStore& store, SoftLabelCache& cache,
                           const ScheduleOptions& options = {});

}  // namespace latkd

#endif  // LATKD_DISTILL_H_
