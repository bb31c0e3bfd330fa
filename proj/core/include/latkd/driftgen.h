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

#ifndef LATKD_DRIFTGEN_H_
#define LATKD_DRIFTGEN_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "latkd/data.h"

namespace latkd {

// Axis-aligned Gaussian component.
struct GaussianCluster {
  std::string name;
  std::vector<double> mean;
  std::vector<double> stddev;  // square roots of the diagonal covariance
  double weight = 1.0;         // relative mixing weight within its class
};

enum class DriftAction { kShiftCluster, kAddCluster, kRetireCluster, kReintroduceCluster };

struct DriftEvent {
  int frame_index = 0;
  DriftAction action = DriftAction::kShiftCluster;
  std::string cluster;           // target (shift/retire/reintroduce)
  std::vector<double> shift;     // added to the mean (shift)
  std::optional<GaussianCluster> added;  // new component (add)
  bool fraud = true;             // class the added component belongs to
};

struct Recurrence {
  int frame_index = 0;
  std::string cluster;
};

struct DriftScenario {
  int n_frames = 1;
  std::size_t rows_per_frame = 1000;
  double fraud_rate = 0.05;
  std::size_t feature_dim = 2;
  std::vector<GaussianCluster> normal_components;
  std::vector<GaussianCluster> fraud_components;
  std::vector<DriftEvent> drift_events;
  std::optional<Recurrence> recurrence;
  std::uint64_t seed = 0;
  std::string first_month = "2017-11";

  // Replays the events; throws kInvalidArgument for malformed clusters,
  // dangling references, or a frame left without an active component.
  void Validate() const;
  nlohmann::json ToJson() const;
  static DriftScenario FromJson(const nlohmann::json& doc);
  static DriftScenario Load(const std::filesystem::path& path);

  // Column specs of the CSV layout written by WriteCsv (f0, f1, ...).
  std::vector<ColumnSpec> ColumnSpecs() const;
  std::vector<TimeFrame> Schedule() const;
};

struct GeneratedStream {
  std::vector<DesignMatrix> frames;
  // Assignment log: for every frame and row, the producing component
  // ("normal:<name>" or "fraud:<name>").
  std::vector<std::vector<std::string>> origins;

  // All frames in one CSV with event_time, label, cluster, f0.. columns.
  void WriteCsv(const std::filesystem::path& path) const;
  // Row indices of frame `frame` whose origin equals `origin`.
  std::vector<std::size_t> RowsFrom(int frame, const std::string& origin) const;
};

inline constexpr char kDriftTimeColumn[] = "event_time";
inline constexpr char kDriftLabelColumn[] = "label";
inline constexpr char kDriftOriginColumn[] = "cluster";

// Fraud rows per frame are round(fraud_rate * rows_per_frame); components are
// drawn by weight among those active in the frame.
GeneratedStream Generate(const DriftScenario& scenario);

// Retired-then-reintroduced testbed: a broad normal population, fraud
// clusters "A" and "B"; A is retired at `retire_at` and back at `return_at`.
DriftScenario RecurringPatternScenario(std::uint64_t seed, int n_frames = 6,
                                       std::size_t rows_per_frame = 4000,
                                       int retire_at = 2, int return_at = 5);

}  // namespace latkd

#endif  // LATKD_DRIFTGEN_H_
