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

#ifndef LATKD_DATA_H_
#define LATKD_DATA_H_

#include <Eigen/Dense>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace latkd {

using FeatureMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Label values. Rows whose label is not yet known carry kUnlabeled.
inline constexpr int kNormal = 0;
inline constexpr int kAnomalous = 1;
inline constexpr int kUnlabeled = -1;

// Value written for a null continuous cell when the column has no sentinel of
// its own. Tree learners treat exactly this value as "missing".
inline constexpr double kMissingMarker = -0.001;

// Origin of event_time; row date = epoch + event_time seconds (UTC).
inline constexpr std::chrono::year_month_day kDatasetEpoch{
    std::chrono::year{2017}, std::chrono::November, std::chrono::day{1}};

// Whole seconds from kDatasetEpoch to the start of `date`.
std::int64_t SecondsSinceEpoch(std::chrono::year_month_day date);

// ---------------------------------------------------------------------------
// Raw tables

struct TableColumn {
  std::string name;
  std::vector<std::string> text;
  std::vector<std::uint8_t> is_null;
};

// Column-major raw table. Cells keep their source text; numeric
// interpretation happens in fit_schema/transform.
struct DataFrameTable {
  std::vector<TableColumn> columns;
  std::vector<double> event_time;
  std::vector<int> labels;  // kNormal, kAnomalous or kUnlabeled

  std::size_t num_rows() const { return event_time.size(); }
  bool HasColumn(const std::string& name) const;
  const TableColumn& column(const std::string& name) const;
  DataFrameTable SelectRows(std::span<const std::size_t> rows) const;
};

enum class TableFormat { kCsv };

struct LoadOptions {
  // Empty for tables without a time column (event_time is then 0).
  std::string timestamp_column = "TransactionDT";
  std::optional<std::string> label_column = "isFraud";
  // When non-empty only these columns are retained (besides time and label).
  std::vector<std::string> keep_columns;
};

DataFrameTable LoadTable(const std::filesystem::path& path, TableFormat format,
                         const LoadOptions& options);
DataFrameTable ParseCsvTable(std::istream& in, const LoadOptions& options);

// Left join on a key column; right-side columns are appended with nulls for
// unmatched rows. Time and labels come from the left table.
DataFrameTable LeftJoin(const DataFrameTable& left, const DataFrameTable& right,
                        const std::string& key);

// ---------------------------------------------------------------------------
// Preprocessing schema

enum class ColumnKind { kContinuous, kCategorical };
enum class ColumnTransform { kNone, kLog10p };

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::kContinuous;
  ColumnTransform transform = ColumnTransform::kNone;
  std::optional<double> null_sentinel;
  std::optional<std::size_t> rare_threshold;

  // Throws kSchema when a field is set for the wrong column kind.
  void Validate() const;
};

inline constexpr char kOthersBucket[] = "Others";
inline constexpr char kNaBucket[] = "NA";

// Raw-feature rows of the preprocessing table, named by their source columns
// in the public transaction/identity files (DeviceInfo = device name,
// id_30 = OS, id_31 = browser).
std::vector<ColumnSpec> IeeeCisColumnSpecs();

class FeatureSchema {
 public:
  static constexpr int kVersion = 1;

  FeatureSchema(std::vector<ColumnSpec> columns,
                std::vector<std::vector<std::string>> vocabularies);

  const std::vector<ColumnSpec>& columns() const { return columns_; }
  // Parallel to columns(); empty for continuous columns.
  const std::vector<std::vector<std::string>>& vocabularies() const {
    return vocabularies_;
  }
  std::size_t output_dimension() const { return output_dimension_; }
  const std::string& fingerprint() const { return fingerprint_; }
  std::vector<std::string> FeatureNames() const;

  nlohmann::json ToJson() const;
  static FeatureSchema FromJson(const nlohmann::json& doc);

 private:
  std::vector<ColumnSpec> columns_;
  std::vector<std::vector<std::string>> vocabularies_;
  std::size_t output_dimension_ = 0;
  std::string fingerprint_;
};

FeatureSchema FitSchema(const DataFrameTable& table,
                        const std::vector<ColumnSpec>& specs);

nlohmann::json ColumnSpecToJson(const ColumnSpec& spec);
ColumnSpec ColumnSpecFromJson(const nlohmann::json& doc);

// ---------------------------------------------------------------------------
// Encoded data

struct ClassCounts {
  std::size_t normal = 0;
  std::size_t anomalous = 0;
  std::size_t unlabeled = 0;
};

struct DesignMatrix {
  FeatureMatrix features;
  std::vector<int> labels;
  std::vector<double> event_time;
  std::string schema_fingerprint;

  std::size_t rows() const { return labels.size(); }
  std::size_t cols() const { return static_cast<std::size_t>(features.cols()); }

  // SHA-256 over the canonical binary encoding.
  std::string Fingerprint() const;
  ClassCounts CountClasses() const;
  DesignMatrix SelectRows(std::span<const std::size_t> rows) const;
  // Throws kData on NaN/inf features or inconsistent lengths.
  void Validate() const;

  std::string Serialize() const;
  static DesignMatrix Deserialize(std::string_view bytes);
  void Save(const std::filesystem::path& path) const;
  static DesignMatrix Load(const std::filesystem::path& path);
};

// Rows stacked in argument order. Widths and schema fingerprints must agree.
DesignMatrix Concatenate(std::span<const DesignMatrix> parts);

DesignMatrix Transform(const DataFrameTable& table, const FeatureSchema& schema);

// ---------------------------------------------------------------------------
// Time frames

struct TimeFrame {
  int index = 0;
  std::chrono::year_month_day start;  // inclusive
  std::chrono::year_month_day end;    // exclusive
  int label_delay_days = 0;

  // True when the frame's labels exist by `wall_date`.
  bool LabeledAvailable(std::chrono::year_month_day wall_date) const;
};

// `count` contiguous calendar-month frames starting at `first`.
std::vector<TimeFrame> MonthlySchedule(std::chrono::year_month first, int count,
                                       int label_delay_days);
// Throws kInvalidArgument unless frames are ordered, contiguous and non-empty.
void ValidateSchedule(std::span<const TimeFrame> schedule);

std::chrono::year_month_day ParseDate(const std::string& iso_date);
std::string FormatDate(std::chrono::year_month_day date);

// Frame position for every timestamp, or -1 when outside the schedule.
std::vector<int> AssignFrames(std::span<const double> event_time,
                              std::span<const TimeFrame> schedule);

struct SliceResult {
  std::vector<DesignMatrix> frames;
  std::size_t dropped_rows = 0;
  std::size_t empty_frames = 0;
};

SliceResult SliceFrames(const DesignMatrix& matrix,
                        std::span<const TimeFrame> schedule);

}  // namespace latkd

#endif  // LATKD_DATA_H_
