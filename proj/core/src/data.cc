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

#include "latkd/data.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <unordered_map>

#include "latkd/csv.h"
#include "latkd/errors.h"
#include "latkd/hash.h"
#include "latkd/io.h"

namespace latkd {
namespace {

using nlohmann::json;

enum class NumberParse { kFinite, kNonFinite, kNotANumber };

NumberParse ParseNumber(std::string_view text, double& value) {
  // Leading '+' is not accepted by from_chars.
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec == std::errc::result_out_of_range) return NumberParse::kNonFinite;
  if (ec != std::errc() || ptr != last || text.empty()) {
    return NumberParse::kNotANumber;
  }
  return std::isfinite(value) ? NumberParse::kFinite : NumberParse::kNonFinite;
}

std::string RowContext(const std::string& column, std::size_t row) {
  return "column '" + column + "' row " + std::to_string(row);
}

int ParseLabel(const CsvField& field, std::size_t line) {
  if (field.is_null) return kUnlabeled;
  double value = 0.0;
  if (ParseNumber(field.text, value) == NumberParse::kFinite &&
      (value == 0.0 || value == 1.0)) {
    return static_cast<int>(value);
  }
  throw Error(ErrorCode::kParse, "line " + std::to_string(line) +
                                     ": label must be 0 or 1, got '" +
                                     field.text + "'");
}

const char* KindName(ColumnKind kind) {
  return kind == ColumnKind::kContinuous ? "continuous" : "categorical";
}

const char* TransformName(ColumnTransform t) {
  return t == ColumnTransform::kLog10p ? "log10p" : "none";
}

}  // namespace

std::int64_t SecondsSinceEpoch(std::chrono::year_month_day date) {
  using std::chrono::sys_days;
  return std::chrono::duration_cast<std::chrono::seconds>(
             sys_days(date) - sys_days(kDatasetEpoch))
      .count();
}

// ---------------------------------------------------------------------------
// DataFrameTable

bool DataFrameTable::HasColumn(const std::string& name) const {
  return std::any_of(columns.begin(), columns.end(),
                     [&](const TableColumn& c) { return c.name == name; });
}

const TableColumn& DataFrameTable::column(const std::string& name) const {
  for (const TableColumn& c : columns) {
    if (c.name == name) return c;
  }
  throw Error(ErrorCode::kSchema, "no column named '" + name + "'");
}

DataFrameTable DataFrameTable::SelectRows(
    std::span<const std::size_t> rows) const {
  DataFrameTable out;
  out.columns.reserve(columns.size());
  for (const TableColumn& c : columns) {
    TableColumn selected{c.name, {}, {}};
    selected.text.reserve(rows.size());
    selected.is_null.reserve(rows.size());
    for (std::size_t r : rows) {
      selected.text.push_back(c.text[r]);
      selected.is_null.push_back(c.is_null[r]);
    }
    out.columns.push_back(std::move(selected));
  }
  for (std::size_t r : rows) {
    out.event_time.push_back(event_time[r]);
    out.labels.push_back(labels[r]);
  }
  return out;
}

DataFrameTable ParseCsvTable(std::istream& in, const LoadOptions& options) {
  CsvReader reader(in);
  std::vector<CsvField> fields;
  if (!reader.Next(fields)) {
    throw Error(ErrorCode::kParse, "empty input: no header row");
  }
  std::vector<std::string> header;
  for (CsvField& f : fields) header.push_back(std::move(f.text));

  auto find = [&](const std::string& name) -> std::optional<std::size_t> {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };

  const bool has_time = !options.timestamp_column.empty();
  const auto time_index =
      has_time ? find(options.timestamp_column) : std::optional<std::size_t>(header.size());
  if (!time_index) {
    throw Error(ErrorCode::kSchema, "timestamp column '" +
                                        options.timestamp_column +
                                        "' missing from header");
  }
  std::optional<std::size_t> label_index;
  if (options.label_column) label_index = find(*options.label_column);

  DataFrameTable table;
  std::vector<std::size_t> source_index;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i == *time_index || (label_index && i == *label_index)) continue;
    if (!options.keep_columns.empty() &&
        std::find(options.keep_columns.begin(), options.keep_columns.end(),
                  header[i]) == options.keep_columns.end()) {
      continue;
    }
    table.columns.push_back(TableColumn{header[i], {}, {}});
    source_index.push_back(i);
  }

  while (reader.Next(fields)) {
    if (fields.size() == 1 && fields[0].is_null && header.size() > 1) {
      continue;  // blank line
    }
    if (fields.size() != header.size()) {
      throw Error(ErrorCode::kParse,
                  "line " + std::to_string(reader.line()) + ": expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    }
    double t = 0.0;
    const CsvField& tf = has_time ? fields[*time_index] : fields.front();
    if (has_time && (tf.is_null || ParseNumber(tf.text, t) != NumberParse::kFinite ||
        t < 0.0)) {
      throw Error(ErrorCode::kParse,
                  "line " + std::to_string(reader.line()) +
                      ": timestamp must be a finite nonnegative number, got '" +
                      tf.text + "'");
    }
    table.event_time.push_back(t);
    table.labels.push_back(label_index
                               ? ParseLabel(fields[*label_index], reader.line())
                               : kUnlabeled);
    for (std::size_t c = 0; c < source_index.size(); ++c) {
      CsvField& f = fields[source_index[c]];
      table.columns[c].is_null.push_back(f.is_null ? 1 : 0);
      table.columns[c].text.push_back(std::move(f.text));
    }
  }
  return table;
}

DataFrameTable LoadTable(const std::filesystem::path& path, TableFormat format,
                         const LoadOptions& options) {
  if (format != TableFormat::kCsv) {
    throw Error(ErrorCode::kInvalidArgument, "unsupported table format");
  }
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::kNotFound, "input file not found: " + path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  try {
    return ParseCsvTable(in, options);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

DataFrameTable LeftJoin(const DataFrameTable& left, const DataFrameTable& right,
                        const std::string& key) {
  const TableColumn& left_key = left.column(key);
  const TableColumn& right_key = right.column(key);
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t r = 0; r < right.num_rows(); ++r) {
    if (!right_key.is_null[r]) index.emplace(right_key.text[r], r);
  }
  DataFrameTable out = left;
  for (const TableColumn& rc : right.columns) {
    if (rc.name == key || left.HasColumn(rc.name)) continue;
    TableColumn joined{rc.name, {}, {}};
    joined.text.resize(left.num_rows());
    joined.is_null.assign(left.num_rows(), 1);
    for (std::size_t r = 0; r < left.num_rows(); ++r) {
      if (left_key.is_null[r]) continue;
      auto it = index.find(left_key.text[r]);
      if (it == index.end()) continue;
      joined.text[r] = rc.text[it->second];
      joined.is_null[r] = rc.is_null[it->second];
    }
    out.columns.push_back(std::move(joined));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Schema

void ColumnSpec::Validate() const {
  if (name.empty()) throw Error(ErrorCode::kSchema, "column spec without name");
  if (kind == ColumnKind::kCategorical) {
    if (null_sentinel) {
      throw Error(ErrorCode::kSchema,
                  "null_sentinel is only valid for continuous column '" +
                      name + "'");
    }
    if (transform != ColumnTransform::kNone) {
      throw Error(ErrorCode::kSchema,
                  "transform is only valid for continuous column '" + name +
                      "'");
    }
  } else if (rare_threshold) {
    throw Error(ErrorCode::kSchema,
                "rare_threshold is only valid for categorical column '" + name +
                    "'");
  }
}

std::vector<ColumnSpec> IeeeCisColumnSpecs() {
  auto continuous = [](std::string name, std::optional<double> sentinel) {
    return ColumnSpec{std::move(name), ColumnKind::kContinuous,
                      ColumnTransform::kLog10p, sentinel, std::nullopt};
  };
  auto categorical = [](std::string name,
                        std::optional<std::size_t> threshold = std::nullopt) {
    return ColumnSpec{std::move(name), ColumnKind::kCategorical,
                      ColumnTransform::kNone, std::nullopt, threshold};
  };
  std::vector<ColumnSpec> specs = {
      continuous("TransactionAmt", std::nullopt),
      continuous("dist1", -0.001),
      continuous("dist2", -0.001),
      categorical("ProductCD"),
      categorical("card4"),
      categorical("card6"),
  };
  for (int i = 1; i <= 9; ++i) specs.push_back(categorical("M" + std::to_string(i)));
  specs.push_back(categorical("DeviceInfo", 200));
  specs.push_back(categorical("id_30"));
  specs.push_back(categorical("id_31", 200));
  specs.push_back(categorical("DeviceType"));
  return specs;
}

json ColumnSpecToJson(const ColumnSpec& spec) {
  json doc = {{"name", spec.name},
              {"kind", KindName(spec.kind)},
              {"transform", TransformName(spec.transform)}};
  doc["null_sentinel"] =
      spec.null_sentinel ? json(*spec.null_sentinel) : json(nullptr);
  doc["rare_threshold"] =
      spec.rare_threshold ? json(*spec.rare_threshold) : json(nullptr);
  return doc;
}

ColumnSpec ColumnSpecFromJson(const json& doc) {
  ColumnSpec spec;
  try {
    spec.name = doc.at("name").get<std::string>();
    const std::string kind = doc.value("kind", "continuous");
    if (kind == "continuous") {
      spec.kind = ColumnKind::kContinuous;
    } else if (kind == "categorical") {
      spec.kind = ColumnKind::kCategorical;
    } else {
      throw Error(ErrorCode::kSchema, "unknown column kind '" + kind + "'");
    }
    const std::string transform = doc.value("transform", "none");
    if (transform == "log10p") {
      spec.transform = ColumnTransform::kLog10p;
    } else if (transform != "none") {
      throw Error(ErrorCode::kSchema, "unknown transform '" + transform + "'");
    }
    if (doc.contains("null_sentinel") && !doc["null_sentinel"].is_null()) {
      spec.null_sentinel = doc["null_sentinel"].get<double>();
    }
    if (doc.contains("rare_threshold") && !doc["rare_threshold"].is_null()) {
      spec.rare_threshold = doc["rare_threshold"].get<std::size_t>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchema, std::string("bad column spec: ") + e.what());
  }
  spec.Validate();
  return spec;
}

FeatureSchema::FeatureSchema(std::vector<ColumnSpec> columns,
                             std::vector<std::vector<std::string>> vocabularies)
    : columns_(std::move(columns)), vocabularies_(std::move(vocabularies)) {
  if (vocabularies_.size() != columns_.size()) {
    throw Error(ErrorCode::kSchema, "one vocabulary slot per column required");
  }
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    columns_[i].Validate();
    if (columns_[i].kind == ColumnKind::kContinuous) {
      if (!vocabularies_[i].empty()) {
        throw Error(ErrorCode::kSchema, "continuous column '" +
                                            columns_[i].name +
                                            "' cannot carry a vocabulary");
      }
      output_dimension_ += 1;
    } else {
      output_dimension_ += vocabularies_[i].size();
    }
  }
  json body = ToJson();
  body.erase("fingerprint");
  fingerprint_ = Sha256Hex(body.dump());
}

std::vector<std::string> FeatureSchema::FeatureNames() const {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].kind == ColumnKind::kContinuous) {
      names.push_back(columns_[i].name);
    } else {
      for (const std::string& v : vocabularies_[i]) {
        names.push_back(columns_[i].name + "=" + v);
      }
    }
  }
  return names;
}

json FeatureSchema::ToJson() const {
  json cols = json::array();
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    json c = ColumnSpecToJson(columns_[i]);
    c["vocabulary"] = vocabularies_[i];
    cols.push_back(std::move(c));
  }
  return json{{"version", kVersion},
              {"columns", std::move(cols)},
              {"output_dimension", output_dimension_},
              {"fingerprint", fingerprint_}};
}

FeatureSchema FeatureSchema::FromJson(const json& doc) {
  if (doc.value("version", 0) != kVersion) {
    throw Error(ErrorCode::kSchema, "unsupported schema version");
  }
  std::vector<ColumnSpec> specs;
  std::vector<std::vector<std::string>> vocabularies;
  for (const json& c : doc.at("columns")) {
    specs.push_back(ColumnSpecFromJson(c));
    vocabularies.push_back(
        c.value("vocabulary", std::vector<std::string>{}));
  }
  FeatureSchema schema(std::move(specs), std::move(vocabularies));
  if (doc.contains("fingerprint") &&
      doc["fingerprint"].get<std::string>() != schema.fingerprint()) {
    throw Error(ErrorCode::kIntegrity, "schema fingerprint mismatch");
  }
  return schema;
}

FeatureSchema FitSchema(const DataFrameTable& table,
                        const std::vector<ColumnSpec>& specs) {
  std::vector<std::vector<std::string>> vocabularies;
  for (const ColumnSpec& spec : specs) {
    spec.Validate();
    if (!table.HasColumn(spec.name)) {
      throw Error(ErrorCode::kSchema,
                  "column '" + spec.name + "' not present in table");
    }
    const TableColumn& col = table.column(spec.name);
    if (spec.kind == ColumnKind::kContinuous) {
      for (std::size_t r = 0; r < col.text.size(); ++r) {
        double v = 0.0;
        if (!col.is_null[r] &&
            ParseNumber(col.text[r], v) == NumberParse::kNotANumber) {
          throw Error(ErrorCode::kSchema, RowContext(spec.name, r) +
                                              ": non-numeric value '" +
                                              col.text[r] + "'");
        }
      }
      vocabularies.emplace_back();
      continue;
    }

    std::map<std::string, std::size_t> counts;
    bool saw_null = false;
    for (std::size_t r = 0; r < col.text.size(); ++r) {
      if (col.is_null[r] || col.text[r] == kNaBucket) {
        saw_null = true;
      } else {
        ++counts[col.text[r]];
      }
    }
    std::vector<std::pair<std::string, std::size_t>> kept;
    bool collapsed = false;
    for (auto& [value, count] : counts) {
      const bool rare = spec.rare_threshold && count < *spec.rare_threshold;
      if (rare || value == kOthersBucket) {
        collapsed = true;
      } else {
        kept.emplace_back(value, count);
      }
    }
    // std::map iteration is lexicographic, so a stable sort by count keeps
    // ties in lexicographic order.
    std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
      return a.second > b.second;
    });
    std::vector<std::string> vocab;
    for (auto& entry : kept) vocab.push_back(entry.first);
    if (collapsed) vocab.push_back(kOthersBucket);
    if (saw_null) vocab.push_back(kNaBucket);
    vocabularies.push_back(std::move(vocab));
  }
  return FeatureSchema(specs, std::move(vocabularies));
}

// ---------------------------------------------------------------------------
// DesignMatrix

std::string DesignMatrix::Serialize() const {
  ByteWriter w;
  w.PutBytes("LATKDDM1");
  w.Put<std::uint64_t>(rows());
  w.Put<std::uint64_t>(cols());
  w.PutString(schema_fingerprint);
  w.PutBytes(std::string_view(reinterpret_cast<const char*>(features.data()),
                              sizeof(double) * features.size()));
  for (int label : labels) w.Put<std::int8_t>(static_cast<std::int8_t>(label));
  for (double t : event_time) w.Put<double>(t);
  return w.Release();
}

DesignMatrix DesignMatrix::Deserialize(std::string_view bytes) {
  ByteReader r(bytes);
  if (r.GetBytes(8) != "LATKDDM1") {
    throw Error(ErrorCode::kParse, "not a design matrix file");
  }
  DesignMatrix m;
  const auto rows = r.Get<std::uint64_t>();
  const auto cols = r.Get<std::uint64_t>();
  m.schema_fingerprint = r.GetString();
  m.features.resize(static_cast<Eigen::Index>(rows),
                    static_cast<Eigen::Index>(cols));
  std::string_view raw = r.GetBytes(sizeof(double) * rows * cols);
  std::memcpy(m.features.data(), raw.data(), raw.size());
  m.labels.resize(rows);
  for (auto& label : m.labels) label = r.Get<std::int8_t>();
  m.event_time.resize(rows);
  for (auto& t : m.event_time) t = r.Get<double>();
  if (!r.AtEnd()) throw Error(ErrorCode::kParse, "trailing bytes in matrix");
  return m;
}

void DesignMatrix::Save(const std::filesystem::path& path) const {
  WriteFileAtomic(path, Serialize());
}

DesignMatrix DesignMatrix::Load(const std::filesystem::path& path) {
  try {
    return Deserialize(ReadFile(path));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::string DesignMatrix::Fingerprint() const { return Sha256Hex(Serialize()); }

ClassCounts DesignMatrix::CountClasses() const {
  ClassCounts counts;
  for (int label : labels) {
    if (label == kNormal) {
      ++counts.normal;
    } else if (label == kAnomalous) {
      ++counts.anomalous;
    } else {
      ++counts.unlabeled;
    }
  }
  return counts;
}

DesignMatrix DesignMatrix::SelectRows(std::span<const std::size_t> rows) const {
  DesignMatrix out;
  out.schema_fingerprint = schema_fingerprint;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) =
        features.row(static_cast<Eigen::Index>(rows[i]));
    out.labels.push_back(labels[rows[i]]);
    out.event_time.push_back(event_time[rows[i]]);
  }
  return out;
}

void DesignMatrix::Validate() const {
  if (static_cast<std::size_t>(features.rows()) != labels.size() ||
      labels.size() != event_time.size()) {
    throw Error(ErrorCode::kData, "design matrix row counts disagree");
  }
  if (!features.allFinite()) {
    throw Error(ErrorCode::kData, "design matrix contains NaN or inf");
  }
}

DesignMatrix Concatenate(std::span<const DesignMatrix> parts) {
  DesignMatrix out;
  if (parts.empty()) return out;
  Eigen::Index total = 0;
  for (const DesignMatrix& p : parts) {
    if (p.features.cols() != parts.front().features.cols()) {
      throw Error(ErrorCode::kData, "cannot concatenate matrices of width " +
                                        std::to_string(p.cols()) + " and " +
                                        std::to_string(parts.front().cols()));
    }
    if (p.schema_fingerprint != parts.front().schema_fingerprint) {
      throw Error(ErrorCode::kData,
                  "cannot concatenate matrices from different schemas");
    }
    total += p.features.rows();
  }
  out.schema_fingerprint = parts.front().schema_fingerprint;
  out.features.resize(total, parts.front().features.cols());
  Eigen::Index at = 0;
  for (const DesignMatrix& p : parts) {
    out.features.middleRows(at, p.features.rows()) = p.features;
    at += p.features.rows();
    out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
    out.event_time.insert(out.event_time.end(), p.event_time.begin(),
                          p.event_time.end());
  }
  return out;
}

DesignMatrix Transform(const DataFrameTable& table, const FeatureSchema& schema) {
  const std::size_t n = table.num_rows();
  DesignMatrix out;
  out.schema_fingerprint = schema.fingerprint();
  out.labels = table.labels;
  out.event_time = table.event_time;
  out.features = FeatureMatrix::Zero(static_cast<Eigen::Index>(n),
                                     static_cast<Eigen::Index>(
                                         schema.output_dimension()));
  Eigen::Index offset = 0;
  for (std::size_t ci = 0; ci < schema.columns().size(); ++ci) {
    const ColumnSpec& spec = schema.columns()[ci];
    if (!table.HasColumn(spec.name)) {
      throw Error(ErrorCode::kSchema,
                  "column '" + spec.name + "' not present in table");
    }
    const TableColumn& col = table.column(spec.name);
    if (spec.kind == ColumnKind::kContinuous) {
      const double sentinel = spec.null_sentinel.value_or(kMissingMarker);
      for (std::size_t r = 0; r < n; ++r) {
        double v = 0.0;
        NumberParse parsed = col.is_null[r] ? NumberParse::kNonFinite
                                            : ParseNumber(col.text[r], v);
        double encoded = sentinel;
        if (parsed == NumberParse::kNotANumber) {
          throw Error(ErrorCode::kData, RowContext(spec.name, r) +
                                            ": non-numeric value '" +
                                            col.text[r] + "'");
        }
        if (parsed == NumberParse::kFinite) {
          if (spec.transform == ColumnTransform::kLog10p) {
            if (v < 0.0) {
              throw Error(ErrorCode::kData,
                          RowContext(spec.name, r) +
                              ": negative value under log10p transform");
            }
            encoded = std::log10(1.0 + v);
          } else {
            encoded = v;
          }
        }
        out.features(static_cast<Eigen::Index>(r), offset) = encoded;
      }
      offset += 1;
      continue;
    }

    const std::vector<std::string>& vocab = schema.vocabularies()[ci];
    std::unordered_map<std::string, Eigen::Index> position;
    for (std::size_t k = 0; k < vocab.size(); ++k) {
      position.emplace(vocab[k], static_cast<Eigen::Index>(k));
    }
    const auto others = position.find(kOthersBucket);
    const auto na = position.find(kNaBucket);
    for (std::size_t r = 0; r < n; ++r) {
      std::optional<Eigen::Index> slot;
      if (col.is_null[r] || col.text[r] == kNaBucket) {
        if (na != position.end()) {
          slot = na->second;
        } else if (others != position.end()) {
          slot = others->second;
        }
      } else if (auto it = position.find(col.text[r]); it != position.end()) {
        slot = it->second;
      } else if (others != position.end()) {
        slot = others->second;
      } else if (na != position.end()) {
        slot = na->second;
      }
      // With neither fallback bucket fitted, an unknown value encodes as all
      // zeros.
      if (slot) out.features(static_cast<Eigen::Index>(r), offset + *slot) = 1.0;
    }
    offset += static_cast<Eigen::Index>(vocab.size());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Time frames

bool TimeFrame::LabeledAvailable(std::chrono::year_month_day wall_date) const {
  using std::chrono::days;
  using std::chrono::sys_days;
  return sys_days(end) + days(label_delay_days) <= sys_days(wall_date);
}

std::vector<TimeFrame> MonthlySchedule(std::chrono::year_month first, int count,
                                       int label_delay_days) {
  std::vector<TimeFrame> frames;
  for (int i = 0; i < count; ++i) {
    const auto month = first + std::chrono::months(i);
    const auto next = month + std::chrono::months(1);
    frames.push_back(TimeFrame{i, month / std::chrono::day{1},
                               next / std::chrono::day{1}, label_delay_days});
  }
  return frames;
}

void ValidateSchedule(std::span<const TimeFrame> schedule) {
  using std::chrono::sys_days;
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const TimeFrame& f = schedule[i];
    if (!f.start.ok() || !f.end.ok() || sys_days(f.start) >= sys_days(f.end)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "frame " + std::to_string(f.index) + " has start >= end");
    }
    if (f.label_delay_days < 0) {
      throw Error(ErrorCode::kInvalidArgument, "negative label delay");
    }
    if (i > 0 && sys_days(schedule[i - 1].end) != sys_days(f.start)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "frames " + std::to_string(schedule[i - 1].index) + " and " +
                      std::to_string(f.index) + " are not contiguous");
    }
  }
}

std::chrono::year_month_day ParseDate(const std::string& iso_date) {
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  char tail = 0;
  if (std::sscanf(iso_date.c_str(), "%d-%u-%u%c", &y, &m, &d, &tail) != 3) {
    throw Error(ErrorCode::kParse, "expected YYYY-MM-DD, got '" + iso_date + "'");
  }
  std::chrono::year_month_day date{std::chrono::year{y}, std::chrono::month{m},
                                   std::chrono::day{d}};
  if (!date.ok()) {
    throw Error(ErrorCode::kParse, "invalid calendar date '" + iso_date + "'");
  }
  return date;
}

std::string FormatDate(std::chrono::year_month_day date) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", int(date.year()),
                unsigned(date.month()), unsigned(date.day()));
  return buf;
}

std::vector<int> AssignFrames(std::span<const double> event_time,
                              std::span<const TimeFrame> schedule) {
  ValidateSchedule(schedule);
  std::vector<double> bounds;  // starts of every frame, then the final end
  for (const TimeFrame& f : schedule) {
    bounds.push_back(static_cast<double>(SecondsSinceEpoch(f.start)));
  }
  if (!schedule.empty()) {
    bounds.push_back(static_cast<double>(SecondsSinceEpoch(schedule.back().end)));
  }
  std::vector<int> assignment(event_time.size(), -1);
  if (schedule.empty()) return assignment;
  for (std::size_t r = 0; r < event_time.size(); ++r) {
    const double t = event_time[r];
    if (t < bounds.front() || t >= bounds.back()) continue;
    auto it = std::upper_bound(bounds.begin(), bounds.end(), t);
    assignment[r] = static_cast<int>(it - bounds.begin()) - 1;
  }
  return assignment;
}

SliceResult SliceFrames(const DesignMatrix& matrix,
                        std::span<const TimeFrame> schedule) {
  const std::vector<int> assignment = AssignFrames(matrix.event_time, schedule);
  std::vector<std::vector<std::size_t>> members(schedule.size());
  SliceResult result;
  for (std::size_t r = 0; r < assignment.size(); ++r) {
    if (assignment[r] < 0) {
      ++result.dropped_rows;
    } else {
      members[static_cast<std::size_t>(assignment[r])].push_back(r);
    }
  }
  for (const auto& rows : members) {
    if (rows.empty()) ++result.empty_frames;
    result.frames.push_back(matrix.SelectRows(rows));
  }
  return result;
}

}  // namespace latkd
