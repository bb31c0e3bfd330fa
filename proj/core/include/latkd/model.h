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

#ifndef LATKD_MODEL_H_
#define LATKD_MODEL_H_

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <string>
#include <string_view>

#include "latkd/data.h"

namespace latkd {

// Row r holds [P(normal), P(anomalous)] for input row r.
using ProbMatrix = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;

enum class ModelKind { kMlp, kGbt, kEnsemble };

std::string_view ModelKindName(ModelKind kind);
ModelKind ParseModelKind(std::string_view name);

// A trained, immutable binary classifier.
class Model {
 public:
  virtual ~Model() = default;

  virtual ModelKind kind() const = 0;
  virtual std::size_t input_width() const = 0;
  // Deterministic inference-mode scoring.
  virtual ProbMatrix Predict(const FeatureMatrix& batch) const = 0;
  // Canonical bytes; the content hash of a model is SHA-256 over these.
  virtual std::string Serialize() const = 0;

  std::string ContentHash() const;
};

using ModelPtr = std::shared_ptr<const Model>;

// Returns the bytes stored under a content hash (used to resolve ensemble
// members).
using BlobResolver = std::function<std::string(const std::string& hash)>;

ModelPtr DeserializeModel(std::string_view bytes, const BlobResolver& resolver);

// Positive-class column of a probability matrix.
std::vector<double> PositiveScores(const ProbMatrix& probs);

// Throws kInvalidArgument unless every row is nonnegative and sums to 1
// within `tolerance`. `what` names the matrix in the message.
void ValidateDistributionRows(const ProbMatrix& probs, std::string_view what,
                              double tolerance = 1e-6);

// Throws kInvalidArgument naming expected and actual widths.
void CheckInputWidth(std::size_t expected, Eigen::Index actual);

}  // namespace latkd

#endif  // LATKD_MODEL_H_
