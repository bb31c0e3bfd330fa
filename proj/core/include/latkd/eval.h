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

#ifndef LATKD_EVAL_H_
#define LATKD_EVAL_H_

#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace latkd {

struct PrPoint {
  double threshold = 0.0;
  double recall = 0.0;
  double precision = 0.0;
};

// One point per distinct score, visited from the highest score down. Rows
// with equal scores enter the positive set together.
struct PrCurve {
  std::vector<PrPoint> points;
  std::size_t positive_count = 0;
  std::size_t negative_count = 0;
};

// Labels must be 0 or 1 with at least one positive; scores must be finite.
PrCurve ComputePrCurve(std::span<const double> scores,
                       std::span<const int> labels);

// Step-wise average precision: sum over points of (R_k - R_{k-1}) * P_k.
double Auprc(const PrCurve& curve);

inline double Auprc(std::span<const double> scores, std::span<const int> labels) {
  return Auprc(ComputePrCurve(scores, labels));
}

// Mann-Whitney estimate with tie correction. Supplementary only.
double Auroc(std::span<const double> scores, std::span<const int> labels);

// Fraction of positive rows selected by `mask` that rank inside the top-P
// scores, P being the total number of positives (break-even operating point).
double RecallAtBreakEven(std::span<const double> scores,
                         std::span<const int> labels,
                         std::span<const std::uint8_t> mask);

struct RunReport {
  std::vector<double> auprc;
  std::vector<double> seconds;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for a single run

  static RunReport FromRuns(std::vector<double> auprc,
                            std::vector<double> seconds);
  nlohmann::json ToJson() const;
};

// 100 * (candidate.mean - baseline.mean) / baseline.mean.
double RelativeDiffPercent(const RunReport& candidate, const RunReport& baseline);

// Renders "x,y" lines of the curve for external plotting.
std::string PrCurveCsv(const PrCurve& curve);

}  // namespace latkd

#endif  // LATKD_EVAL_H_
