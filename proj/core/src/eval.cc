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

#include "latkd/eval.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "latkd/errors.h"
#include "latkd/io.h"

namespace latkd {
namespace {

void CheckInputs(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "scores and labels differ in length");
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) {
      throw Error(ErrorCode::kInvalidArgument,
                  "non-finite score at row " + std::to_string(i));
    }
    if (labels[i] != 0 && labels[i] != 1) {
      throw Error(ErrorCode::kInvalidArgument,
                  "label at row " + std::to_string(i) + " is not 0 or 1");
    }
  }
}

std::vector<std::size_t> DescendingOrder(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  return order;
}

}  // namespace

PrCurve ComputePrCurve(std::span<const double> scores,
                       std::span<const int> labels) {
  CheckInputs(scores, labels);
  PrCurve curve;
  curve.positive_count =
      static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  curve.negative_count = labels.size() - curve.positive_count;
  if (curve.positive_count == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "precision-recall curve needs at least one positive label");
  }
  const std::vector<std::size_t> order = DescendingOrder(scores);
  const double positives = static_cast<double>(curve.positive_count);
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double threshold = scores[order[i]];
    while (i < order.size() && scores[order[i]] == threshold) {
      if (labels[order[i]] == 1) {
        ++tp;
      } else {
        ++fp;
      }
      ++i;
    }
    curve.points.push_back(PrPoint{
        threshold, static_cast<double>(tp) / positives,
        static_cast<double>(tp) / static_cast<double>(tp + fp)});
  }
  return curve;
}

double Auprc(const PrCurve& curve) {
  double area = 0.0;
  double previous_recall = 0.0;
  for (const PrPoint& p : curve.points) {
    area += (p.recall - previous_recall) * p.precision;
    previous_recall = p.recall;
  }
  return area;
}

double Auroc(std::span<const double> scores, std::span<const int> labels) {
  CheckInputs(scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });
  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + j + 1);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        positive_rank_sum += mid_rank;
        ++positives;
      }
    }
    i = j;
  }
  const std::size_t negatives = scores.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw Error(ErrorCode::kInvalidArgument, "AUROC needs both classes");
  }
  const double p = static_cast<double>(positives);
  return (positive_rank_sum - p * (p + 1.0) / 2.0) /
         (p * static_cast<double>(negatives));
}

double RecallAtBreakEven(std::span<const double> scores,
                         std::span<const int> labels,
                         std::span<const std::uint8_t> mask) {
  CheckInputs(scores, labels);
  if (mask.size() != labels.size()) {
    throw Error(ErrorCode::kInvalidArgument, "mask length mismatch");
  }
  const auto positives =
      static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (positives == 0) return 0.0;
  const std::vector<std::size_t> order = DescendingOrder(scores);
  const double cutoff = scores[order[positives - 1]];
  std::size_t selected = 0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 1 || !mask[i]) continue;
    ++selected;
    // Rows tied with the cutoff score count as flagged.
    if (scores[i] >= cutoff) ++hit;
  }
  return selected == 0 ? 0.0
                       : static_cast<double>(hit) / static_cast<double>(selected);
}

RunReport RunReport::FromRuns(std::vector<double> auprc,
                              std::vector<double> seconds) {
  RunReport report;
  report.auprc = std::move(auprc);
  report.seconds = std::move(seconds);
  const double n = static_cast<double>(report.auprc.size());
  if (report.auprc.empty()) return report;
  report.mean =
      std::accumulate(report.auprc.begin(), report.auprc.end(), 0.0) / n;
  if (report.auprc.size() > 1) {
    double ss = 0.0;
    for (double v : report.auprc) ss += (v - report.mean) * (v - report.mean);
    report.stddev = std::sqrt(ss / (n - 1.0));
  }
  return report;
}

nlohmann::json RunReport::ToJson() const {
  return {{"auprc", auprc},
          {"seconds", seconds},
          {"mean", mean},
          {"stddev", stddev}};
}

double RelativeDiffPercent(const RunReport& candidate,
                           const RunReport& baseline) {
  if (candidate.auprc.empty() || baseline.auprc.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "relative difference of empty report");
  }
  if (baseline.mean == 0.0) {
    throw Error(ErrorCode::kInvalidArgument,
                "relative difference against a zero baseline mean");
  }
  return 100.0 * (candidate.mean - baseline.mean) / baseline.mean;
}

std::string PrCurveCsv(const PrCurve& curve) {
  std::ostringstream out;
  out << "threshold,recall,precision\n";
  for (const PrPoint& p : curve.points) {
    out << FormatDouble(p.threshold) << ',' << FormatDouble(p.recall) << ','
        << FormatDouble(p.precision) << '\n';
  }
  return out.str();
}

}  // namespace latkd
