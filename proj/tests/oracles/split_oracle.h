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

#ifndef LATKD_TESTS_ORACLES_SPLIT_ORACLE_H_
#define LATKD_TESTS_ORACLES_SPLIT_ORACLE_H_

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "latkd/data.h"

namespace latkd::oracle {

struct Regularization {
  double lambda = 0.0;
  double alpha = 0.0;
  double gamma = 0.0;
  double min_child_weight = 0.0;
};

struct OracleSplit {
  int feature = -1;
  double threshold = 0.0;
  bool missing_left = true;
  double gain = 0.0;
};

inline double OracleLeafWeight(double g, double h, const Regularization& reg) {
  const double shrunk = std::max(std::abs(g) - reg.alpha, 0.0);
  return (g > 0 ? -shrunk : shrunk) / (h + reg.lambda);
}

// Tries every feature, every threshold strictly between two distinct present
// values of the node (threshold = the larger one, rows below go left) and
// both directions for rows holding kMissingMarker. Child sums are recomputed
// from scratch for each candidate. Returns the strictly best positive gain,
// keeping the first candidate in (feature, threshold, missing-left first)
// order on ties.
inline std::optional<OracleSplit> BruteForceSplit(const FeatureMatrix& x,
                                                  const std::vector<std::size_t>& rows,
                                                  const std::vector<std::size_t>& features,
                                                  const std::vector<double>& g,
                                                  const std::vector<double>& h,
                                                  const Regularization& reg) {
  double gs = 0;
  double hs = 0;
  for (std::size_t r : rows) {
    gs += g[r];
    hs += h[r];
  }
  const double parent = gs * gs / (hs + reg.lambda);
  std::optional<OracleSplit> best;
  std::vector<std::size_t> sorted_features = features;
  std::sort(sorted_features.begin(), sorted_features.end());
  for (std::size_t f : sorted_features) {
    const auto fi = static_cast<Eigen::Index>(f);
    std::vector<double> values;
    for (std::size_t r : rows) {
      const double v = x(static_cast<Eigen::Index>(r), fi);
      if (v != kMissingMarker) values.push_back(v);
    }
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (std::size_t k = 1; k < values.size(); ++k) {
      const double t = values[k];
      for (bool missing_left : {true, false}) {
        double gl = 0, hl = 0, gr = 0, hr = 0;
        for (std::size_t r : rows) {
          const double v = x(static_cast<Eigen::Index>(r), fi);
          const bool left = v == kMissingMarker ? missing_left : v < t;
          (left ? gl : gr) += g[r];
          (left ? hl : hr) += h[r];
        }
        if (hl < reg.min_child_weight || hr < reg.min_child_weight) continue;
        const double gain =
            0.5 * (gl * gl / (hl + reg.lambda) + gr * gr / (hr + reg.lambda) - parent) - reg.gamma;
        if (gain > 0 && (!best || gain > best->gain)) {
          best = OracleSplit{static_cast<int>(f), t, missing_left, gain};
        }
      }
    }
  }
  return best;
}

}  // namespace latkd::oracle

#endif  // LATKD_TESTS_ORACLES_SPLIT_ORACLE_H_
