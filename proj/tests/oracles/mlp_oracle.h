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

#ifndef LATKD_TESTS_ORACLES_MLP_ORACLE_H_
#define LATKD_TESTS_ORACLES_MLP_ORACLE_H_

#include <algorithm>
#include <cmath>
#include <vector>

#include "latkd/mlp.h"

namespace latkd::oracle {

// Scalar-loop inference forward pass: dense + relu per hidden layer, the
// first hidden layer followed by running-statistics normalization when the
// architecture has it, then a softmax output.
inline std::vector<std::vector<double>> ForwardByLoops(const MlpModel& model,
                                                       const std::vector<std::vector<double>>& rows) {
  const MlpParameters& p = model.parameters();
  const std::size_t layers = p.weights.size();
  std::vector<std::vector<double>> out;
  for (const auto& input : rows) {
    std::vector<double> a = input;
    for (std::size_t l = 0; l < layers; ++l) {
      const auto& w = p.weights[l];
      std::vector<double> z(static_cast<std::size_t>(w.cols()));
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        double s = p.biases[l](j);
        for (Eigen::Index i = 0; i < w.rows(); ++i) s += a[static_cast<std::size_t>(i)] * w(i, j);
        z[static_cast<std::size_t>(j)] = s;
      }
      if (l + 1 < layers) {
        for (double& v : z) v = std::max(v, 0.0);
        if (l == 0 && model.architecture().batch_norm_after_first) {
          for (std::size_t j = 0; j < z.size(); ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            z[j] = p.bn_gamma(jj) * (z[j] - model.running_mean()(jj)) /
                       std::sqrt(model.running_var()(jj) + model.bn_epsilon()) +
                   p.bn_beta(jj);
          }
        }
      } else {
        const double m = std::max(z[0], z[1]);
        const double e0 = std::exp(z[0] - m);
        const double e1 = std::exp(z[1] - m);
        z = {e0 / (e0 + e1), e1 / (e0 + e1)};
      }
      a = z;
    }
    out.push_back(a);
  }
  return out;
}

}  // namespace latkd::oracle

#endif  // LATKD_TESTS_ORACLES_MLP_ORACLE_H_
