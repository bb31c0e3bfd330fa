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

#ifndef LATKD_TESTS_TEST_UTIL_H_
#define LATKD_TESTS_TEST_UTIL_H_

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "latkd/data.h"
#include "latkd/model.h"
#include "latkd/random.h"

namespace latkd::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string pattern =
        (std::filesystem::temp_directory_path() / "latkd-test-XXXXXX").string();
    char* made = mkdtemp(pattern.data());
    if (made == nullptr) std::abort();
    path_ = made;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Two Gaussian blobs; with margin > 0 the classes are linearly separable along
// the first feature.
inline DesignMatrix ToyData(std::uint64_t seed, std::size_t rows, std::size_t cols,
                            double positive_rate, double margin) {
  Rng rng(seed);
  DesignMatrix m;
  m.features.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  m.labels.resize(rows);
  m.event_time.assign(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const bool pos = static_cast<double>(r) < positive_rate * static_cast<double>(rows);
    m.labels[r] = pos ? kAnomalous : kNormal;
    for (std::size_t c = 0; c < cols; ++c) {
      m.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rng.Normal();
    }
    double& x0 = m.features(static_cast<Eigen::Index>(r), 0);
    if (margin > 0.0) {
      x0 = pos ? margin + std::abs(x0) : -margin - std::abs(x0);
    } else if (pos) {
      x0 += 1.0;
    }
    m.event_time[r] = static_cast<double>(r);
  }
  return m;
}

// Random row-stochastic n x 2 matrix.
inline ProbMatrix RandomProbs(std::uint64_t seed, std::size_t rows) {
  Rng rng(seed);
  ProbMatrix p(static_cast<Eigen::Index>(rows), 2);
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    const double q = rng.Uniform(0.02, 0.98);
    p(r, 0) = 1.0 - q;
    p(r, 1) = q;
  }
  return p;
}

inline ProbMatrix OneHot(const std::vector<int>& labels) {
  ProbMatrix p(static_cast<Eigen::Index>(labels.size()), 2);
  for (std::size_t r = 0; r < labels.size(); ++r) {
    p(static_cast<Eigen::Index>(r), 0) = labels[r] == 1 ? 0.0 : 1.0;
    p(static_cast<Eigen::Index>(r), 1) = labels[r] == 1 ? 1.0 : 0.0;
  }
  return p;
}

}  // namespace latkd::testing

#endif  // LATKD_TESTS_TEST_UTIL_H_
