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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "latkd/errors.h"
#include "latkd/random.h"
#include "oracles/pr_oracle.h"

namespace latkd {
namespace {

struct Fixture {
  std::vector<double> scores;
  std::vector<int> labels;
};

// Coarse scores so ties are common.
Fixture RandomFixture(std::uint64_t seed) {
  Rng rng(seed);
  Fixture f;
  const std::size_t n = 1 + rng.Below(200);
  const int levels = 1 + static_cast<int>(rng.Below(20));
  for (std::size_t i = 0; i < n; ++i) {
    f.scores.push_back(static_cast<double>(rng.Below(levels)) / levels);
    f.labels.push_back(rng.Bernoulli(0.3) ? 1 : 0);
  }
  f.labels[rng.Below(n)] = 1;
  return f;
}

TEST(AuprcTest, MatchesEnumerationOracle) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Fixture f = RandomFixture(seed);
    EXPECT_NEAR(Auprc(f.scores, f.labels), oracle::EnumerateAuprc(f.scores, f.labels), 1e-12)
        << "seed " << seed;
  }
}

TEST(AuprcTest, CurveMatchesEnumerationOracle) {
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    Fixture f = RandomFixture(seed);
    PrCurve curve = ComputePrCurve(f.scores, f.labels);
    auto expected = oracle::EnumeratePrCurve(f.scores, f.labels);
    ASSERT_EQ(curve.points.size(), expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
      EXPECT_EQ(curve.points[i].threshold, expected[i].threshold);
      EXPECT_NEAR(curve.points[i].recall, expected[i].recall, 1e-12);
      EXPECT_NEAR(curve.points[i].precision, expected[i].precision, 1e-12);
    }
  }
}

TEST(AuprcTest, WorkedExample) {
  // Hand count: recall 1/2 at precision 1, recall 2/2 at precision 2/3.
  std::vector<double> s = {0.9, 0.8, 0.7, 0.6};
  std::vector<int> y = {1, 0, 1, 0};
  EXPECT_NEAR(Auprc(s, y), 0.5 + 0.5 * 2.0 / 3.0, 1e-12);
}

TEST(AuprcTest, AllTiedScoresGivePrevalence) {
  std::vector<double> s(10, 0.5);
  std::vector<int> y = {1, 0, 0, 1, 0, 0, 0, 1, 0, 0};
  EXPECT_NEAR(Auprc(s, y), 0.3, 1e-12);
}

TEST(AuprcTest, PerfectRankingIsOne) {
  std::vector<double> s = {0.1, 0.95, 0.2, 0.9, 0.3};
  std::vector<int> y = {0, 1, 0, 1, 0};
  EXPECT_DOUBLE_EQ(Auprc(s, y), 1.0);
}

TEST(AuprcTest, RandomScorerApproachesPrevalence) {
  Rng rng(7);
  const std::size_t n = 100000;
  std::vector<double> s(n);
  std::vector<int> y(n);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = rng.Uniform();
    y[i] = rng.Bernoulli(0.1) ? 1 : 0;
    pos += y[i];
  }
  EXPECT_NEAR(Auprc(s, y), static_cast<double>(pos) / n, 0.01);
}

TEST(AuprcTest, InvariantUnderMonotoneTransform) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Fixture f = RandomFixture(seed);
    std::vector<double> t(f.scores.size());
    std::transform(f.scores.begin(), f.scores.end(), t.begin(),
                   [](double x) { return std::exp(3.0 * x) - 2.0; });
    EXPECT_NEAR(Auprc(f.scores, f.labels), Auprc(t, f.labels), 1e-12);
  }
}

TEST(AuprcTest, BoundedByZeroAndOne) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Fixture f = RandomFixture(seed + 500);
    double a = Auprc(f.scores, f.labels);
    EXPECT_GT(a, 0.0);
    EXPECT_LE(a, 1.0 + 1e-12);
  }
}

TEST(AuprcTest, RejectsBadInput) {
  std::vector<double> s = {0.1, 0.2};
  std::vector<int> no_pos = {0, 0};
  EXPECT_THROW(Auprc(s, no_pos), Error);
  std::vector<int> bad = {0, 2};
  EXPECT_THROW(Auprc(s, bad), Error);
  std::vector<int> short_labels = {1};
  EXPECT_THROW(Auprc(s, short_labels), Error);
  std::vector<double> nan = {std::nan(""), 0.1};
  std::vector<int> y = {1, 0};
  EXPECT_THROW(Auprc(nan, y), Error);
}

TEST(AurocTest, KnownValues) {
  std::vector<double> s = {0.9, 0.8, 0.7, 0.6};
  std::vector<int> y = {1, 0, 1, 0};
  EXPECT_NEAR(Auroc(s, y), 0.75, 1e-12);
  std::vector<double> tied(4, 0.3);
  EXPECT_NEAR(Auroc(tied, y), 0.5, 1e-12);
}

TEST(ReportTest, MeanAndSampleStddev) {
  auto r = RunReport::FromRuns({0.5, 0.7}, {1.0, 3.0});
  EXPECT_DOUBLE_EQ(r.mean, 0.6);
  EXPECT_NEAR(r.stddev, std::sqrt(0.02), 1e-12);
  EXPECT_EQ(RunReport::FromRuns({0.4}, {1.0}).stddev, 0.0);
}

TEST(ReportTest, RelativeDiffExamples) {
  auto base = RunReport::FromRuns({0.5}, {1.0});
  EXPECT_NEAR(RelativeDiffPercent(RunReport::FromRuns({0.518}, {1.0}), base), 3.6, 1e-9);
  EXPECT_NEAR(RelativeDiffPercent(RunReport::FromRuns({0.4965}, {1.0}), base), -0.7, 1e-9);
  EXPECT_EQ(RelativeDiffPercent(base, base), 0.0);
  auto zero = RunReport::FromRuns({0.0}, {1.0});
  EXPECT_THROW(RelativeDiffPercent(base, zero), Error);
}

TEST(BreakEvenTest, CountsMaskedPositivesInTopP) {
  // Three positives, so the top 3 scores are flagged.
  std::vector<double> s = {0.9, 0.8, 0.7, 0.6, 0.5};
  std::vector<int> y = {1, 0, 1, 0, 1};
  std::vector<std::uint8_t> all = {1, 1, 1, 1, 1};
  EXPECT_NEAR(RecallAtBreakEven(s, y, all), 2.0 / 3.0, 1e-12);
  std::vector<std::uint8_t> last = {0, 0, 0, 0, 1};
  EXPECT_EQ(RecallAtBreakEven(s, y, last), 0.0);
  std::vector<std::uint8_t> first = {1, 0, 0, 0, 0};
  EXPECT_EQ(RecallAtBreakEven(s, y, first), 1.0);
}

TEST(PrCurveCsvTest, OneLinePerPoint) {
  std::vector<double> s = {0.9, 0.8, 0.7};
  std::vector<int> y = {1, 0, 1};
  std::string csv = PrCurveCsv(ComputePrCurve(s, y));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);  // header + 3 points
}

}  // namespace
}  // namespace latkd
