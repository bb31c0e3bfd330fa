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

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include "json.hpp"
#include "latkd/io.h"
#include "test_util.h"

namespace latkd {
namespace {

struct Outcome {
  int exit_code = -1;
  std::string out;
  std::string err;
};

Outcome Invoke(const testing::TempDir& dir, const std::string& args, const std::string& env = "") {
  const std::string out = (dir / "stdout.txt").string();
  const std::string err = (dir / "stderr.txt").string();
  const std::string cmd = env + " '" LATKD_CLI_PATH "' " + args + " >'" + out + "' 2>'" + err + "'";
  const int status = std::system(cmd.c_str());
  Outcome o;
  o.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  o.out = ReadFile(out);
  o.err = ReadFile(err);
  return o;
}

// Last line of stderr parsed as the error document.
std::string ErrorCodeOf(const Outcome& o) {
  std::string line = o.err;
  while (!line.empty() && line.back() == '\n') line.pop_back();
  line = line.substr(line.rfind('\n') == std::string::npos ? 0 : line.rfind('\n') + 1);
  return nlohmann::json::parse(line).at("error").at("code").get<std::string>();
}

TEST(CliTest, MissingSubcommandIsUsageError) {
  testing::TempDir dir;
  Outcome o = Invoke(dir, "");
  EXPECT_EQ(o.exit_code, 2);
  EXPECT_EQ(ErrorCodeOf(o), "usage");
}

TEST(CliTest, UnknownConfigFileIsUsageError) {
  testing::TempDir dir;
  Outcome o = Invoke(dir, "experiment -c /definitely/not/here.json");
  EXPECT_EQ(o.exit_code, 2);
  EXPECT_EQ(ErrorCodeOf(o), "usage");
}

TEST(CliTest, MissingManifestReportsErrorJson) {
  testing::TempDir dir;
  Outcome o = Invoke(dir, "report --run-id nope --run-root '" + dir.path().string() + "'");
  EXPECT_EQ(o.exit_code, 1);
  EXPECT_FALSE(ErrorCodeOf(o).empty());
}

TEST(CliTest, MissingInputCsvIsNotFound) {
  testing::TempDir dir;
  Outcome o = Invoke(dir, "preprocess -i '" + (dir / "none.csv").string() + "' -o '" +
                           (dir / "out").string() + "'");
  EXPECT_EQ(o.exit_code, 1);
  EXPECT_EQ(ErrorCodeOf(o), "not_found");
}

TEST(CliTest, InvalidConfigValueIsReported) {
  testing::TempDir dir;
  std::ofstream(dir / "bad.json") << R"({"frames_dir": "x", "runs": 0})";
  Outcome o = Invoke(dir, "experiment -q -c '" + (dir / "bad.json").string() + "'");
  EXPECT_EQ(o.exit_code, 1);
  EXPECT_EQ(ErrorCodeOf(o), "invalid_argument");
}

TEST(CliTest, GenerateExperimentAndReport) {
  testing::TempDir dir;
  const std::string data = (dir / "data").string();
  Outcome g = Invoke(dir, "generate --testbed-seed 1 -o '" + data + "'");
  ASSERT_EQ(g.exit_code, 0) << g.err;
  EXPECT_TRUE(std::filesystem::exists(dir / "data/frames/frames.json"));

  nlohmann::json config = {{"frames_dir", data + "/frames"},
                           {"variants", {"XG", "XG-LATKD"}},
                           {"baseline", "XG"},
                           {"runs", 1},
                           {"run_id", "cli"},
                           {"gbt", {{"n_estimators", 5}}}};
  std::ofstream(dir / "exp.json") << config.dump();
  const std::string root = (dir / "root").string();
  Outcome e = Invoke(dir, "experiment -q -c '" + (dir / "exp.json").string() + "'",
                  "LATKD_RUN_ROOT='" + root + "'");
  ASSERT_EQ(e.exit_code, 0) << e.err;
  EXPECT_NE(e.out.find("manifest hash"), std::string::npos);
  const auto run_dir = dir / "root/runs/cli";
  ASSERT_TRUE(std::filesystem::exists(run_dir / "manifest.json"));
  const std::string table2 = ReadFile(run_dir / "reports/table2.txt");

  std::filesystem::remove_all(run_dir / "reports");
  Outcome r = Invoke(dir, "report --run-id cli --run-root '" + root + "'");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_EQ(ReadFile(run_dir / "reports/table2.txt"), table2);
}

}  // namespace
}  // namespace latkd
