// Copyright 2026 The tcpbias Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Runs the command-line tool as a subprocess.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("tcpbias_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path path(const std::string& name) const { return dir_ / name; }

  void write(const std::string& name, const std::string& text) const {
    std::ofstream(path(name)) << text;
  }

  int run(const std::string& args) const {
    const std::string cmd = std::string(TCPBIAS_CLI) + " " + args + " >" +
                            path("stdout.txt").string() + " 2>" + path("stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  fs::path dir_;
};

TEST_F(CliTest, ScoreIdenticalFiles) {
  write("ref.jsonl", "{\"id\":\"u1\",\"ref\":\"a b c\"}\n{\"id\":\"u2\",\"ref\":\"d\"}\n");
  const auto ref = path("ref.jsonl").string();
  ASSERT_EQ(run("score --ref " + ref + " --hyp " + ref + " --out " + path("r.json").string()), 0);
  std::ifstream in(path("r.json"));
  const json j = json::parse(in);
  EXPECT_EQ(j.at("wer").at("rate"), 0.0);
  EXPECT_EQ(j.at("wer").at("ref_tokens"), 4);
  EXPECT_EQ(j.at("meta").at("command"), "score");
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(run("score --bogus"), 2);
  EXPECT_EQ(run("score --ref " + path("nope.jsonl").string() + " --hyp x"), 2);
  EXPECT_EQ(run(""), 2);
}

TEST_F(CliTest, RuntimeErrorsExitOne) {
  write("bad.jsonl", "{not json\n");
  const auto bad = path("bad.jsonl").string();
  EXPECT_EQ(run("score --ref " + bad + " --hyp " + bad), 1);
}

TEST_F(CliTest, FlagsOverrideConfigFile) {
  write("run.ini", "[gradcheck]\nconfigs = 1\ntolerance = 0\n");
  const auto ini = path("run.ini").string();
  EXPECT_EQ(run("--config " + ini + " gradcheck"), 1);
  EXPECT_EQ(run("--config " + ini + " gradcheck --tolerance 1e-4"), 0);
}

}  // namespace
