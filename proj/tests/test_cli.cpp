// Copyright 2026 The ecss-desk Authors
// SPDX-License-Identifier: Apache-2.0
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

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

int run(const std::string& args) {
  const std::string cmd = std::string(ECSS_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  fs::path dir;

  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("ecss_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  std::string d(const std::string& sub = "") const { return (dir / sub).string(); }
};

TEST_F(Cli, HelpAndArgumentErrors) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("gen-data --no-such-flag"), 1);
  EXPECT_EQ(run("gen-data --persistence 1.5 --out-dir " + d()), 1);
  EXPECT_EQ(run("train --corpus x.jsonl --profile toy"), 1);
}

TEST_F(Cli, GenDataIsIdenticalAcrossThreadCounts) {
  ASSERT_EQ(run("gen-data --n 40 --seed 3 --threads 1 --out a.jsonl --out-dir " + d()), 0);
  ASSERT_EQ(run("gen-data --n 40 --seed 3 --threads 3 --out b.jsonl --out-dir " + d()), 0);
  EXPECT_EQ(slurp(dir / "a.jsonl"), slurp(dir / "b.jsonl"));
  const auto cfg = json::parse(slurp(dir / "gen-data.config.json"));
  EXPECT_EQ(cfg["command"], "gen-data");
  EXPECT_EQ(cfg["flags"]["n"], 40);
  EXPECT_EQ(cfg["flags"]["threads"], 3);
}

TEST_F(Cli, MissingInputIsAnIoError) {
  EXPECT_EQ(run("train --corpus " + d("missing.jsonl") + " --out-dir " + d()), 2);
  EXPECT_EQ(run("eval --checkpoint " + d("none.ecss") + " --corpus " + d("none.jsonl") + " --out-dir " + d()),
            2);
}

TEST_F(Cli, CorruptInputsExitWithOne) {
  {
    std::ofstream(dir / "bad.jsonl") << "{\"id\": \"x\"\n";
  }
  EXPECT_EQ(run("train --corpus " + d("bad.jsonl") + " --out-dir " + d()), 1);
  {
    std::ofstream(dir / "bad.ecss") << "ECSS garbage";
  }
  ASSERT_EQ(run("gen-data --n 10 --out-dir " + d()), 0);
  EXPECT_EQ(run("eval --checkpoint " + d("bad.ecss") + " --corpus " + d("corpus.jsonl") + " --out-dir " + d()),
            1);
}

TEST_F(Cli, TrainResumeEvalPlotPredict) {
  ASSERT_EQ(run("gen-data --n 30 --mean-turns 4 --seed 1 --out-dir " + d()), 0);
  const std::string corpus = " --corpus " + d("corpus.jsonl");
  const std::string common = corpus + " --batch 2 --context-length 2 --seed 4";

  ASSERT_EQ(run("train" + common + " --steps 3 --out-dir " + d("full")), 0);
  const std::string metrics = slurp(dir / "full/metrics.csv");
  EXPECT_EQ(metrics.substr(0, metrics.find('\n')), "step,l_cl_emo,l_cl_int,l_mse_pro,l_fs2,total");
  EXPECT_EQ(std::count(metrics.begin(), metrics.end(), '\n'), 4);
  const auto echo = json::parse(slurp(dir / "full/train.config.json"));
  EXPECT_EQ(echo["flags"]["batch"], 2);
  EXPECT_EQ(echo["final_step"], 3);

  ASSERT_EQ(run("train" + common + " --steps 2 --out-dir " + d("half")), 0);
  ASSERT_EQ(run("train" + common + " --steps 3 --resume " + d("half/checkpoint.ecss") + " --out-dir " + d("rest")),
            0);
  const std::string rest = slurp(dir / "rest/metrics.csv");
  EXPECT_EQ(rest.substr(rest.rfind('\n', rest.size() - 2)), metrics.substr(metrics.rfind('\n', metrics.size() - 2)));
  EXPECT_EQ(slurp(dir / "rest/checkpoint.ecss"), slurp(dir / "full/checkpoint.ecss"));

  const std::string ckpt = " --checkpoint " + d("full/checkpoint.ecss");
  ASSERT_EQ(run("eval" + ckpt + corpus + " --out-dir " + d("eval")), 0);
  for (const char* f : {"eval_report.json", "eval_report.csv", "emotion_confusion.csv", "intensity_confusion.csv",
                        "eval.config.json"})
    EXPECT_TRUE(fs::exists(dir / "eval" / f)) << f;
  EXPECT_EQ(run("eval" + ckpt + corpus + " --split nope --out-dir " + d("eval")), 1);

  ASSERT_EQ(run("plot --report " + d("eval/eval_report.json") + " --out-dir " + d("plot")), 0);
  EXPECT_EQ(slurp(dir / "plot/emotion_confusion.svg").rfind("<svg", 0), 0u);
  EXPECT_TRUE(fs::exists(dir / "plot/intensity_confusion.svg"));

  json ctx;
  {
    std::ifstream in(dir / "corpus.jsonl");
    for (std::string line; std::getline(in, line);) {
      ctx = json::parse(line);
      if (ctx["turns"].size() >= 3) break;
    }
  }
  ASSERT_GE(ctx["turns"].size(), 3u);
  ctx["current_index"] = 2;
  std::ofstream(dir / "ctx.json") << ctx.dump();
  ASSERT_EQ(run("predict" + ckpt + " --context " + d("ctx.json") + " --out-dir " + d("p1")), 0);
  ASSERT_EQ(run("predict" + ckpt + " --context " + d("ctx.json") + " --out-dir " + d("p2")), 0);
  EXPECT_EQ(slurp(dir / "p1/prediction.mel"), slurp(dir / "p2/prediction.mel"));
  const auto pred = json::parse(slurp(dir / "p1/prediction.json"));
  EXPECT_EQ(fs::file_size(dir / "p1/prediction.mel"), 8u + pred["frames"].get<std::uintmax_t>() * 80u * 4u);
  ctx["current_index"] = 0;
  std::ofstream(dir / "ctx0.json") << ctx.dump();
  EXPECT_EQ(run("predict" + ckpt + " --context " + d("ctx0.json") + " --out-dir " + d("p3")), 1);
}

}  // namespace
