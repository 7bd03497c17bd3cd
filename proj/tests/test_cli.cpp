#include <gtest/gtest.h>
#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "deepgnn/checkpoint.hpp"
#include "deepgnn/dataset.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int status = -1;
  std::string out;
};

Result cli(const std::string& args) {
  const std::string cmd = std::string(DEEPGNN_CLI_PATH) + " " + args + " 2>/dev/null";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf;
  std::size_t got;
  while ((got = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), got);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::vector<std::vector<std::string>> csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(cell);
    if (!line.empty() && line.back() == ',') row.emplace_back();
    rows.push_back(row);
  }
  return rows;
}

fs::path scratch(const std::string& name) {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  fs::path p = fs::temp_directory_path() / "deepgnn_tests" / (std::string("cli_") + info->name() + "_" + name);
  fs::create_directories(p.parent_path());
  fs::remove_all(p);
  return p;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string kQuickTrain = "train --dataset synthetic --max-epochs 8 --hidden 16";

}  // namespace

TEST(Cli, HelpDocumentsSchemas) {
  const auto r = cli("--help");
  EXPECT_EQ(r.status, 0);
  EXPECT_NE(r.out.find("key,acc_mean,acc_std,smv_g"), std::string::npos);
  EXPECT_NE(r.out.find("kind,k,frobenius_residual"), std::string::npos);
  EXPECT_NE(r.out.find("layer_or_hop,smv_g,accuracy"), std::string::npos);
  for (const char* sub : {"train", "sweep-depth", "sweep-trainsize", "converge", "smoothness", "gradcheck"})
    EXPECT_NE(r.out.find(sub), std::string::npos) << sub;
}

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(cli("").status, 1);
  EXPECT_EQ(cli("train --dataset toy --bogus").status, 1);
  EXPECT_EQ(cli("train --dataset synthetic --model dagnn --k 0").status, 1);
  EXPECT_EQ(cli("train --dataset synthetic --model gcn --depth 0").status, 1);
  EXPECT_EQ(cli("converge --graph path:x").status, 1);
  EXPECT_EQ(cli("smoothness --hops 1,2").status, 1);
  EXPECT_EQ(cli("train --dataset synthetic --dropout 1.0").status, 1);
}

TEST(Cli, DataErrorsExitTwo) {
  EXPECT_EQ(cli("train --dataset /nonexistent/deepgnn").status, 2);
  EXPECT_EQ(cli("stats --dataset no_such_dataset").status, 2);
  EXPECT_EQ(cli("train --dataset toy --split fixed --max-epochs 1").status, 2);
}

TEST(Cli, NotConvergedExitsThree) {
  const auto r = cli("converge --graph path:40 --kind rowavg --max-k 10");
  EXPECT_EQ(r.status, 3);
  EXPECT_EQ(csv(r.out).size(), 11u);
}

TEST(Cli, ConvergeMonotone) {
  const auto r = cli("converge --graph path:3 --kind rowavg");
  ASSERT_EQ(r.status, 0);
  const auto rows = csv(r.out);
  ASSERT_GE(rows.size(), 3u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"kind", "k", "frobenius_residual"}));
  double prev = INFINITY;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    ASSERT_EQ(rows[i].size(), 3u);
    EXPECT_EQ(rows[i][0], "rowavg");
    EXPECT_EQ(std::stoul(rows[i][1]), i);
    const double v = std::stod(rows[i][2]);
    EXPECT_LE(v, prev);
    prev = v;
  }
  EXPECT_LT(prev, 1e-6);
}

TEST(Cli, ConvergeBothKinds) {
  const auto rows = csv(cli("converge --graph cycle:5 --kind both").out);
  bool row_avg = false, sym = false;
  for (const auto& row : rows) {
    row_avg |= row[0] == "rowavg";
    sym |= row[0] == "symmetric";
  }
  EXPECT_TRUE(row_avg && sym);
}

TEST(Cli, GradcheckPasses) {
  const auto r = cli("gradcheck --model dagnn --k 5");
  ASSERT_EQ(r.status, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_NE(j.dump().find("dagnn"), std::string::npos);
  EXPECT_EQ(cli("gradcheck --model all").status, 0);
}

TEST(Cli, ToySmoothnessIsZero) {
  const auto r = cli("smoothness --dataset toy");
  ASSERT_EQ(r.status, 0);
  const auto rows = csv(r.out);
  ASSERT_EQ(rows.size(), 9u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"layer_or_hop", "smv_g", "accuracy"}));
  for (std::size_t i = 1; i < rows.size(); ++i) {
    ASSERT_EQ(rows[i].size(), 3u);
    EXPECT_LT(std::abs(std::stod(rows[i][1])), 1e-12) << rows[i][0];
    EXPECT_EQ(rows[i][2], "");
  }
}

TEST(Cli, SmoothnessDecreasesOnGraph) {
  const auto rows = csv(cli("smoothness --graph sbm:20,20,0.3,0.05,2 --hops 0,8,64").out);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_GT(std::stod(rows[1][1]), std::stod(rows[2][1]));
  EXPECT_GT(std::stod(rows[2][1]), std::stod(rows[3][1]));
}

TEST(Cli, TrainJsonAndDeterminism) {
  const std::string cmd = kQuickTrain + " --model dagnn --k 3 --runs 1 --seed 5";
  const auto a = cli(cmd);
  const auto b = cli(cmd);
  ASSERT_EQ(a.status, 0);
  EXPECT_EQ(a.out, b.out);
  const auto j = nlohmann::json::parse(a.out);
  EXPECT_TRUE(j.contains("mean_accuracy"));
  EXPECT_TRUE(j.contains("std_accuracy"));
  ASSERT_EQ(j["runs"].size(), 1u);
  EXPECT_EQ(j["runs"][0]["seed"], 5);
  EXPECT_EQ(j["config"]["depth"], 3);
}

TEST(Cli, ThreadCountDoesNotChangeOutput) {
  const std::string cmd = kQuickTrain + " --model gcn --runs 3";
  EXPECT_EQ(cli(cmd + " --threads 1").out, cli(cmd + " --threads 3").out);
}

TEST(Cli, OutputFileMatchesStdout) {
  const auto path = scratch("out.json");
  const std::string cmd = kQuickTrain + " --model mlp";
  ASSERT_EQ(cli(cmd + " -o " + path.string()).status, 0);
  EXPECT_EQ(read_file(path), cli(cmd).out);
}

TEST(Cli, SweepDepthRows) {
  const auto r = cli("sweep-depth --dataset synthetic --model gcn --depths 1,2,3,4,5,6,7,8 --max-epochs 2 --hidden 8");
  ASSERT_EQ(r.status, 0);
  const auto rows = csv(r.out);
  ASSERT_EQ(rows.size(), 9u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"key", "acc_mean", "acc_std", "smv_g"}));
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_EQ(rows[i][0], std::to_string(i));
}

TEST(Cli, SweepTrainSizeRows) {
  const auto r = cli(
      "sweep-trainsize --dataset synthetic --model mlp --sizes 1,5,20 --val-size 300 --test-size 500 "
      "--max-epochs 2 --hidden 8");
  ASSERT_EQ(r.status, 0);
  const auto rows = csv(r.out);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"key", "acc_mean", "acc_std", "smv_g"}));
  EXPECT_EQ(rows[3][0], "20");
}

TEST(Cli, CheckpointLoads) {
  const auto path = scratch("model.ckpt");
  ASSERT_EQ(cli(kQuickTrain + " --model gcn --save-checkpoint " + path.string()).status, 0);
  const auto ck = deepgnn::load_checkpoint(path);
  EXPECT_EQ(ck.info.config.kind, deepgnn::ModelKind::Gcn);
  EXPECT_EQ(ck.info.config.hidden, 16u);
}

TEST(Cli, SynthThenStats) {
  const auto dir = scratch("ds");
  ASSERT_EQ(cli("synth -o " + dir.string() + " --classes 3 --nodes-per-class 30 --feature-dim 40").status, 0);
  const auto b = deepgnn::load_dataset(dir);
  EXPECT_EQ(b.num_nodes(), 90u);
  const auto r = cli("stats --dataset " + dir.string());
  ASSERT_EQ(r.status, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["n"], 90);
  EXPECT_EQ(j["c"], 3);
}

TEST(Cli, EigenReport) {
  const auto r = cli("eigen --graph sbm:10,10,0.4,0.1,3");
  ASSERT_EQ(r.status, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_TRUE(j.is_object());
}
