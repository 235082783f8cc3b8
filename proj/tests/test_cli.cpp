#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("dgp_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Result run(const std::string& args) {
    const auto o = dir_ / "stdout.txt", e = dir_ / "stderr.txt";
    const std::string cmd = std::string(DGP_CLI_PATH) + " " + args + " >" + o.string() + " 2>" + e.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(o), slurp(e)};
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  static std::vector<std::string> lines(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string l;
    while (std::getline(ss, l))
      if (!l.empty()) out.push_back(l);
    return out;
  }

  // value of "k,<pct>" rows in a hit CSV
  static double hit(const std::string& csv, std::size_t k) {
    for (const auto& l : lines(csv)) {
      const auto comma = l.find(',');
      if (l.substr(0, comma) == std::to_string(k)) return std::stod(l.substr(comma + 1));
    }
    return -1.0;
  }

  fs::path dir_;
};

const char* kSmallTrain = "--hidden 32 --epochs 150";

}  // namespace

TEST_F(Cli, TrainSmokeWritesArtifactsAndManifest) {
  auto r = run("train --synth n=60 --model dgp --epochs 300 --hidden 32 --seed 1 --out " + path("a"));
  ASSERT_EQ(r.code, 0) << r.err;
  for (auto f : {"checkpoint.txt", "loss.csv", "alpha.csv", "manifest.json"})
    EXPECT_TRUE(fs::exists(dir_ / "a" / f)) << f;
  EXPECT_EQ(lines(slurp(dir_ / "a" / "loss.csv")).size(), 301u);
  EXPECT_EQ(lines(slurp(dir_ / "a" / "alpha.csv")).size(), 11u);
  const auto m = nlohmann::json::parse(slurp(dir_ / "a" / "manifest.json"));
  EXPECT_EQ(m["command"], "train");
  EXPECT_EQ(m["seed"], 1);
  EXPECT_EQ(m["config"]["epochs"], 300);
  EXPECT_TRUE(m["inputs"].contains("synth"));
  EXPECT_TRUE(m["metrics"].contains("final_loss"));
  EXPECT_TRUE(m.contains("wall_clock_seconds"));
}

TEST_F(Cli, TrainIsByteDeterministic) {
  const std::string args = std::string("train --synth n=40 --seed 3 ") + kSmallTrain + " --out ";
  ASSERT_EQ(run(args + path("a")).code, 0);
  ASSERT_EQ(run(args + path("b")).code, 0);
  EXPECT_EQ(slurp(dir_ / "a" / "loss.csv"), slurp(dir_ / "b" / "loss.csv"));
  EXPECT_EQ(slurp(dir_ / "a" / "checkpoint.txt"), slurp(dir_ / "b" / "checkpoint.txt"));
}

TEST_F(Cli, DeepGcnBaseline) {
  auto r = run(std::string("train --synth n=40 --model gcn --layers 3 ") + kSmallTrain + " --out " + path("g"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto ck = lines(slurp(dir_ / "g" / "checkpoint.txt"));
  ASSERT_GE(ck.size(), 2u);
  EXPECT_NE(ck[1].find("layers=3"), std::string::npos) << ck[1];
  EXPECT_EQ(ck.size(), 2u + 4u);  // header lines plus four weight matrices
  EXPECT_FALSE(fs::exists(dir_ / "g" / "alpha.csv"));
}

TEST_F(Cli, EvalUnseenAndGeneralized) {
  const std::string data = "--synth n=200,unseen=0.25 --seed 2";
  auto t = run("train " + data + " --hidden 64 --epochs 1000 --out " + path("t"));
  ASSERT_EQ(t.code, 0) << t.err;
  const std::string ck = " --checkpoint " + path("t/checkpoint.txt");
  auto u = run("eval " + data + ck + " --out " + path("u"));
  ASSERT_EQ(u.code, 0) << u.err;
  EXPECT_EQ(lines(u.out).size(), 6u);  // header + k=1,2,5,10,20
  EXPECT_EQ(u.out, slurp(dir_ / "u" / "hits.csv"));
  const double unseen_hit1 = hit(u.out, 1);
  EXPECT_GT(unseen_hit1, 10.0 * 100.0 / 50.0);  // 50 unseen classes
  auto g = run("eval " + data + ck + " --generalized --k 1");
  ASSERT_EQ(g.code, 0) << g.err;
  EXPECT_EQ(lines(g.out).size(), 2u);
  EXPECT_LE(hit(g.out, 1), unseen_hit1);
}

TEST_F(Cli, FileInputsRoundTrip) {
  ASSERT_EQ(run("synth --synth n=50 --seed 4 --out " + path("d")).code, 0);
  for (auto f : {"edges.tsv", "embeddings.txt", "weights.txt", "unseen_features.txt", "unseen_labels.txt",
                 "manifest.json"})
    EXPECT_TRUE(fs::exists(dir_ / "d" / f)) << f;
  const std::string files = " --edges " + path("d/edges.tsv") + " --embeddings " + path("d/embeddings.txt") +
                            " --weights " + path("d/weights.txt");
  auto t = run(std::string("train") + files + " " + kSmallTrain + " --out " + path("t"));
  ASSERT_EQ(t.code, 0) << t.err;
  auto e = run("eval" + files + " --checkpoint " + path("t/checkpoint.txt") + " --features " +
               path("d/unseen_features.txt") + " --labels " + path("d/unseen_labels.txt") + " --k 1,2");
  ASSERT_EQ(e.code, 0) << e.err;
  EXPECT_EQ(lines(e.out).size(), 3u);
}

TEST_F(Cli, AblateCountsAndSummaryColumns) {
  auto r = run(std::string("ablate --synth n=40 --seeds 3 --variants sgcn,dgp-w,dgp ") + kSmallTrain +
               " --k 1,2 --out " + path("ab"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines(slurp(dir_ / "ab" / "ablate_runs.csv")).size(), 1u + 9u);
  const auto summary = lines(slurp(dir_ / "ab" / "ablate_summary.csv"));
  ASSERT_EQ(summary.size(), 4u);
  EXPECT_EQ(summary[0], "variant,runs,hit1_mean,hit1_std,hit2_mean,hit2_std");
  EXPECT_EQ(summary[1].rfind("sgcn,3,", 0), 0u);
}

TEST_F(Cli, AblateTwoPhaseRowsDiffer) {
  auto r = run(std::string("ablate --synth n=40 --seeds 1 --variants dgp,dgp-1phase ") + kSmallTrain +
               " --k 1,5 --out " + path("ab"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto runs = lines(slurp(dir_ / "ab" / "ablate_runs.csv"));
  ASSERT_EQ(runs.size(), 3u);
  EXPECT_NE(runs[1].substr(runs[1].find(',')), runs[2].substr(runs[2].find(',')));
}

TEST_F(Cli, DiagnoseDefaults) {
  auto r = run("diagnose --out " + path("diag"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = nlohmann::json::parse(slurp(dir_ / "diag" / "manifest.json"));
  for (const auto& [kind, v] : m["metrics"]["gradient_check"].items()) {
    EXPECT_LT(v["max_rel_error"].get<double>(), 1e-4) << kind;
  }
  EXPECT_LT(m["metrics"]["final_dispersion"].get<double>(), 1e-6);
}

TEST_F(Cli, DiagnoseSmoothingCurves) {
  auto r = run("diagnose --instances 1 --smooth \"n=30 steps=200\" --out " + path("s"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto curve = lines(slurp(dir_ / "s" / "smoothing.csv"));
  ASSERT_EQ(curve.size(), 202u);
  EXPECT_LT(std::stod(curve.back().substr(curve.back().find(',') + 1)), 1e-6);

  auto id = run("diagnose --instances 1 --smooth \"graph=identity steps=5\" --out " + path("i"));
  ASSERT_EQ(id.code, 0) << id.err;
  const auto flat = lines(slurp(dir_ / "i" / "smoothing.csv"));
  ASSERT_EQ(flat.size(), 7u);
  for (std::size_t i = 2; i < flat.size(); ++i)
    EXPECT_EQ(flat[i].substr(flat[i].find(',')), flat[1].substr(flat[1].find(',')));
}

TEST_F(Cli, GraphStats) {
  auto one = run("graph-stats --synth n=1");
  ASSERT_EQ(one.code, 0) << one.err;
  EXPECT_NE(one.out.find("hierarchy_density 1\n"), std::string::npos) << one.out;
  EXPECT_NE(one.out.find("dense_density 1\n"), std::string::npos);

  std::ofstream(path("chain.tsv")) << "c0\tc1\nc1\tc2\nc2\tc3\nc3\tc4\nc4\tc5\n";
  auto chain = run("graph-stats --edges " + path("chain.tsv") + " --out " + path("gs"));
  ASSERT_EQ(chain.code, 0) << chain.err;
  const auto s = nlohmann::json::parse(slurp(dir_ / "gs" / "graph_stats.json"));
  EXPECT_EQ(s["hierarchy_nnz"], 16);
  EXPECT_EQ(s["dense_nnz"], 36);
  EXPECT_DOUBLE_EQ(s["hierarchy_density"].get<double>(), 16.0 / 36.0);
  EXPECT_DOUBLE_EQ(s["dense_density"].get<double>(), 1.0);
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run("train --edges /nonexistent.tsv --embeddings x --weights y --out " + path("x")).code, 1);
  EXPECT_EQ(run("train --synth n=40 --K 0 --out " + path("x")).code, 1);
  EXPECT_EQ(run("train --synth bogus=1 --out " + path("x")).code, 1);
  EXPECT_EQ(run("train --synth n=40 --model mlp --out " + path("x")).code, 1);
  EXPECT_EQ(run("nosuchcommand").code, 1);
  EXPECT_EQ(run("--help").code, 0);
  std::ofstream(path("cyc.tsv")) << "a\tb\nb\ta\n";
  auto cyc = run("graph-stats --edges " + path("cyc.tsv"));
  EXPECT_EQ(cyc.code, 1);
  EXPECT_NE(cyc.err.find("cycle"), std::string::npos);
  auto diverge = run("train --synth n=40 --hidden 8 --epochs 5 --lr 1e308 --out " + path("x"));
  EXPECT_EQ(diverge.code, 2) << diverge.err;
  EXPECT_NE(diverge.err.find("epoch"), std::string::npos);
}
