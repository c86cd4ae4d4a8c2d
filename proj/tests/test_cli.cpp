#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "fixtures.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
};

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("swa_cli_test_" + std::to_string(::getpid())) / name;
  fs::create_directories(p.parent_path());
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome cli(const std::string& args) {
  const auto out = scratch("stdout.txt");
  const std::string cmd = std::string(SWA_CLI) + " " + args + " > " + out.string() + " 2>&1";
  const int st = std::system(cmd.c_str());
  return {WIFEXITED(st) ? WEXITSTATUS(st) : -1, slurp(out)};
}

const std::string kFig4 = fixture::source_path("configs/fig4.cfg");

}  // namespace

TEST(Cli, ValidatePublishedSchedule) {
  const auto r = cli("validate --solution " + kFig4);
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("0 violation(s)"), std::string::npos);
}

TEST(Cli, AnalyzeJitterColumns) {
  const auto r = cli("analyze-jitter --config " + kFig4);
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("TTS-3,2,2,47232,1,59392,47232,reproduced"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("TTS-3,2,3,77952,2,100352,77952,reproduced"), std::string::npos);
  EXPECT_NE(r.out.find("TTS-3,2,1,321664,3,364544,442496,unreproduced"), std::string::npos);
}

TEST(Cli, AnalyzeSinglePort) {
  const auto r = cli("analyze-jitter --config " + kFig4 + " --port TTS-1:7");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("TTS-1,7,1,"), std::string::npos);
}

TEST(Cli, ScheduleValidateRunRoundTrip) {
  const auto sol = scratch("solution.cfg");
  auto r = cli("schedule --config " + kFig4 + " --out " + sol.string());
  ASSERT_EQ(r.code, 0) << r.out;
  r = cli("validate --solution " + sol.string());
  EXPECT_EQ(r.code, 0) << r.out;
  const auto dir = scratch("roundtrip");
  r = cli("run --config " + sol.string() + " --preset two --periods 4 --rate-step 50 --out " + dir.string());
  EXPECT_EQ(r.code, 0) << r.out;
  for (const char* f : {"prett.csv", "swa.csv", "summary.csv", "drops.csv"}) EXPECT_TRUE(fs::exists(dir / f)) << f;
}

TEST(Cli, MutatedSolutionFails) {
  auto text = slurp(kFig4);
  const std::string from = "arrival-end=46456 offset=67584";
  text.replace(text.find(from), from.size(), "arrival-end=46456 offset=46000");
  const auto bad = scratch("mutated.cfg");
  std::ofstream(bad) << text;
  const auto r = cli("validate --solution " + bad.string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("precedence"), std::string::npos) << r.out;
}

TEST(Cli, ConfigErrorsExitTwo) {
  const auto bad = scratch("broken.cfg");
  std::ofstream(bad) << "[topology]\nvertex name=A kind=hub ports=1\n";
  auto r = cli("validate --solution " + bad.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("broken.cfg:2"), std::string::npos) << r.out;
  EXPECT_EQ(cli("run --config /nonexistent.cfg").code, 2);
  EXPECT_EQ(cli("run --config " + kFig4 + " --preset seven").code, 2);
  EXPECT_EQ(cli("frobnicate").code, 2);
}

TEST(Cli, OutDirFromEnvironment) {
  const auto dir = scratch("envout");
  fs::remove_all(dir);
  const auto blocker = scratch("plain_file");
  std::ofstream(blocker) << "x";
  const std::string unusable = (blocker / "x").string();
  const auto r = cli("run --config " + kFig4 + " --preset one --periods 3 --rate-min 20 --rate-max 20 --out " + unusable);
  EXPECT_NE(r.code, 0);
  ::setenv("SWA_OUT_DIR", dir.string().c_str(), 1);
  const auto r2 = cli("run --config " + kFig4 + " --preset one --periods 3 --rate-min 20 --rate-max 20 --out " + unusable);
  ::unsetenv("SWA_OUT_DIR");
  EXPECT_EQ(r2.code, 0) << r2.out;
  EXPECT_TRUE(fs::exists(dir / "swa.csv"));
}

// Pinned config and seed; regenerate with tools/regen_golden.sh after an
// intentional model change.
TEST(Cli, GoldenCsv) {
  const auto dir = scratch("golden");
  const auto r = cli("run --config " + kFig4 + " --preset two --seed 7 --periods 6 --rate-step 25 --out " + dir.string());
  ASSERT_EQ(r.code, 0) << r.out;
  for (const char* f : {"prett.csv", "swa.csv", "summary.csv", "drops.csv"})
    EXPECT_EQ(slurp(dir / f), slurp(fixture::source_path(std::string("tests/golden/") + f))) << f;
}

TEST(Cli, ByteIdenticalAcrossRuns) {
  const auto a = scratch("rep_a"), b = scratch("rep_b");
  const std::string args = "run --config " + kFig4 + " --preset three --periods 5 --rate-step 20 --out ";
  ASSERT_EQ(cli(args + a.string()).code, 0);
  ASSERT_EQ(cli(args + b.string() + " --serial").code, 0);
  for (const char* f : {"prett.csv", "swa.csv", "summary.csv", "drops.csv"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}
