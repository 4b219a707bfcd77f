#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

const std::string kCli = TPKA_CLI_PATH;
const std::string kSource = TPKA_SOURCE_DIR;

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("tpka_cli_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run(const std::string& args, const std::string& env = {}) {
  const std::string cmd = env + (env.empty() ? "" : " ") + "'" + kCli + "' " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::string smoke() { return "--config '" + kSource + "/configs/smoke.ini'"; }
std::string data(const std::string& name) { return "'" + kSource + "/tests/data/" + name + "'"; }

}  // namespace

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("teleport"), 1);
  EXPECT_EQ(run("analyze --no-such-flag"), 1);
  const auto out = scratch("usage");
  EXPECT_EQ(run("simulate " + smoke() + " --seeds abc --out " + out.string()), 1);
  EXPECT_EQ(run("simulate " + smoke() + " --seeds 5-2 --out " + out.string()), 1);
  EXPECT_EQ(run("analyze --scenario Q --out " + out.string()), 1);
  EXPECT_EQ(run("analyze --config /nonexistent.ini --out " + out.string()), 1);
}

TEST(Cli, InvalidConfigExitsOne) {
  const auto out = scratch("badcfg");
  EXPECT_EQ(run("analyze --config " + data("unknown_key.ini") + " --out " + out.string()), 1);
  EXPECT_FALSE(fs::exists(out / "analysis.csv"));
}

TEST(Cli, AnalyzeIsByteReproducible) {
  const auto a = scratch("analyze_a");
  const auto b = scratch("analyze_b");
  ASSERT_EQ(run("analyze --out " + a.string()), 0);
  ASSERT_EQ(run("analyze --out " + b.string()), 0);
  const auto rows = lines(a / "analysis.csv");
  ASSERT_EQ(rows.size(), 2u + 3u * 2u * 41u);
  EXPECT_EQ(rows[0].rfind("# schema=1 manifest=", 0), 0u);
  EXPECT_EQ(rows[1], "scenario,d,n,t,ratio,p_local");
  EXPECT_EQ(slurp(a / "analysis.csv"), slurp(b / "analysis.csv"));
  EXPECT_TRUE(fs::exists(a / "manifest.json"));
}

TEST(Cli, OutputDirectoryFromEnvironment) {
  const auto out = scratch("env");
  ASSERT_EQ(run("analyze", "TPKA_OUT_DIR='" + out.string() + "'"), 0);
  EXPECT_TRUE(fs::exists(out / "analysis.csv"));
}

TEST(Cli, SimulateSmokeIsDeterministic) {
  const auto a = scratch("sim_a");
  const auto b = scratch("sim_b");
  ASSERT_EQ(run("simulate " + smoke() + " --seeds 1-2 --trace --out " + a.string()), 0);
  ASSERT_EQ(run("simulate " + smoke() + " --seeds 1,2 --threads 2 --trace --out " + b.string()), 0);
  for (const char* f : {"report_1.json", "report_2.json", "trials.csv", "aggregate.csv", "trace_1.ndjson"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  EXPECT_EQ(lines(a / "trials.csv").size(), 4u);
  EXPECT_NE(slurp(a / "report_1.json"), slurp(a / "report_2.json"));
}

TEST(Cli, VerifyPassesAndCatchesACorruptedCoefficient) {
  const auto good = scratch("verify_good");
  EXPECT_EQ(run("verify " + smoke() + " --out " + good.string()), 0);
  EXPECT_EQ(slurp(good / "verify.csv").find(",fail,"), std::string::npos);
  const auto bad = scratch("verify_bad");
  EXPECT_EQ(run("verify --config " + data("bad_coefficient.ini") + " --out " + bad.string()), 2);
  EXPECT_NE(slurp(bad / "verify.csv").find(",fail,"), std::string::npos);
}

TEST(Cli, AttackScripts) {
  const auto out = scratch("attack");
  EXPECT_EQ(run("attack " + smoke() + " --out " + out.string()), 1);  // script missing
  EXPECT_EQ(run("attack " + smoke() + " --attack " + data("attack_unknown_id.json") + " --out " + out.string()), 1);
  EXPECT_FALSE(fs::exists(out / "resilience_7.csv"));

  ASSERT_EQ(run("attack " + smoke() + " --attack " + data("attack_empty.json") + " --out " + out.string()), 0);
  auto rows = lines(out / "resilience_7.csv");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[2], "0,0,0,0,0,0,0,0,0,0");

  ASSERT_EQ(run("attack " + smoke() + " --attack " + data("attack_mixed.json") + " --out " + out.string()), 0);
  rows = lines(out / "resilience_7.csv");
  ASSERT_EQ(rows.size(), 2u + 4u);
  EXPECT_EQ(rows.back().substr(0, 6), "3,2,1,");
  EXPECT_TRUE(fs::exists(out / "attack_report_7.json"));
}

TEST(Cli, EnergyTable) {
  const auto out = scratch("energy");
  ASSERT_EQ(run("energy " + smoke() + " --out " + out.string()), 0);
  const auto text = slurp(out / "energy.csv");
  EXPECT_NE(text.find("sensor,hash,13,"), std::string::npos) << text;
  ASSERT_EQ(run("energy " + smoke() + " --seeds 2 --out " + out.string()), 0);
  EXPECT_NE(slurp(out / "energy.csv").find("sensor,total_energy_uj_per_node,,"), std::string::npos);
}
