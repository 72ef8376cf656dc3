#include <gtest/gtest.h>

#include <map>
#include <set>
#include <sstream>

#include "flock/cli.hpp"
#include "flock/io.hpp"
#include "test_support.hpp"

namespace flock {
namespace {

using testing::TempDir;
using testing::slurp;
using testing::write_text;

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "flock-sim");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

constexpr const char* kSmallConfig = R"({
  "schema": "flock-sim/config/1", "population": 40, "rounds": 12, "seeds": 2, "oracle_test_size": 128,
  "task": {"dim": 4, "n_train": 32, "n_test": 32}
})";

std::vector<io::SweepRow> read_rows(const std::filesystem::path& p) {
  std::istringstream in(slurp(p));
  return io::read_sweep_csv(in);
}

TEST(CliRun, WritesAllOutputs) {
  TempDir dir;
  write_text(dir / "c.json", kSmallConfig);
  const auto r = run({"run", "--config", (dir / "c.json").string(), "--out", (dir / "out").string(), "--quiet"});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"rounds.jsonl", "ledger_events.jsonl", "estimates.csv", "summary.txt"}) {
    EXPECT_TRUE(std::filesystem::exists(dir.path() / "out" / f)) << f;
  }
  EXPECT_EQ(read_rows(dir.path() / "out" / "estimates.csv").size(), 4u);
  EXPECT_TRUE(r.out.empty());
}

TEST(CliRun, MalformedSeedIsRejected) {
  TempDir dir;
  const auto r = run({"run", "--out", (dir / "o").string(), "--seed", "abc"});
  EXPECT_EQ(r.code, cli::kConfigError);
}

TEST(CliRun, ThresholdAboveCommitteeNamesT) {
  TempDir dir;
  write_text(dir / "c.json", R"({"protocol": {"T": 25}})");
  const auto r = run({"run", "--config", (dir / "c.json").string(), "--out", (dir / "out").string()});
  EXPECT_EQ(r.code, cli::kConfigError);
  EXPECT_NE(r.err.find("T"), std::string::npos);
  EXPECT_NE(r.err.find("protocol.T"), std::string::npos);
}

TEST(CliRun, RerunIsByteIdentical) {
  TempDir dir;
  write_text(dir / "c.json", kSmallConfig);
  const std::string cfg = (dir / "c.json").string();
  ASSERT_EQ(run({"run", "--config", cfg, "--out", (dir / "a").string(), "--quiet"}).code, 0);
  ASSERT_EQ(run({"run", "--config", cfg, "--out", (dir / "b").string(), "--quiet"}).code, 0);
  ASSERT_EQ(run({"run", "--config", cfg, "--out", (dir / "c").string(), "--quiet", "--seed", "7"}).code, 0);
  const auto a = slurp(dir.path() / "a" / "rounds.jsonl");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(dir.path() / "b" / "rounds.jsonl"));
  EXPECT_EQ(slurp(dir.path() / "a" / "ledger_events.jsonl"), slurp(dir.path() / "b" / "ledger_events.jsonl"));
  EXPECT_NE(a, slurp(dir.path() / "c" / "rounds.jsonl"));
}

TEST(CliRun, IoErrors) {
  TempDir dir;
  EXPECT_EQ(run({"run", "--config", (dir / "missing.json").string(), "--out", dir.path().string()}).code,
            cli::kIoError);
  write_text(dir / "c.json", kSmallConfig);
  write_text(dir / "file", "x");
  const auto r = run({"run", "--config", (dir / "c.json").string(), "--out", (dir / "file" / "sub").string()});
  EXPECT_EQ(r.code, cli::kIoError);
  EXPECT_NE(r.err.find("file"), std::string::npos);
}

TEST(CliRun, AbortWhenNoRoundCompletes) {
  TempDir dir;
  write_text(dir / "c.json", R"({"population": 40, "rounds": 3, "seeds": 1, "initial_stake": 50,
                                 "task": {"dim": 2, "n_train": 8, "n_test": 8}})");
  const auto r = run({"run", "--config", (dir / "c.json").string(), "--out", (dir / "o").string(), "--quiet"});
  EXPECT_EQ(r.code, cli::kSimulationAbort);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "o" / "rounds.jsonl"));
}

TEST(CliSweep, RowCounts) {
  TempDir dir;
  write_text(dir / "c.json", kSmallConfig);
  write_text(dir / "one.json", R"({"alpha": [0.05]})");
  write_text(dir / "three.json", R"({"schema": "flock-sim/grid/1", "l_p": [0.0, 0.1, 0.2]})");
  const std::string cfg = (dir / "c.json").string();
  ASSERT_EQ(run({"sweep", "--config", cfg, "--grid", (dir / "one.json").string(), "--out", (dir / "1").string(),
                 "--quiet"})
                .code,
            0);
  EXPECT_EQ(read_rows(dir.path() / "1" / "sweep.csv").size(), 4u);
  ASSERT_EQ(run({"sweep", "--config", cfg, "--grid", (dir / "three.json").string(), "--out", (dir / "3").string(),
                 "--quiet"})
                .code,
            0);
  const auto rows = read_rows(dir.path() / "3" / "sweep.csv");
  ASSERT_EQ(rows.size(), 12u);
  EXPECT_EQ(rows[0].l_p, 0.0);
  EXPECT_EQ(rows[4].l_p, 0.1);
  EXPECT_EQ(rows[8].l_p, 0.2);
}

TEST(CliSweep, EmptyGridFails) {
  TempDir dir;
  write_text(dir / "c.json", kSmallConfig);
  write_text(dir / "g.json", "{}");
  const auto r = run({"sweep", "--config", (dir / "c.json").string(), "--grid", (dir / "g.json").string(), "--out",
                      dir.path().string()});
  EXPECT_NE(r.code, 0);
  EXPECT_FALSE(std::filesystem::exists(dir.path() / "sweep.csv"));
  EXPECT_NE(run({"sweep", "--config", (dir / "c.json").string(), "--out", dir.path().string()}).code, 0);
}

TEST(CliSweep, InvalidPointIsConfigError) {
  TempDir dir;
  write_text(dir / "c.json", kSmallConfig);
  write_text(dir / "g.json", R"({"T": [11, 40]})");
  const auto r = run({"sweep", "--config", (dir / "c.json").string(), "--grid", (dir / "g.json").string(), "--out",
                      dir.path().string(), "--quiet"});
  EXPECT_EQ(r.code, cli::kConfigError);
  EXPECT_NE(r.err.find("protocol.T"), std::string::npos);
}

TEST(CliFigure2, FiveLpValuesPerCurve) {
  TempDir dir;
  write_text(dir / "c.json", kSmallConfig);
  const auto r = run({"figure2", "--config", (dir / "c.json").string(), "--out", dir.path().string(), "--quiet",
                      "--l-v", "0", "--l-v", "0.3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = read_rows(dir.path() / "figure2.csv");
  ASSERT_EQ(rows.size(), 40u);
  std::map<double, std::set<double>> lp_by_lv;
  for (const auto& row : rows) lp_by_lv[row.l_v].insert(row.l_p);
  ASSERT_EQ(lp_by_lv.size(), 2u);
  for (const auto& [lv, lps] : lp_by_lv) EXPECT_EQ(lps, (std::set<double>{0.0, 0.1, 0.2, 0.3, 0.4}));
  // At l_p = 0 the malicious proposer class is empty.
  const auto& first = rows[1];
  EXPECT_EQ(first.l_p, 0.0);
  EXPECT_EQ(first.role, Role::kProposer);
  EXPECT_EQ(first.honesty, Honesty::kMalicious);
  EXPECT_FALSE(first.mean_return);
  EXPECT_EQ(first.samples, 0u);
}

TEST(Cli, UsageErrors) {
  EXPECT_NE(run({}).code, 0);
  EXPECT_NE(run({"bogus"}).code, 0);
  EXPECT_EQ(run({"run", "--help"}).code, 0);
}

}  // namespace
}  // namespace flock
