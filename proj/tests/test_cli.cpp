#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "stupid/stupid.hpp"
#include "support.hpp"

using namespace stupid;
using testing_support::slurp;
using testing_support::spit;
using testing_support::TempDir;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result cli(const std::string& args, const std::string& env = "")
{
  const std::string cmd = env + (env.empty() ? "" : " ") + STUPIDMODEL_EXE + " " + args + " 2>/dev/null";
  Result r;
  FILE* p = ::popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

Result cli_stderr(const std::string& args)
{
  const std::string cmd = std::string(STUPIDMODEL_EXE) + " " + args + " 2>&1 >/dev/null";
  Result r;
  FILE* p = ::popen(cmd.c_str(), "r");
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::vector<std::string> lines(const std::string& s)
{
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> fields(const std::string& line)
{
  std::vector<std::string> out;
  std::istringstream in(line);
  for (std::string f; std::getline(in, f, ',');) out.push_back(f);
  return out;
}

} // namespace

TEST(ConfigText, LineNumbersInErrors)
{
  try {
    parse_config("# header\nwidth = 10\n\nheight = ten\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 4u);
  }
  try {
    parse_config("width = 10\nbogus_key = 1\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  try {
    parse_config("width 10\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
}

TEST(ConfigText, PresetAppliesBeforeExplicitKeys)
{
  const ModelConfig c = parse_config("scheduler = fixed\npreset = v16\nwidth = 50\nheight = 50\n");
  EXPECT_EQ(c.preset, "v16");
  EXPECT_EQ(c.scheduler, Scheduler::fixed);
  EXPECT_TRUE(c.features.predators);
  EXPECT_EQ(c.width, 50);
}

TEST(ConfigText, EffectiveConfigRoundTrips)
{
  for (int v = 1; v <= kPresetCount; ++v) {
    ModelConfig c = preset_config(v);
    c.seed = 987654321987ULL;
    c.max_food_production = 0.1 + 0.2;
    c.habitat_file = "some/where.txt";
    EXPECT_EQ(parse_config(config_to_text(c)), c) << "v" << v;
  }
}

TEST(ConfigText, Validation)
{
  ModelConfig c;
  c.initial_bug_count = 200 * 200 + 1;
  EXPECT_THROW(validate(c), ConfigError);
  c = ModelConfig{};
  c.survival_probability = 1.5;
  EXPECT_THROW(validate(c), ConfigError);
  c = ModelConfig{};
  c.width = 8;
  EXPECT_THROW(validate(c), ConfigError);
  EXPECT_THROW(parse_config("stop = forever\n"), ConfigError);
  EXPECT_EQ(parse_config("stop = max_size:50\n").stop, StopRule::max_size(50));
}

TEST(Cli, RunV10WritesFiveHundredConservedRows)
{
  TempDir tmp;
  const Result r = cli("run --preset v10 --steps 500 --seed 1 --out " + tmp.path().string());
  ASSERT_EQ(r.code, 0) << r.out;
  const auto rows = lines(slurp(tmp.file("stats.csv")));
  ASSERT_EQ(rows.size(), 501u);
  EXPECT_EQ(rows[0], kStatsHeader);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto f = fields(rows[i]);
    ASSERT_EQ(f.size(), 7u);
    EXPECT_EQ(f[0], std::to_string(i));
    EXPECT_EQ(f[1], "4000");
  }
  EXPECT_NE(r.out.find("steps 500"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(tmp.file("config.effective.txt")));
  EXPECT_EQ(parse_config(slurp(tmp.file("config.effective.txt"))).preset, "v10");
}

TEST(Cli, ZeroStepsLeavesHeaderOnly)
{
  TempDir tmp;
  const Result r = cli("run --preset v10 --steps 0 --out " + tmp.path().string());
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(slurp(tmp.file("stats.csv")), std::string(kStatsHeader) + "\n");
}

TEST(Cli, PredatorPresetRunsToCompletion)
{
  TempDir tmp;
  const Result r = cli("run --preset v16 --seed 4 --out " + tmp.path().string());
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("steps 1000"), std::string::npos);
  EXPECT_EQ(lines(slurp(tmp.file("stats.csv"))).size(), 1001u);
}

TEST(Cli, IdenticalInvocationsGiveIdenticalFiles)
{
  TempDir a, b;
  const std::string args = "run --preset v14 --steps 60 --seed 11 --raster-every 30 --out ";
  ASSERT_EQ(cli(args + a.path().string()).code, 0);
  ASSERT_EQ(cli(args + b.path().string()).code, 0);
  for (const char* f : {"stats.csv", "histogram.csv", "config.effective.txt", "frame_000000.ppm", "frame_000030.ppm",
                        "frame_000060.ppm"})
    EXPECT_EQ(slurp(a.file(f)), slurp(b.file(f))) << f;
}

TEST(Cli, SeedPrecedence)
{
  TempDir tmp;
  spit(tmp.file("c.txt"), "preset = v12\nseed = 5\n");
  auto seed_of = [&](const std::string& args, const std::string& env) {
    const Result r = cli("inspect --config " + tmp.file("c.txt") + " " + args, env);
    const auto at = r.out.find("seed = ");
    return r.out.substr(at + 7, r.out.find('\n', at) - at - 7);
  };
  EXPECT_EQ(seed_of("", ""), "5");
  EXPECT_EQ(seed_of("", "STUPIDMODEL_SEED=77"), "77");
  EXPECT_EQ(seed_of("--seed 9", "STUPIDMODEL_SEED=77"), "9");
  EXPECT_EQ(cli("inspect", "STUPIDMODEL_SEED=abc").code, 1);
}

TEST(Cli, PresetFlagKeepsFileKeys)
{
  TempDir tmp;
  spit(tmp.file("c.txt"), "preset = v3\nscheduler = sorted_desc_size\nwidth = 60\n");
  const Result r = cli("inspect --preset v12 --config " + tmp.file("c.txt"));
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("preset = v12"), std::string::npos);
  EXPECT_NE(r.out.find("scheduler = sorted_desc_size"), std::string::npos);
  EXPECT_NE(r.out.find("width = 60"), std::string::npos);
}

TEST(Cli, BenchSingleWorkerHasUnitSpeedup)
{
  TempDir tmp;
  const Result r = cli("bench --preset v11 --steps 20 --workers 1 --variant ghost --reps 3 --out " + tmp.path().string());
  ASSERT_EQ(r.code, 0);
  const auto rows = lines(slurp(tmp.file("bench.csv")));
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], "variant,workers,repetition,seconds,speedup,ghost_cells_per_step");
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_EQ(fields(rows[i])[4], "1");
}

TEST(Cli, BenchGhostColumnMatchesStripeArithmetic)
{
  TempDir tmp;
  const Result r = cli("bench --preset v11 --steps 5 --workers 1,2,4 --variant ghost --reps 1 --out " + tmp.path().string());
  ASSERT_EQ(r.code, 0);
  const auto rows = lines(slurp(tmp.file("bench.csv")));
  ASSERT_EQ(rows.size(), 4u);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto f = fields(rows[i]);
    const int n = std::stoi(f[1]);
    EXPECT_EQ(std::stoull(f[5]), n == 1 ? 0ull : 2ull * 200 * 4 * static_cast<unsigned long long>(n)) << rows[i];
  }
  EXPECT_EQ(lines(slurp(tmp.file("bench_summary.csv"))).size(), 4u);
}

TEST(Cli, BenchFieldVariantShape)
{
  TempDir tmp;
  const Result r = cli("bench --preset v11 --steps 5 --workers 1,2,4,8 --variant field --reps 2 --out " + tmp.path().string());
  ASSERT_EQ(r.code, 0);
  const auto rows = lines(slurp(tmp.file("bench.csv")));
  ASSERT_EQ(rows.size(), 9u);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto f = fields(rows[i]);
    EXPECT_EQ(f[0], "field");
    EXPECT_EQ(f[5], "0");
    EXPECT_GT(std::stod(f[3]), 0.0);
  }
}

TEST(Cli, BenchLayoutCompare)
{
  const Result r = cli("bench --preset v11 --steps 10 --reps 2 --layout-compare --out /tmp");
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("same_digest yes"), std::string::npos);
}

TEST(Cli, SnapshotSize)
{
  TempDir tmp;
  ASSERT_EQ(cli("snapshot --preset v10 --out " + tmp.file("s.ppm")).code, 0);
  EXPECT_EQ(slurp(tmp.file("s.ppm")).size(), 15u + 120000u);
}

TEST(Cli, SnapshotFromCheckpointShowsBugs)
{
  TempDir tmp;
  ASSERT_EQ(cli("run --preset v11 --steps 20 --checkpoint-at 20 --out " + tmp.path().string()).code, 0);
  ASSERT_EQ(cli("snapshot --checkpoint " + tmp.file("checkpoint_000020.txt") + " --out " + tmp.file("s.ppm")).code, 0);
  const std::string ppm = slurp(tmp.file("s.ppm"));
  const AnyWorld w = restore(tmp.file("checkpoint_000020.txt"));
  const auto& cw = std::get<CellWorld>(w);
  std::size_t red = 0;
  cw.bugs.for_each([&](Handle, const Bug& b) {
    if (static_cast<unsigned char>(ppm[15 + 3 * b.cell]) > 0) ++red;
  });
  EXPECT_EQ(red, cw.bugs.size());
}

TEST(Cli, CorruptCheckpointExitsTwo)
{
  TempDir tmp;
  spit(tmp.file("bad.txt"), "stupid-checkpoint 1\nnothing else\n");
  EXPECT_EQ(cli("snapshot --checkpoint " + tmp.file("bad.txt") + " --out " + tmp.file("x.ppm")).code, 2);
  EXPECT_EQ(cli("run --restore " + tmp.file("bad.txt") + " --out " + tmp.path().string()).code, 2);
}

TEST(Cli, RestoreContinuesRun)
{
  TempDir a, b;
  ASSERT_EQ(cli("run --preset v14 --seed 3 --steps 250 --checkpoint-at 250 --out " + a.path().string()).code, 0);
  ASSERT_EQ(cli("run --restore " + a.file("checkpoint_000250.txt") + " --steps 500 --checkpoint-at 500 --out " +
                a.path().string()).code,
            0);
  ASSERT_EQ(cli("run --preset v14 --seed 3 --steps 500 --checkpoint-at 500 --out " + b.path().string()).code, 0);
  EXPECT_EQ(state_digest(restore(a.file("checkpoint_000500.txt"))),
            state_digest(restore(b.file("checkpoint_000500.txt"))));
}

TEST(Cli, InspectDefaults)
{
  const Result r = cli("inspect");
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("move_radius = 4"), std::string::npos);
  EXPECT_NE(r.out.find("width = 200"), std::string::npos);
  EXPECT_NE(r.out.find("height = 200"), std::string::npos);
  EXPECT_NE(r.out.find("v16"), std::string::npos);
}

TEST(Cli, InspectThreeWorkerStripes)
{
  const Result r = cli("inspect --workers 3");
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("0 0-66 67 1600"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("1 67-133 67 1600"), std::string::npos);
  EXPECT_NE(r.out.find("2 134-199 66 1600"), std::string::npos);
}

TEST(Cli, MalformedConfigExitsOneWithLine)
{
  TempDir tmp;
  spit(tmp.file("c.txt"), "width = 100\nheight = 1x0\n");
  const Result r = cli_stderr("inspect --config " + tmp.file("c.txt"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("line 2"), std::string::npos) << r.out;
}

TEST(Cli, ExitCodes)
{
  EXPECT_EQ(cli("run --workers 51 --steps 1 --out /tmp").code, 1);
  EXPECT_EQ(cli("run --preset v99").code, 1);
  EXPECT_EQ(cli("frobnicate").code, 1);
  EXPECT_EQ(cli("run --workers 2 --checkpoint-at 3 --steps 5 --out /tmp").code, 1);
  EXPECT_EQ(cli("run --config /nonexistent/c.txt").code, 2);
}

TEST(Cli, PartitionedRunMatchesSequentialPopulation)
{
  TempDir a, b;
  ASSERT_EQ(cli("run --preset v10 --steps 50 --seed 2 --out " + a.path().string()).code, 0);
  ASSERT_EQ(cli("run --preset v10 --steps 50 --seed 2 --workers 4 --variant ghost --threads --out " + b.path().string()).code, 0);
  const auto rows = lines(slurp(b.file("stats.csv")));
  ASSERT_EQ(rows.size(), 51u);
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_EQ(fields(rows[i])[1], "4000");
}
