#include <gtest/gtest.h>

#include <string>
#include <vector>

#include "stupid/stupid.hpp"
#include "support.hpp"

using namespace stupid;
using testing_support::slurp;
using testing_support::spit;
using testing_support::TempDir;

TEST(StatsCsv, HeaderOnlyForNoRows)
{
  TempDir tmp;
  write_stats(tmp.file("s.csv"), {});
  EXPECT_EQ(slurp(tmp.file("s.csv")), "step,bug_count,min_size,mean_size,max_size,predator_count,total_food\n");
}

TEST(StatsCsv, OneRowTwoLines)
{
  TempDir tmp;
  write_stats(tmp.file("s.csv"), {StatsRow{0, 4000, 1, 1, 1, 0, 0}});
  EXPECT_EQ(slurp(tmp.file("s.csv")),
            "step,bug_count,min_size,mean_size,max_size,predator_count,total_food\n0,4000,1,1,1,0,0\n");
}

TEST(StatsCsv, ShortestRoundTripDecimals)
{
  const StatsRow r{3, 2, 0.1, 1.0 / 3.0, 2.5e-7, 1, 1234.5678};
  EXPECT_EQ(format_stats_row(r), "3,2,0.1,0.3333333333333333,2.5e-07,1,1234.5678");
}

TEST(StatsCsv, WriteParseWriteIsByteIdentical)
{
  TempDir tmp;
  const RunReport rep = run([] {
    ModelConfig c = testing_support::small_config(30, 30, 150, 2, 16);
    c.stop = StopRule::fixed(40);
    return c;
  }());
  write_stats(tmp.file("a.csv"), rep.stats);
  const auto parsed = read_stats(tmp.file("a.csv"));
  EXPECT_EQ(parsed, rep.stats);
  write_stats(tmp.file("b.csv"), parsed);
  EXPECT_EQ(slurp(tmp.file("a.csv")), slurp(tmp.file("b.csv")));
}

TEST(StatsCsv, StreamingWriterMatchesBatch)
{
  TempDir tmp;
  const std::vector<StatsRow> rows{{1, 2, 0.5, 0.75, 1, 0, 3.25}, {2, 1, 1, 1, 1, 0, 0}};
  {
    StatsWriter w(tmp.file("stream.csv"));
    for (const auto& r : rows) w.append(r);
  }
  write_stats(tmp.file("batch.csv"), rows);
  EXPECT_EQ(slurp(tmp.file("stream.csv")), slurp(tmp.file("batch.csv")));
}

TEST(StatsCsv, MalformedRowsRejected)
{
  EXPECT_THROW(parse_stats("nope\n"), ConfigError);
  EXPECT_THROW(parse_stats(std::string(kStatsHeader) + "\n1,2,3\n"), ConfigError);
}

TEST(StatsCsv, UnwritablePath)
{
  EXPECT_THROW(write_stats("/nonexistent-dir/x/stats.csv", {}), IoError);
}

TEST(HistogramCsv, ZeroCountsStillWritten)
{
  TempDir tmp;
  write_histogram(tmp.file("h.csv"), 4, {0, 0, 0});
  EXPECT_EQ(slurp(tmp.file("h.csv")), "step,bin_lo,bin_hi,count\n4,0,1,0\n4,1,2,0\n4,2,3,0\n");
}

TEST(HistogramCsv, AppendsPerStepAndSumsToPopulation)
{
  TempDir tmp;
  const std::string path = tmp.file("h.csv");
  const std::vector<double> sizes{0.2, 0.9, 1.1, 7.0, 250.0};
  write_histogram(path, 1, histogram(sizes, 1.0, 10), 1.0, true);
  write_histogram(path, 2, histogram(sizes, 1.0, 10), 1.0, true);
  const auto rows = parse_histogram(slurp(path));
  ASSERT_EQ(rows.size(), 20u);
  std::uint64_t total = 0;
  for (const auto& r : rows)
    if (r.step == 1) total += r.count;
  EXPECT_EQ(total, sizes.size());
  EXPECT_EQ(rows[0].count, 2u);
  EXPECT_EQ(rows[9].count, 1u);
}

TEST(HistogramCsv, RoundTrip)
{
  TempDir tmp;
  const std::vector<double> sizes{0.5, 1.5, 1.25, 3.0};
  {
    HistogramWriter w(tmp.file("h.csv"), 0.5, 8);
    w.append(0, sizes);
    w.append(1, sizes);
  }
  const auto rows = parse_histogram(slurp(tmp.file("h.csv")));
  std::string again(kHistogramHeader);
  again += '\n';
  for (std::uint64_t s : {0, 1}) {
    std::vector<std::uint64_t> counts;
    for (const auto& r : rows)
      if (r.step == s) counts.push_back(r.count);
    again += histogram_rows(s, counts, 0.5);
  }
  EXPECT_EQ(again, slurp(tmp.file("h.csv")));
}

TEST(Habitat, DimensionsOnly)
{
  const HabitatMap h = parse_habitat("2 2\n");
  EXPECT_EQ(h.width, 2);
  EXPECT_EQ(h.height, 2);
  EXPECT_EQ(h.rates, (std::vector<double>{0, 0, 0, 0}));
}

TEST(Habitat, OneRate)
{
  const HabitatMap h = parse_habitat("# a comment\n2 2\n0 0 0.01  # trailing\n");
  EXPECT_EQ(h.rate(0, 0), 0.01);
  EXPECT_EQ(h.rate(1, 0), 0.0);
  EXPECT_EQ(h.rate(1, 1), 0.0);
  EXPECT_TRUE(h.warnings.empty());
}

TEST(Habitat, DuplicateLastWinsWithWarning)
{
  const HabitatMap h = parse_habitat("2 2\n1 1 0.5\n1 1 0.25\n");
  EXPECT_EQ(h.rate(1, 1), 0.25);
  ASSERT_EQ(h.warnings.size(), 1u);
  EXPECT_NE(h.warnings[0].find("line 3"), std::string::npos);
}

TEST(Habitat, ErrorsCarryLineNumbers)
{
  auto line_of = [](const std::string& src) {
    try {
      parse_habitat(src);
    } catch (const ConfigError& e) {
      return e.line();
    }
    return std::size_t{0};
  };
  EXPECT_EQ(line_of("2 2\n0 0\n"), 2u);
  EXPECT_EQ(line_of("\n\n2 x\n"), 3u);
  EXPECT_EQ(line_of("2 2\n0 0 0.1\n5 0 0.1\n"), 3u);
  EXPECT_EQ(line_of("2 2\n0 0 -1\n"), 2u);
  EXPECT_THROW(parse_habitat("# nothing\n"), ConfigError);
}

TEST(Habitat, DrivesProductionRates)
{
  TempDir tmp;
  spit(tmp.file("hab.txt"), "10 10\n3 4 0.2\n");
  ModelConfig cfg = testing_support::small_config(10, 10, 0, 1, 15);
  const HabitatMap h = read_habitat(tmp.file("hab.txt"));
  FieldWorld w = init_world<FieldLayout>(cfg, &h);
  step(w);
  step(w);
  EXPECT_DOUBLE_EQ(w.cells.food(w.geometry.flat(CellIndex{3, 4})), 0.4);
  EXPECT_EQ(w.cells.food(0), 0.0);
  ModelConfig wrong = testing_support::small_config(12, 10, 0, 1, 15);
  EXPECT_THROW(init_world<FieldLayout>(wrong, &h), ConfigError);
}

TEST(Checkpoint, FreshWorldRoundTrip)
{
  TempDir tmp;
  for (Layout l : {Layout::cell_object, Layout::field}) {
    ModelConfig cfg = testing_support::small_config(20, 20, 60, 3, 16);
    cfg.layout = l;
    const AnyWorld w = make_world(cfg);
    checkpoint(w, tmp.file("c.txt"));
    const AnyWorld r = restore(tmp.file("c.txt"));
    EXPECT_EQ(r.index(), w.index());
    EXPECT_EQ(state_digest(r), state_digest(w));
  }
}

TEST(Checkpoint, ContinuationMatchesUninterruptedRun)
{
  TempDir tmp;
  for (int preset : {11, 16}) {
    ModelConfig cfg = testing_support::small_config(40, 40, 300, 5, preset);
    cfg.stop = StopRule::fixed(500);
    CellWorld full = init_world<CellObjectLayout>(cfg);
    CellWorld half = init_world<CellObjectLayout>(cfg);
    for (int i = 0; i < 500; ++i) step(full);
    for (int i = 0; i < 250; ++i) step(half);
    checkpoint(half, tmp.file("mid.txt"));
    AnyWorld resumed = restore(tmp.file("mid.txt"));
    auto& w = std::get<CellWorld>(resumed);
    EXPECT_EQ(w.step, 250u);
    const RunReport rep = run_world(w);
    EXPECT_EQ(rep.steps, 250u);
    EXPECT_EQ(state_digest(w), state_digest(full)) << "preset " << preset;
  }
}

TEST(Checkpoint, TruncatedImageIsCorrupt)
{
  const CellWorld w = init_world<CellObjectLayout>(testing_support::small_config(20, 20, 60, 3));
  const std::string image = checkpoint_text(w);
  for (std::size_t cut : {std::size_t{0}, image.size() / 3, image.size() / 2, image.size() - 5})
    EXPECT_THROW(restore_text(image.substr(0, cut)), CorruptionError) << cut;
}

TEST(Checkpoint, FlippedByteIsCorrupt)
{
  const CellWorld w = init_world<CellObjectLayout>(testing_support::small_config(20, 20, 60, 3));
  std::string image = checkpoint_text(w);
  image[image.size() / 2] ^= 1;
  EXPECT_THROW(restore_text(image), CorruptionError);
}

TEST(Checkpoint, VersionMismatchRejected)
{
  const CellWorld w = init_world<CellObjectLayout>(testing_support::small_config(20, 20, 60, 3));
  std::string body = checkpoint_text(w);
  body = body.substr(0, body.rfind("end "));
  body.replace(body.find(" 1\n"), 3, " 9\n");
  // Re-seal so only the version differs.
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : body) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  const std::string image = body + "end " + std::to_string(body.size()) + " " + hex + "\n";
  try {
    restore_text(image);
    FAIL() << "version 9 accepted";
  } catch (const CorruptionError& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }
}

TEST(Checkpoint, MissingFileIsIoError)
{
  EXPECT_THROW(restore("/nonexistent/checkpoint.txt"), IoError);
}

TEST(Raster, EmptyWorldIsBlack)
{
  ModelConfig cfg;
  cfg.width = 2;
  cfg.height = 2;
  cfg.initial_bug_count = 0;
  cfg.move_radius = 0;
  const CellWorld w = init_world<CellObjectLayout>(cfg);
  const std::string ppm = raster_ppm(w);
  EXPECT_EQ(ppm, std::string("P6\n2 2\n255\n") + std::string(12, '\0'));
}

TEST(Raster, SaturatedBugIsRed)
{
  ModelConfig cfg;
  cfg.width = 2;
  cfg.height = 2;
  cfg.initial_bug_count = 0;
  cfg.move_radius = 0;
  CellWorld w = init_world<CellObjectLayout>(cfg);
  w.add_bug({0, 0, 100.0});
  w.cells.food(1) = 1.0;
  w.cells.food(2) = 5.0;
  const std::string ppm = raster_ppm(w);
  const std::string px = ppm.substr(11);
  ASSERT_EQ(px.size(), 12u);
  EXPECT_EQ(px.substr(0, 3), std::string("\xff\x00\x00", 3));
  EXPECT_EQ(px.substr(3, 3), std::string("\x00\x80\x00", 3));
  EXPECT_EQ(px.substr(6, 3), std::string("\x00\xff\x00", 3));
}

TEST(Raster, PredatorOverridesAndSizeIsExact)
{
  ModelConfig cfg = preset_config(16);
  CellWorld w = init_world<CellObjectLayout>(cfg);
  const std::string ppm = raster_ppm(w);
  const std::string header = "P6\n200 200\n255\n";
  ASSERT_EQ(ppm.substr(0, header.size()), header);
  EXPECT_EQ(ppm.size(), header.size() + 3u * 200u * 200u);
  w.predators.for_each([&](Handle, const Predator& p) {
    const std::size_t at = header.size() + 3 * p.cell;
    EXPECT_EQ(ppm.substr(at, 3), std::string("\x00\x00\xff", 3));
  });
}

TEST(Raster, Deterministic)
{
  TempDir tmp;
  const FieldWorld w = init_world<FieldLayout>(testing_support::small_config(30, 20, 50, 2));
  write_raster(w, tmp.file("a.ppm"));
  write_raster(w, tmp.file("b.ppm"));
  EXPECT_EQ(slurp(tmp.file("a.ppm")), slurp(tmp.file("b.ppm")));
  EXPECT_EQ(slurp(tmp.file("a.ppm")), raster_ppm(convert_layout<CellObjectLayout>(w)));
}
