// Batch driver: run, bench, snapshot, inspect.
//
// Exit codes: 0 success, 1 configuration error, 2 runtime, protocol or I/O
// error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "stupid/stupid.hpp"

namespace fs = std::filesystem;
using namespace stupid;

namespace {

struct Options {
  std::string config_file;
  std::string preset;
  std::optional<std::uint64_t> steps;
  std::optional<std::uint64_t> seed;
  std::vector<int> workers;
  std::string variant;
  std::string layout;
  std::string habitat;
  int reps = 5;
  std::string out;
  std::uint64_t raster_every = 0;
  std::optional<std::uint64_t> checkpoint_at;
  std::string restore_from;
  std::string checkpoint_in;
  bool layout_compare = false;
  bool threaded = false;
};

std::string zero_pad(std::uint64_t v, int width)
{
  std::string s = std::to_string(v);
  if (static_cast<int>(s.size()) < width) s.insert(0, static_cast<std::size_t>(width) - s.size(), '0');
  return s;
}

std::optional<std::uint64_t> env_seed()
{
  const char* v = std::getenv("STUPIDMODEL_SEED");
  if (!v || !*v) return std::nullopt;
  auto s = text::parse_int<std::uint64_t>(v);
  if (!s) throw ConfigError(std::string("STUPIDMODEL_SEED is not a decimal 64-bit value: '") + v + "'");
  return s;
}

Layout parse_layout(const std::string& v)
{
  if (v == "cell" || v == "cell_object") return Layout::cell_object;
  if (v == "field") return Layout::field;
  throw ConfigError("--layout must be cell or field, got '" + v + "'");
}

Variant parse_variant(const std::string& v)
{
  if (v == "ghost") return Variant::ghost_exchange;
  if (v == "field") return Variant::field_halo;
  throw ConfigError("--variant must be ghost or field, got '" + v + "'");
}

/// Defaults, then the config file, then the environment seed, then flags. A
/// --preset flag replaces the file's preset but not its explicit keys.
ModelConfig resolve_config(const Options& o)
{
  std::string source;
  if (!o.config_file.empty()) {
    std::ifstream in(o.config_file, std::ios::binary);
    if (!in) throw IoError(o.config_file, "cannot open config file");
    std::ostringstream ss;
    ss << in.rdbuf();
    source = ss.str();
  }
  if (!o.preset.empty()) source += "\npreset = " + o.preset + "\n";
  ModelConfig cfg;
  try {
    cfg = parse_config(source);
  } catch (const ConfigError& e) {
    if (o.config_file.empty()) throw;
    throw ConfigError(o.config_file + ": " + e.what(), e.line());
  }
  if (auto s = env_seed()) cfg.seed = *s;
  if (o.seed) cfg.seed = *o.seed;
  if (o.steps) cfg.stop = StopRule::fixed(*o.steps);
  if (!o.layout.empty()) cfg.layout = parse_layout(o.layout);
  if (!o.habitat.empty()) cfg.habitat_file = o.habitat;
  validate(cfg);
  return cfg;
}

std::optional<HabitatMap> load_habitat(const ModelConfig& cfg)
{
  if (cfg.habitat_file.empty()) return std::nullopt;
  HabitatMap h = read_habitat(cfg.habitat_file);
  for (const auto& w : h.warnings) std::cerr << "warning: " << cfg.habitat_file << ": " << w << '\n';
  return h;
}

fs::path prepare_out(const std::string& out)
{
  fs::path dir = out.empty() ? fs::path(".") : fs::path(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir.string(), "cannot create output directory: " + ec.message());
  return dir;
}

void print_report(const RunReport& r, std::uint64_t final_bugs, std::uint64_t final_step)
{
  std::printf("steps %llu\n", static_cast<unsigned long long>(r.steps));
  std::printf("final_step %llu\n", static_cast<unsigned long long>(final_step));
  std::printf("stop_reason %s\n", to_string(r.stop_reason));
  std::printf("final_bug_count %llu\n", static_cast<unsigned long long>(final_bugs));
  std::printf("wall_seconds %.6f\n", r.wall_seconds);
  if (r.cpu_seconds >= 0) std::printf("cpu_seconds %.6f\n", r.cpu_seconds);
  else std::printf("cpu_seconds unavailable\n");
  const Diagnostics& d = r.diag;
  std::printf("retry_cap_hits %llu\n", static_cast<unsigned long long>(d.retry_cap_hits));
  std::printf("births %llu reproductions %llu deaths %llu kills %llu\n", static_cast<unsigned long long>(d.births),
              static_cast<unsigned long long>(d.reproductions),
              static_cast<unsigned long long>(d.deaths), static_cast<unsigned long long>(d.kills));
  if (d.messages_sent)
    std::printf("ghost_cells_sent %llu messages %llu emigration_requests %llu approvals %llu denials %llu\n",
                static_cast<unsigned long long>(d.ghost_cells_sent), static_cast<unsigned long long>(d.messages_sent),
                static_cast<unsigned long long>(d.emigration_requests), static_cast<unsigned long long>(d.approvals),
                static_cast<unsigned long long>(d.denials));
}

/// Per-step file outputs shared by sequential and partitioned runs.
class RunOutputs {
public:
  RunOutputs(const ModelConfig& cfg, const fs::path& dir, const Options& o) : cfg_(cfg), dir_(dir), opts_(o)
  {
    write_file_text(dir / "config.effective.txt", config_to_text(cfg));
    if (cfg.features.file_output) stats_.emplace((dir / "stats.csv").string());
    if (cfg.features.histogram_output)
      hist_.emplace((dir / "histogram.csv").string(), cfg.histogram_bin_width, cfg.histogram_bins);
  }

  bool wants_world(std::uint64_t step) const
  {
    return hist_ || (opts_.raster_every && step % opts_.raster_every == 0) ||
           (opts_.checkpoint_at && *opts_.checkpoint_at == step);
  }

  template <typename L>
  void start(const WorldState<L>& w)
  {
    if (opts_.raster_every) write_raster(w, frame_path(w.step));
    if (opts_.checkpoint_at && *opts_.checkpoint_at == w.step) checkpoint(w, checkpoint_path(w.step));
  }

  void row(const StatsRow& r)
  {
    if (stats_) stats_->append(r);
  }

  template <typename L>
  void world(const WorldState<L>& w)
  {
    if (hist_) hist_->append(w.step, sizes_by_id(w));
    if (opts_.raster_every && w.step % opts_.raster_every == 0) write_raster(w, frame_path(w.step));
    if (opts_.checkpoint_at && *opts_.checkpoint_at == w.step) checkpoint(w, checkpoint_path(w.step));
  }

  void finish()
  {
    if (stats_) stats_->flush();
  }

private:
  static void write_file_text(const fs::path& p, const std::string& s)
  {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(p.string(), "cannot open for writing");
    out << s;
  }
  std::string frame_path(std::uint64_t step) const { return (dir_ / ("frame_" + zero_pad(step, 6) + ".ppm")).string(); }
  std::string checkpoint_path(std::uint64_t step) const
  {
    return (dir_ / ("checkpoint_" + zero_pad(step, 6) + ".txt")).string();
  }

  ModelConfig cfg_;
  fs::path dir_;
  const Options& opts_;
  std::optional<StatsWriter> stats_;
  std::optional<HistogramWriter> hist_;
};

template <typename L>
int run_sequential(WorldState<L>& w, RunOutputs& out)
{
  out.start(w);
  const RunReport r = run_world(w, [&](const WorldState<L>& world, const StatsRow& row) {
    out.row(row);
    out.world(world);
  });
  out.finish();
  print_report(r, w.bugs.size(), w.step);
  return 0;
}

template <typename L>
int run_partitioned(const WorldState<L>& global, const Options& o, Variant variant, RunOutputs& out)
{
  PartitionOptions po;
  po.workers = o.workers.front();
  po.variant = variant;
  po.threaded = o.threaded;
  PartitionRuntime<L> rt(global, po);
  out.start(global);
  const RunReport r = rt.run([&](const PartitionRuntime<L>& runtime, const StatsRow& row) {
    out.row(row);
    if (out.wants_world(runtime.step_count())) out.world(runtime.gather());
  });
  out.finish();
  std::uint64_t bugs = r.stats.empty() ? global.bugs.size() : r.stats.back().bug_count;
  print_report(r, bugs, rt.step_count());
  std::printf("workers %d variant %s\n", po.workers, to_string(variant));
  return 0;
}

int cmd_run(const Options& o)
{
  AnyWorld world;
  ModelConfig cfg;
  if (!o.restore_from.empty()) {
    world = restore(o.restore_from);
    cfg = std::visit([](const auto& w) { return w.config; }, world);
    if (o.steps) cfg.stop = StopRule::fixed(*o.steps);
    if (!o.layout.empty() && parse_layout(o.layout) != cfg.layout) {
      world = convert_layout(world, parse_layout(o.layout));
      cfg.layout = parse_layout(o.layout);
    }
    std::visit([&](auto& w) { w.config.stop = cfg.stop; }, world);
  } else {
    cfg = resolve_config(o);
    const auto habitat = load_habitat(cfg);
    world = make_world(cfg, habitat ? &*habitat : nullptr);
  }
  const fs::path dir = prepare_out(o.out);
  RunOutputs out(cfg, dir, o);
  const int workers = o.workers.empty() ? 1 : o.workers.front();
  if (o.workers.size() > 1) throw ConfigError("run takes a single --workers value");
  if (workers < 1) throw ConfigError("--workers must be >= 1");
  if (workers == 1 && o.variant.empty())
    return std::visit([&](auto& w) { return run_sequential(w, out); }, world);
  if (o.checkpoint_at) throw ConfigError("--checkpoint-at needs the sequential engine (one worker, no --variant)");
  const Variant variant = o.variant.empty() ? Variant::ghost_exchange : parse_variant(o.variant);
  Options po = o;
  po.workers = {workers};
  return std::visit([&](const auto& w) { return run_partitioned(w, po, variant, out); }, world);
}

int cmd_bench(const Options& o)
{
  ModelConfig cfg = resolve_config(o);
  const auto habitat = load_habitat(cfg);
  const HabitatMap* hp = habitat ? &*habitat : nullptr;
  if (o.reps < 1) throw ConfigError("--reps must be >= 1");
  const fs::path dir = prepare_out(o.out);
  {
    std::ofstream eff(dir / "config.effective.txt", std::ios::binary | std::ios::trunc);
    eff << config_to_text(cfg);
  }

  if (o.layout_compare) {
    const LayoutComparison c = layout_bench(cfg, o.reps, hp);
    std::printf("layout,mean_seconds,stddev_seconds,cv,unstable\n");
    for (const BenchSummary* s : {&c.cell_object, &c.field})
      std::printf("%s,%.6f,%.6f,%.4f,%s\n", s->label.c_str(), s->mean, s->stddev, s->cv, s->unstable ? "yes" : "no");
    std::printf("field_speedup %.4f\n", c.speedup);
    std::printf("same_digest %s\n", c.same_digest ? "yes" : "no");
    return c.same_digest ? 0 : 2;
  }

  std::vector<int> workers = o.workers.empty() ? std::vector<int>{1} : o.workers;
  for (int n : workers)
    if (n < 1) throw ConfigError("--workers values must be >= 1");
  std::vector<Variant> variants;
  if (o.variant.empty() || o.variant == "both") variants = {Variant::ghost_exchange, Variant::field_halo};
  else variants = {parse_variant(o.variant)};
  for (int n : workers) stripe_partition(cfg.geometry(), n, cfg.move_radius);

  const auto rows = speedup_bench(cfg, workers, o.reps, variants, hp);
  {
    std::ofstream csv(dir / "bench.csv", std::ios::binary | std::ios::trunc);
    if (!csv) throw IoError((dir / "bench.csv").string(), "cannot open for writing");
    csv << bench_csv(rows);
  }
  const auto summary = summarize(rows);
  {
    std::ofstream csv(dir / "bench_summary.csv", std::ios::binary | std::ios::trunc);
    if (!csv) throw IoError((dir / "bench_summary.csv").string(), "cannot open for writing");
    csv << "variant,workers,mean_seconds,stddev_seconds,cv,unstable\n";
    for (const auto& s : summary)
      csv << s.label << ',' << s.workers << ',' << text::format_real(s.mean) << ',' << text::format_real(s.stddev)
          << ',' << text::format_real(s.cv) << ',' << (s.unstable ? "yes" : "no") << '\n';
  }
  std::printf("variant workers mean_s stddev_s cv speedup\n");
  for (const auto& s : summary) {
    double speedup = 0;
    for (const auto& r : rows)
      if (to_string(r.variant) == s.label && r.workers == s.workers) speedup += r.speedup / o.reps;
    std::printf("%s %d %.6f %.6f %.4f %.3f%s\n", s.label.c_str(), s.workers, s.mean, s.stddev, s.cv, speedup,
                s.unstable ? "  UNSTABLE (stddev > 10% of mean)" : "");
  }
  return 0;
}

int cmd_snapshot(const Options& o)
{
  AnyWorld world;
  if (!o.checkpoint_in.empty()) {
    world = restore(o.checkpoint_in);
  } else {
    ModelConfig cfg = resolve_config(o);
    if (!o.steps) cfg.stop = StopRule::fixed(0);
    const auto habitat = load_habitat(cfg);
    world = make_world(cfg, habitat ? &*habitat : nullptr);
    std::visit([](auto& w) { run_world(w); }, world);
  }
  std::string path = o.out.empty() ? "snapshot.ppm" : o.out;
  if (fs::is_directory(path)) path = (fs::path(path) / "snapshot.ppm").string();
  write_raster(world, path);
  const std::uint64_t step = std::visit([](const auto& w) { return w.step; }, world);
  std::printf("wrote %s at step %llu\n", path.c_str(), static_cast<unsigned long long>(step));
  return 0;
}

void print_preset_table()
{
  std::printf("preset growth food histogram file_output mortality predators movement scheduler stop food_mode size_sd\n");
  for (int v = 1; v <= kPresetCount; ++v) {
    const ModelConfig c = preset_config(v);
    const FeatureSet& f = c.features;
    auto b = [](bool x) { return x ? "on" : "-"; };
    std::printf("v%-5d %-6s %-4s %-9s %-11s %-9s %-9s %-12s %-16s %-12s %-10s %s\n", v, b(f.growth), b(f.food),
                b(f.histogram_output), b(f.file_output), b(f.mortality_reproduction), b(f.predators),
                to_string(c.movement_rule), to_string(c.scheduler), to_string(c.stop).c_str(), to_string(c.food_mode),
                text::format_real(c.initial_bug_size_sd).c_str());
  }
}

int cmd_inspect(const Options& o)
{
  const ModelConfig cfg = resolve_config(o);
  std::printf("# effective config\n%s\n", config_to_text(cfg).c_str());
  std::printf("# presets\n");
  print_preset_table();
  const int workers = o.workers.empty() ? 1 : o.workers.front();
  const PartitionMap map = stripe_partition(cfg.geometry(), workers, cfg.move_radius);
  std::printf("\n# partition workers=%d halo=%d\n", workers, map.halo_radius());
  std::printf("rank rows height ghost_cells\n");
  for (int r = 0; r < map.worker_count(); ++r) {
    const RowRange s = map.stripe(r);
    std::printf("%d %d-%d %d %zu\n", r, s.begin, s.end - 1, s.end - s.begin, ghost_cells(map, r).size());
  }
  return 0;
}

void add_config_flags(CLI::App* cmd, Options& o)
{
  cmd->add_option("--config", o.config_file, "key = value config file");
  cmd->add_option("--preset", o.preset, "model version preset v1..v16");
  cmd->add_option("--steps", o.steps, "run exactly N steps");
  cmd->add_option("--seed", o.seed, "master seed (overrides STUPIDMODEL_SEED and the config file)");
  cmd->add_option("--layout", o.layout, "cell or field");
  cmd->add_option("--habitat", o.habitat, "habitat file with per-cell production rates");
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Stupid Model simulation driver"};
  app.require_subcommand(1);
  Options o;

  auto* run = app.add_subcommand("run", "run one simulation");
  add_config_flags(run, o);
  run->add_option("--workers", o.workers, "worker count for the partition runtime")->delimiter(',');
  run->add_option("--variant", o.variant, "partition variant: ghost or field");
  run->add_option("--out", o.out, "output directory");
  run->add_option("--raster-every", o.raster_every, "write frame_NNNNNN.ppm every K steps");
  run->add_option("--checkpoint-at", o.checkpoint_at, "write checkpoint_NNNNNN.txt after step N");
  run->add_option("--restore", o.restore_from, "continue from a checkpoint");
  run->add_flag("--threads", o.threaded, "run partition workers on threads");

  auto* bench = app.add_subcommand("bench", "speedup and layout benchmarks");
  add_config_flags(bench, o);
  bench->add_option("--workers", o.workers, "comma-separated worker counts")->delimiter(',');
  bench->add_option("--variant", o.variant, "ghost, field or both");
  bench->add_option("--reps", o.reps, "repetitions per configuration");
  bench->add_option("--out", o.out, "output directory");
  bench->add_flag("--layout-compare", o.layout_compare, "time the sequential engine in both layouts");

  auto* snap = app.add_subcommand("snapshot", "write a PPM raster of a world");
  add_config_flags(snap, o);
  snap->add_option("--checkpoint", o.checkpoint_in, "render this checkpoint");
  snap->add_option("--out", o.out, "output file (default snapshot.ppm)");

  auto* inspect = app.add_subcommand("inspect", "print the effective config, presets and partition map");
  add_config_flags(inspect, o);
  inspect->add_option("--workers", o.workers, "worker count for the partition map")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (run->parsed()) return cmd_run(o);
    if (bench->parsed()) return cmd_bench(o);
    if (snap->parsed()) return cmd_snapshot(o);
    if (inspect->parsed()) return cmd_inspect(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const GeometryError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const ProtocolError& e) {
    std::cerr << "protocol error: " << e.what() << '\n';
    return 2;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
