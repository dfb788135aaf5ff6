#pragma once

// Timing harnesses: speedup over worker counts for both partition variants,
// and sequential cell_object vs field layout comparisons.

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "engine.hpp"
#include "partition.hpp"
#include "text.hpp"

namespace stupid {

struct BenchRow {
  Variant variant = Variant::ghost_exchange;
  int workers = 1;
  int repetition = 0;
  double seconds = 0.0;
  double speedup = 1.0;
  std::uint64_t ghost_cells_per_step = 0;
};

struct BenchSummary {
  std::string label;
  int workers = 1;
  double mean = 0.0;
  double stddev = 0.0;
  double cv = 0.0;
  bool unstable = false; // stddev exceeds the repeatability limit
};

/// Repeatability limit on stddev / mean.
inline constexpr double kMaxRelativeStddev = 0.10;

inline std::pair<double, double> mean_stddev(const std::vector<double>& xs)
{
  if (xs.empty()) return {0.0, 0.0};
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

inline BenchSummary summarize(std::string label, int workers, const std::vector<double>& seconds)
{
  BenchSummary s;
  s.label = std::move(label);
  s.workers = workers;
  std::tie(s.mean, s.stddev) = mean_stddev(seconds);
  s.cv = s.mean > 0 ? s.stddev / s.mean : 0.0;
  s.unstable = s.cv > kMaxRelativeStddev;
  return s;
}

template <typename L>
std::pair<double, std::uint64_t> time_partition_run(const ModelConfig& cfg, Variant variant, int workers,
                                                    const HabitatMap* habitat)
{
  PartitionOptions opts;
  opts.workers = workers;
  opts.variant = variant;
  opts.threaded = workers > 1;
  PartitionRuntime<L> rt(cfg, opts, habitat);
  const RunReport rep = rt.run();
  return {rep.wall_seconds, rt.ghost_cells_last_step()};
}

/// Runs every (variant, worker count, repetition). The ghost variant uses the
/// cell_object layout and the field variant the field layout. Speedup is the
/// single-worker mean time over the mean time at this worker count, so every
/// repetition of a configuration carries the same value and one worker gives
/// exactly 1. The single-worker baseline is measured separately when 1 is not
/// among `worker_counts`.
inline std::vector<BenchRow> speedup_bench(const ModelConfig& cfg, const std::vector<int>& worker_counts,
                                           int repetitions, const std::vector<Variant>& variants,
                                           const HabitatMap* habitat = nullptr)
{
  std::vector<BenchRow> rows;
  for (Variant v : variants) {
    auto timed = [&](int workers) {
      return v == Variant::field_halo ? time_partition_run<FieldLayout>(cfg, v, workers, habitat)
                                      : time_partition_run<CellObjectLayout>(cfg, v, workers, habitat);
    };
    std::map<int, std::vector<std::pair<double, std::uint64_t>>> samples;
    for (int n : worker_counts)
      if (!samples.count(n))
        for (int rep = 0; rep < repetitions; ++rep) samples[n].push_back(timed(n));
    if (!samples.count(1))
      for (int rep = 0; rep < repetitions; ++rep) samples[1].push_back(timed(1));
    auto mean_of = [&](int n) {
      std::vector<double> secs;
      for (auto& [s, cells] : samples[n]) secs.push_back(s);
      return mean_stddev(secs).first;
    };
    const double base_mean = mean_of(1);
    for (int n : worker_counts) {
      const double mean = mean_of(n);
      const double speedup = n == 1 ? 1.0 : (mean > 0 ? base_mean / mean : 0.0);
      for (int rep = 0; rep < repetitions; ++rep) {
        const auto& [secs, cells] = samples[n][static_cast<std::size_t>(rep)];
        rows.push_back({v, n, rep, secs, speedup, cells});
      }
    }
  }
  return rows;
}

inline std::vector<BenchSummary> summarize(const std::vector<BenchRow>& rows)
{
  std::map<std::pair<int, int>, std::vector<double>> groups;
  for (const auto& r : rows) groups[{static_cast<int>(r.variant), r.workers}].push_back(r.seconds);
  std::vector<BenchSummary> out;
  for (const auto& [key, secs] : groups)
    out.push_back(summarize(to_string(static_cast<Variant>(key.first)), key.second, secs));
  return out;
}

inline constexpr std::string_view kBenchHeader = "variant,workers,repetition,seconds,speedup,ghost_cells_per_step";

inline std::string bench_csv(const std::vector<BenchRow>& rows)
{
  std::string out(kBenchHeader);
  out += '\n';
  for (const auto& r : rows)
    out += std::string(to_string(r.variant)) + ',' + std::to_string(r.workers) + ',' +
           std::to_string(r.repetition) + ',' + text::format_real(r.seconds) + ',' + text::format_real(r.speedup) +
           ',' + text::format_int(r.ghost_cells_per_step) + '\n';
  return out;
}

struct LayoutComparison {
  BenchSummary cell_object;
  BenchSummary field;
  double speedup = 0.0; // cell_object mean / field mean
  bool same_digest = false;
};

/// Times the sequential engine in both layouts on the same config.
inline LayoutComparison layout_bench(ModelConfig cfg, int repetitions, const HabitatMap* habitat = nullptr)
{
  std::vector<double> cell_s, field_s;
  std::uint64_t cell_digest = 0, field_digest = 0;
  for (int rep = 0; rep < repetitions; ++rep) {
    auto a = init_world<CellObjectLayout>(cfg, habitat);
    cell_s.push_back(run_world(a).wall_seconds);
    cell_digest = state_digest(a);
    auto b = init_world<FieldLayout>(cfg, habitat);
    field_s.push_back(run_world(b).wall_seconds);
    field_digest = state_digest(b);
  }
  LayoutComparison c;
  c.cell_object = summarize("cell_object", 1, cell_s);
  c.field = summarize("field", 1, field_s);
  c.speedup = c.field.mean > 0 ? c.cell_object.mean / c.field.mean : 0.0;
  c.same_digest = cell_digest == field_digest;
  return c;
}

} // namespace stupid
