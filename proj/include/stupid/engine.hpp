#pragma once

// Sequential driver. One step runs the phases in this order:
//   1. food production on every cell
//   2. bugs in scheduler order: move, then eat and grow
//   3. reproduction / mortality sweep, ascending bug id
//   4. predators in shuffled order
//   5. statistics and stop check

#include <algorithm>
#include <bit>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <functional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "config.hpp"
#include "model.hpp"
#include "world.hpp"

namespace stupid {

/// Live bugs in ascending id order.
template <typename L>
std::vector<BugHandle> bugs_by_id(const WorldState<L>& w)
{
  std::vector<BugHandle> out;
  out.reserve(w.bugs.size());
  w.bugs.for_each([&](Handle h, const Bug&) { out.push_back(h); });
  auto by_id = [&](Handle a, Handle b) { return w.bugs[a].id < w.bugs[b].id; };
  if (!std::is_sorted(out.begin(), out.end(), by_id)) std::sort(out.begin(), out.end(), by_id);
  return out;
}

template <typename L>
std::vector<Handle> predators_by_id(const WorldState<L>& w)
{
  std::vector<Handle> out;
  out.reserve(w.predators.size());
  w.predators.for_each([&](Handle h, const Predator&) { out.push_back(h); });
  std::sort(out.begin(), out.end(), [&](Handle a, Handle b) { return w.predators[a].id < w.predators[b].id; });
  return out;
}

/// Bug activation order for this step. Draws from the scheduler stream only
/// when the scheduler is `shuffled`.
template <typename L>
std::vector<BugHandle> schedule_order(WorldState<L>& w)
{
  std::vector<BugHandle> order = bugs_by_id(w);
  switch (w.config.scheduler) {
  case Scheduler::fixed: break;
  case Scheduler::shuffled: w.rng.scheduler.shuffle(std::span<BugHandle>(order)); break;
  case Scheduler::sorted_desc_size:
    std::stable_sort(order.begin(), order.end(),
                     [&](Handle a, Handle b) { return w.bugs[a].size > w.bugs[b].size; });
    break;
  }
  return order;
}

/// Builds the initial world: zero food, production rates from the config or
/// habitat, bugs then predators on distinct uniformly drawn cells.
template <typename L>
WorldState<L> init_world(const ModelConfig& cfg, const HabitatMap* habitat = nullptr)
{
  validate(cfg);
  WorldState<L> w(cfg);
  w.config.layout = L::kind;
  const GridGeometry& g = w.geometry;
  const std::size_t n = g.cell_count();

  if (habitat) {
    if (habitat->width != g.width() || habitat->height != g.height())
      throw ConfigError("habitat is " + std::to_string(habitat->width) + "x" + std::to_string(habitat->height) +
                        " but the grid is " + std::to_string(g.width()) + "x" + std::to_string(g.height()));
    for (CellId c = 0; c < n; ++c) w.cells.rate(c) = habitat->rates[c];
  } else {
    for (CellId c = 0; c < n; ++c) w.cells.rate(c) = cfg.max_food_production;
  }

  RngState init(derive_seed(cfg.seed, Substream::init));
  for (std::uint32_t i = 0; i < cfg.initial_bug_count; ++i) {
    CellId c;
    do {
      c = static_cast<CellId>(init.next_index(n));
    } while (!w.is_free(c));
    double size = cfg.initial_bug_size;
    if (cfg.initial_bug_size_sd > 0) {
      size = init.next_normal(cfg.initial_bug_size, cfg.initial_bug_size_sd);
      for (int tries = 0; size < 0 && tries < 100; ++tries)
        size = init.next_normal(cfg.initial_bug_size, cfg.initial_bug_size_sd);
      size = std::max(size, 0.0);
    }
    w.add_bug({w.allocate_bug_id(), c, size});
  }

  if (cfg.features.predators) {
    std::vector<bool> taken(n, false);
    for (std::uint32_t i = 0; i < cfg.predator_count; ++i) {
      CellId c;
      do {
        c = static_cast<CellId>(init.next_index(n));
      } while (taken[c]);
      taken[c] = true;
      w.predators.insert({i, c});
    }
  }
  return w;
}

template <typename L>
void food_phase(WorldState<L>& w)
{
  if (!w.config.features.food) return;
  const FoodMode mode = w.config.food_mode;
  const std::uint64_t seed = w.config.seed;
  const CellId n = static_cast<CellId>(w.geometry.cell_count());
  for (CellId c = 0; c < n; ++c)
    w.cells.food(c) = produce_food(w.cells.food(c), w.cells.rate(c), mode, seed, c, w.step);
}

template <typename L>
CellId choose_destination(WorldState<L>& w, const Bug& b)
{
  if (w.config.movement_rule == MovementRule::best_food) return select_move_best_food(w, b.cell, w.config.move_radius);
  const MoveChoice m = select_move_random_retry(w, b.cell, w.config.move_radius, w.config.retry_cap(), w.rng.movement);
  if (m.cap_hit) ++w.diag.retry_cap_hits;
  return m.cell;
}

template <typename L>
void grow(WorldState<L>& w, Bug& b)
{
  if (!w.config.features.growth) return;
  if (w.config.features.food) consume_and_grow(b.size, w.cells.food(b.cell), w.config.max_consumption);
  else b.size += w.config.max_consumption;
}

template <typename L>
void bug_phase(WorldState<L>& w)
{
  for (BugHandle h : schedule_order(w)) {
    const CellId dest = choose_destination(w, w.bugs[h]);
    w.move_bug(h, dest);
    grow(w, w.bugs[h]);
  }
}

/// Reproduction then mortality over the bugs alive at sweep start, ascending
/// id. `allowed` restricts offspring placement (partition workers pass their
/// stripe).
template <typename L, typename Allowed>
void lifecycle_phase(WorldState<L>& w, Allowed&& allowed)
{
  if (!w.config.features.mortality_reproduction) return;
  const ModelConfig& cfg = w.config;
  for (BugHandle h : bugs_by_id(w)) {
    const Bug parent = w.bugs[h];
    if (parent.size >= cfg.reproduce_threshold) {
      const auto cells = offspring_placements(w, parent.cell, cfg, w.rng.reproduction, allowed);
      for (CellId c : cells) w.add_bug({w.allocate_bug_id(), c, 0.0});
      w.diag.births += cells.size();
      ++w.diag.reproductions;
      w.remove_bug(h);
    } else if (!survive(w.rng.mortality, cfg.survival_probability)) {
      w.remove_bug(h);
      ++w.diag.deaths;
    }
  }
}

template <typename L, typename Allowed>
void predator_phase(WorldState<L>& w, Allowed&& allowed)
{
  if (!w.config.features.predators) return;
  std::vector<Handle> order = predators_by_id(w);
  w.rng.predators.shuffle(std::span<Handle>(order));
  for (Handle ph : order) {
    Predator& p = w.predators[ph];
    const HuntAction a = predator_hunt(w, p.cell, w.rng.predators, allowed);
    if (a.kind == HuntAction::Kind::kill) {
      w.remove_bug(w.cells.occupant(a.target));
      ++w.diag.kills;
    }
    p.cell = a.target;
  }
}

template <typename L>
std::vector<double> row_food_sums(const WorldState<L>& w, int row_begin, int row_end)
{
  std::vector<double> sums;
  sums.reserve(static_cast<std::size_t>(row_end - row_begin));
  const int width = w.geometry.width();
  for (int y = row_begin; y < row_end; ++y) {
    double s = 0.0;
    const CellId base = static_cast<CellId>(y * width);
    for (int x = 0; x < width; ++x) s += w.cells.food(base + static_cast<CellId>(x));
    sums.push_back(s);
  }
  return sums;
}

template <typename L>
std::vector<double> sizes_by_id(const WorldState<L>& w)
{
  std::vector<double> sizes;
  for (BugHandle h : bugs_by_id(w)) sizes.push_back(w.bugs[h].size);
  return sizes;
}

template <typename L>
StatsRow world_stats(const WorldState<L>& w)
{
  const auto sizes = sizes_by_id(w);
  const auto rows = row_food_sums(w, 0, w.geometry.height());
  return stats_from(w.step, sizes, w.predators.size(), rows);
}

/// One full step; returns the stats row for the completed step.
template <typename L>
StatsRow step(WorldState<L>& w)
{
  const auto anywhere = [](CellId) { return true; };
  food_phase(w);
  bug_phase(w);
  lifecycle_phase(w, anywhere);
  predator_phase(w, anywhere);
  ++w.step;
  return world_stats(w);
}

// ---------------------------------------------------------------------------
// Digest and layout conversion

/// Word-at-a-time mixing hash for digests.
class Digest64 {
public:
  void add(std::uint64_t word) noexcept { h_ = splitmix64(h_ ^ word) + 0x632BE59BD9B4E019ULL; }
  void add_real(double v) noexcept { add(std::bit_cast<std::uint64_t>(v)); }
  std::uint64_t value() const noexcept { return h_; }

private:
  std::uint64_t h_ = 0xCBF29CE484222325ULL;
};

/// Hash of the logical state: step, bugs and predators by ascending id, and
/// every cell's food and production rate. Independent of layout, arena slot
/// order and handle values.
template <typename L>
std::uint64_t state_digest(const WorldState<L>& w)
{
  Digest64 d;
  d.add(static_cast<std::uint64_t>(w.geometry.width()));
  d.add(static_cast<std::uint64_t>(w.geometry.height()));
  d.add(w.step);
  const auto bugs = bugs_by_id(w);
  d.add(bugs.size());
  for (BugHandle h : bugs) {
    const Bug& b = w.bugs[h];
    d.add(b.id);
    d.add(b.cell);
    d.add_real(b.size);
  }
  const auto preds = predators_by_id(w);
  d.add(preds.size());
  for (Handle h : preds) {
    d.add(w.predators[h].id);
    d.add(w.predators[h].cell);
  }
  const CellId n = static_cast<CellId>(w.geometry.cell_count());
  for (CellId c = 0; c < n; ++c) {
    d.add_real(w.cells.food(c));
    d.add_real(w.cells.rate(c));
  }
  return d.value();
}

template <typename To, typename From>
WorldState<To> convert_layout(const WorldState<From>& src)
{
  WorldState<To> dst;
  dst.config = src.config;
  dst.config.layout = To::kind;
  dst.geometry = src.geometry;
  dst.step = src.step;
  dst.cells = To(src.geometry.cell_count());
  const CellId n = static_cast<CellId>(src.geometry.cell_count());
  for (CellId c = 0; c < n; ++c) {
    dst.cells.food(c) = src.cells.food(c);
    dst.cells.rate(c) = src.cells.rate(c);
    dst.cells.occupant(c) = src.cells.occupant(c);
  }
  dst.bugs = src.bugs;
  dst.predators = src.predators;
  dst.rng = src.rng;
  dst.next_bug_id = src.next_bug_id;
  dst.id_stride = src.id_stride;
  dst.diag = src.diag;
  return dst;
}

/// Checks that every bug's cell names it back and every occupied cell names
/// a live bug. Returns an empty string when consistent.
template <typename L>
std::string occupancy_violation(const WorldState<L>& w)
{
  std::string err;
  w.bugs.for_each([&](Handle h, const Bug& b) {
    if (!err.empty()) return;
    if (b.cell >= w.geometry.cell_count()) err = "bug " + std::to_string(b.id) + " off grid";
    else if (!(w.cells.occupant(b.cell) == h)) err = "bug " + std::to_string(b.id) + " not registered at its cell";
  });
  if (!err.empty()) return err;
  const CellId n = static_cast<CellId>(w.geometry.cell_count());
  std::size_t occupied = 0;
  for (CellId c = 0; c < n; ++c) {
    const Handle h = w.cells.occupant(c);
    if (h.is_null()) continue;
    if (is_marker(h)) return "marker left in cell " + std::to_string(c);
    const Bug* b = w.bugs.get(h);
    if (!b) return "cell " + std::to_string(c) + " names a dead bug";
    if (b->cell != c) return "cell " + std::to_string(c) + " names a bug living elsewhere";
    ++occupied;
  }
  if (occupied != w.bugs.size()) return "occupied cell count differs from bug count";
  return {};
}

// ---------------------------------------------------------------------------
// Runs

using AnyWorld = std::variant<CellWorld, FieldWorld>;

inline AnyWorld make_world(const ModelConfig& cfg, const HabitatMap* habitat = nullptr)
{
  if (cfg.layout == Layout::field) return init_world<FieldLayout>(cfg, habitat);
  return init_world<CellObjectLayout>(cfg, habitat);
}

inline std::uint64_t state_digest(const AnyWorld& w)
{
  return std::visit([](const auto& x) { return state_digest(x); }, w);
}

inline AnyWorld convert_layout(const AnyWorld& w, Layout target)
{
  return std::visit(
      [&](const auto& x) -> AnyWorld {
        if (target == Layout::field) return convert_layout<FieldLayout>(x);
        return convert_layout<CellObjectLayout>(x);
      },
      w);
}

enum class StopReason { fixed_steps, max_size_reached, extinct };

inline const char* to_string(StopReason r)
{
  switch (r) {
  case StopReason::fixed_steps: return "fixed_steps";
  case StopReason::max_size_reached: return "max_size_reached";
  case StopReason::extinct: return "extinct";
  }
  return "?";
}

struct RunReport {
  std::uint64_t steps = 0;
  StopReason stop_reason = StopReason::fixed_steps;
  double wall_seconds = 0.0;
  double cpu_seconds = -1.0; // negative when unavailable
  std::vector<StatsRow> stats;
  Diagnostics diag;
};

class Stopwatch {
public:
  Stopwatch() : wall_(std::chrono::steady_clock::now()), cpu_(std::clock()) {}
  double wall_seconds() const
  {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_).count();
  }
  double cpu_seconds() const
  {
    const std::clock_t now = std::clock();
    if (now == static_cast<std::clock_t>(-1) || cpu_ == static_cast<std::clock_t>(-1)) return -1.0;
    return static_cast<double>(now - cpu_) / CLOCKS_PER_SEC;
  }

private:
  std::chrono::steady_clock::time_point wall_;
  std::clock_t cpu_;
};

/// Steps `w` until the config's stop rule holds. `on_step(world, row)` runs
/// after every step. A size threshold can never be reached once every bug is
/// gone, so such runs end early with StopReason::extinct.
template <typename L, typename OnStep>
RunReport run_world(WorldState<L>& w, OnStep&& on_step)
{
  RunReport report;
  Stopwatch clock;
  const StopRule& rule = w.config.stop;
  const bool by_size = rule.kind == StopRule::Kind::max_size_reached;
  report.stop_reason = by_size ? StopReason::max_size_reached : StopReason::fixed_steps;
  double current_max = max_bugsize(w);
  while (!check_stop(w.step, current_max, rule)) {
    if (by_size && w.bugs.empty()) {
      report.stop_reason = StopReason::extinct;
      break;
    }
    const StatsRow row = step(w);
    current_max = row.max_size;
    report.stats.push_back(row);
    on_step(std::as_const(w), row);
  }
  report.steps = report.stats.size();
  report.wall_seconds = clock.wall_seconds();
  report.cpu_seconds = clock.cpu_seconds();
  report.diag = w.diag;
  return report;
}

template <typename L>
RunReport run_world(WorldState<L>& w)
{
  return run_world(w, [](const auto&, const StatsRow&) {});
}

inline RunReport run(const ModelConfig& cfg, const HabitatMap* habitat = nullptr)
{
  AnyWorld w = make_world(cfg, habitat);
  return std::visit([](auto& x) { return run_world(x); }, w);
}

} // namespace stupid
