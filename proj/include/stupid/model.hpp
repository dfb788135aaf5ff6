#pragma once

// Per-agent rules of the bug model. Each rule reads the world through the
// accessors shared by both layouts (food, is_free, occupant, geometry) and
// leaves mutation to the caller, so the sequential engine and the partition
// workers apply the same rule code.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "config.hpp"
#include "rng.hpp"
#include "space.hpp"
#include "world.hpp"

namespace stupid {

/// Food after one production step. Stochastic mode adds a per-cell draw
/// scaled by the cell's production rate; habitat mode adds the rate itself.
inline double produce_food(double food, double rate, FoodMode mode, std::uint64_t seed, CellId cell,
                           std::uint64_t step) noexcept
{
  if (mode == FoodMode::habitat) return food + rate;
  return food + cell_stream_draw(seed, {cell, step, Substream::food}) * rate;
}

inline CellState produce_food(CellState cell, CellId id, std::uint64_t step, std::uint64_t seed, FoodMode mode)
{
  cell.food_available = produce_food(cell.food_available, cell.production_rate, mode, seed, id, step);
  return cell;
}

struct MoveChoice {
  CellId cell = kNoCell;
  bool cap_hit = false;
};

/// Draws offsets in [-radius, radius] until the drawn cell is free or is the
/// bug's own cell. Gives up after `retry_cap` draws and stays.
template <typename W>
MoveChoice select_move_random_retry(const W& world, CellId from, int radius, int retry_cap, RngState& rng)
{
  for (int attempt = 0; attempt < retry_cap; ++attempt) {
    const int dx = static_cast<int>(rng.next_int(-radius, radius));
    const int dy = static_cast<int>(rng.next_int(-radius, radius));
    const CellId c = world.geometry.offset(from, dx, dy);
    if (c == from || world.is_free(c)) return {c, false};
  }
  return {from, true};
}

/// Free cell (or own cell) with the most food in the Moore block; ties go to
/// the lowest flat index.
template <typename W>
CellId select_move_best_food(const W& world, CellId from, int radius)
{
  CellId best = kNoCell;
  double best_food = -1.0;
  for_each_moore(world.geometry, from, radius, true, [&](CellId c) {
    if (c != from && !world.is_free(c)) return;
    const double f = world.food(c);
    if (f > best_food || (f == best_food && c < best)) {
      best_food = f;
      best = c;
    }
  });
  return best;
}

/// Moves min(max_consumption, food) from the cell into the bug. Returns the
/// amount eaten.
inline double consume_and_grow(double& size, double& food, double max_consumption) noexcept
{
  const double eaten = std::min(max_consumption, food);
  food -= eaten;
  size += eaten;
  return eaten;
}

inline bool survive(RngState& rng, double survival_probability) { return rng.next_unit() < survival_probability; }

inline constexpr int kPlacementAttempts = 5;

/// Cells for up to `offspring_count` newborns: each gets at most five draws
/// within `offspring_place_radius`; a draw succeeds on a free cell accepted by
/// `allowed` that no earlier sibling took. Failed offspring are skipped.
template <typename W, typename Allowed>
std::vector<CellId> offspring_placements(const W& world, CellId parent_cell, const ModelConfig& cfg, RngState& rng,
                                         Allowed&& allowed)
{
  std::vector<CellId> out;
  const int r = cfg.offspring_place_radius;
  for (std::uint32_t k = 0; k < cfg.offspring_count; ++k) {
    for (int attempt = 0; attempt < kPlacementAttempts; ++attempt) {
      const int dx = static_cast<int>(rng.next_int(-r, r));
      const int dy = static_cast<int>(rng.next_int(-r, r));
      const CellId c = world.geometry.offset(parent_cell, dx, dy);
      if (!world.is_free(c) || !allowed(c)) continue;
      if (std::find(out.begin(), out.end(), c) != out.end()) continue;
      out.push_back(c);
      break;
    }
  }
  return out;
}

template <typename W>
std::vector<CellId> offspring_placements(const W& world, CellId parent_cell, const ModelConfig& cfg, RngState& rng)
{
  return offspring_placements(world, parent_cell, cfg, rng, [](CellId) { return true; });
}

struct HuntAction {
  enum class Kind { kill, move };
  Kind kind = Kind::move;
  CellId target = kNoCell;
};

/// Scans the 3x3 block (own cell included) in shuffled order and kills the
/// first bug found; otherwise moves to a uniformly drawn block cell. Cells
/// rejected by `allowed` are never hunted or entered.
template <typename W, typename Allowed>
HuntAction predator_hunt(const W& world, CellId at, RngState& rng, Allowed&& allowed)
{
  std::array<CellId, 9> block{};
  std::size_t n = 0;
  for_each_moore(world.geometry, at, 1, true, [&](CellId c) { block[n++] = c; });
  rng.shuffle(std::span<CellId>(block));
  for (CellId c : block) {
    const Handle h = world.occupant(c);
    if (!h.is_null() && !is_marker(h) && allowed(c)) return {HuntAction::Kind::kill, c};
  }
  const int dx = static_cast<int>(rng.next_int(-1, 1));
  const int dy = static_cast<int>(rng.next_int(-1, 1));
  const CellId dest = world.geometry.offset(at, dx, dy);
  return {HuntAction::Kind::move, allowed(dest) ? dest : at};
}

template <typename W>
HuntAction predator_hunt(const W& world, CellId at, RngState& rng)
{
  return predator_hunt(world, at, rng, [](CellId) { return true; });
}

/// Largest size, 0 for an empty population.
inline double max_bugsize(std::span<const double> sizes) noexcept
{
  double m = 0.0;
  for (double s : sizes) m = s > m ? s : m;
  return m;
}

template <typename L>
double max_bugsize(const WorldState<L>& w) noexcept
{
  double m = 0.0;
  w.bugs.for_each([&](Handle, const Bug& b) { m = b.size > m ? b.size : m; });
  return m;
}

struct StatsRow {
  std::uint64_t step = 0;
  std::uint64_t bug_count = 0;
  double min_size = 0.0;
  double mean_size = 0.0;
  double max_size = 0.0;
  std::uint64_t predator_count = 0;
  double total_food = 0.0;
  friend bool operator==(const StatsRow&, const StatsRow&) = default;
};

/// Aggregates from bug sizes listed in ascending id order and per-row food
/// sums listed in row order. Fixing both summation orders keeps the result
/// identical however the state is stored or partitioned.
inline StatsRow stats_from(std::uint64_t step, std::span<const double> sizes_by_id, std::uint64_t predator_count,
                           std::span<const double> row_food_sums)
{
  StatsRow r;
  r.step = step;
  r.bug_count = sizes_by_id.size();
  r.predator_count = predator_count;
  if (!sizes_by_id.empty()) {
    double lo = sizes_by_id[0], hi = sizes_by_id[0], sum = 0.0;
    for (double s : sizes_by_id) {
      lo = std::min(lo, s);
      hi = std::max(hi, s);
      sum += s;
    }
    r.min_size = lo;
    r.max_size = hi;
    r.mean_size = sum / static_cast<double>(sizes_by_id.size());
  }
  double total = 0.0;
  for (double f : row_food_sums) total += f;
  r.total_food = total;
  return r;
}

inline bool check_stop(std::uint64_t completed_steps, double max_size, const StopRule& rule) noexcept
{
  if (rule.kind == StopRule::Kind::max_size_reached) return max_size >= rule.threshold;
  return completed_steps >= rule.steps;
}

/// counts[i] = #sizes in [i*w, (i+1)*w); the last bin absorbs overflow.
inline std::vector<std::uint64_t> histogram(std::span<const double> sizes, double bin_width, std::size_t bin_count)
{
  std::vector<std::uint64_t> counts(bin_count, 0);
  if (bin_count == 0) return counts;
  for (double s : sizes) {
    const double q = std::floor(s / bin_width);
    std::size_t i = q <= 0 ? 0 : (q >= static_cast<double>(bin_count) ? bin_count - 1 : static_cast<std::size_t>(q));
    ++counts[i];
  }
  return counts;
}

} // namespace stupid
