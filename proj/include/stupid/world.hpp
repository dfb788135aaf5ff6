#pragma once

// World state in two interchangeable cell layouts.
//
// CellObjectLayout keeps one record per cell. FieldLayout keeps each cell
// attribute in its own contiguous array. Both expose the same accessors, and
// every rule is written against those accessors, so the layout is the only
// thing that differs between the two instantiations of WorldState.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "arena.hpp"
#include "config.hpp"
#include "rng.hpp"
#include "space.hpp"

namespace stupid {

using AgentId = std::uint64_t;

struct Bug {
  AgentId id = 0;
  CellId cell = kNoCell;
  double size = 0.0;
};

struct Predator {
  AgentId id = 0;
  CellId cell = kNoCell;
};

using BugHandle = Handle;

/// Occupant markers that are not arena handles. Halo cells in a partition
/// worker hold kRemoteOccupant when the owning worker reported a bug there;
/// kReservedOccupant marks a cell awarded to an incoming migrant.
inline constexpr Handle kEmptyOccupant{};
inline constexpr Handle kRemoteOccupant{0xFFFFFFFEu, 0};
inline constexpr Handle kReservedOccupant{0xFFFFFFFDu, 0};

inline bool is_marker(Handle h) noexcept { return h.index >= 0xFFFFFFFDu; }

struct CellState {
  double food_available = 0.0;
  double production_rate = 0.0;
  Handle occupant = kEmptyOccupant;
};

class CellObjectLayout {
public:
  static constexpr Layout kind = Layout::cell_object;

  CellObjectLayout() = default;
  explicit CellObjectLayout(std::size_t n) : cells_(n) {}

  std::size_t size() const noexcept { return cells_.size(); }
  double& food(CellId c) noexcept { return cells_[c].food_available; }
  double food(CellId c) const noexcept { return cells_[c].food_available; }
  double& rate(CellId c) noexcept { return cells_[c].production_rate; }
  double rate(CellId c) const noexcept { return cells_[c].production_rate; }
  Handle& occupant(CellId c) noexcept { return cells_[c].occupant; }
  Handle occupant(CellId c) const noexcept { return cells_[c].occupant; }

private:
  std::vector<CellState> cells_;
};

class FieldLayout {
public:
  static constexpr Layout kind = Layout::field;

  FieldLayout() = default;
  explicit FieldLayout(std::size_t n) : food_(n, 0.0), rate_(n, 0.0), occupant_(n) {}

  std::size_t size() const noexcept { return food_.size(); }
  double& food(CellId c) noexcept { return food_[c]; }
  double food(CellId c) const noexcept { return food_[c]; }
  double& rate(CellId c) noexcept { return rate_[c]; }
  double rate(CellId c) const noexcept { return rate_[c]; }
  Handle& occupant(CellId c) noexcept { return occupant_[c]; }
  Handle occupant(CellId c) const noexcept { return occupant_[c]; }

  std::span<double> food_field() noexcept { return food_; }
  std::span<const double> food_field() const noexcept { return food_; }
  std::span<const double> rate_field() const noexcept { return rate_; }

private:
  std::vector<double> food_;
  std::vector<double> rate_;
  std::vector<Handle> occupant_;
};

struct RngStreams {
  RngState scheduler;
  RngState movement;
  RngState mortality;
  RngState reproduction;
  RngState predators;

  static RngStreams derive(std::uint64_t master, std::uint32_t rank = 0)
  {
    return {RngState(derive_seed(master, Substream::scheduler, rank)),
            RngState(derive_seed(master, Substream::movement, rank)),
            RngState(derive_seed(master, Substream::mortality, rank)),
            RngState(derive_seed(master, Substream::reproduction, rank)),
            RngState(derive_seed(master, Substream::predators, rank))};
  }
  friend bool operator==(const RngStreams&, const RngStreams&) = default;
};

struct Diagnostics {
  std::uint64_t retry_cap_hits = 0;
  std::uint64_t ghost_cells_sent = 0;
  std::uint64_t messages_sent = 0;
  std::uint64_t emigration_requests = 0;
  std::uint64_t approvals = 0;
  std::uint64_t denials = 0;
  std::uint64_t kills = 0;
  std::uint64_t births = 0;
  std::uint64_t reproductions = 0; // parents replaced by their offspring
  std::uint64_t deaths = 0;
};

template <typename L>
struct WorldState {
  using layout_type = L;

  ModelConfig config;
  GridGeometry geometry;
  std::uint64_t step = 0;
  L cells;
  Arena<Bug> bugs;
  Arena<Predator> predators;
  RngStreams rng;
  AgentId next_bug_id = 0;
  AgentId id_stride = 1;
  Diagnostics diag;

  WorldState() = default;
  explicit WorldState(const ModelConfig& cfg)
      : config(cfg), geometry(cfg.geometry()), cells(geometry.cell_count()), rng(RngStreams::derive(cfg.seed))
  {}

  static constexpr Layout layout() noexcept { return L::kind; }

  double food(CellId c) const noexcept { return cells.food(c); }
  Handle occupant(CellId c) const noexcept { return cells.occupant(c); }
  bool is_free(CellId c) const noexcept { return cells.occupant(c).is_null(); }

  /// Places a bug on a free cell.
  BugHandle add_bug(const Bug& b)
  {
    const BugHandle h = bugs.insert(b);
    cells.occupant(b.cell) = h;
    return h;
  }

  AgentId allocate_bug_id()
  {
    const AgentId id = next_bug_id;
    next_bug_id += id_stride;
    return id;
  }

  void remove_bug(BugHandle h)
  {
    Bug& b = bugs[h];
    if (cells.occupant(b.cell) == h) cells.occupant(b.cell) = kEmptyOccupant;
    bugs.erase(h);
  }

  void move_bug(BugHandle h, CellId dest)
  {
    Bug& b = bugs[h];
    if (b.cell == dest) return;
    cells.occupant(b.cell) = kEmptyOccupant;
    cells.occupant(dest) = h;
    b.cell = dest;
  }
};

/// Per-cell production rates read from a habitat file.
struct HabitatMap {
  int width = 0;
  int height = 0;
  std::vector<double> rates; // row-major
  std::vector<std::string> warnings;

  double rate(int x, int y) const { return rates[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)]; }
};

using CellWorld = WorldState<CellObjectLayout>;
using FieldWorld = WorldState<FieldLayout>;

} // namespace stupid
