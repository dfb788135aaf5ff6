#pragma once

// Shared fixtures and independent oracles for the test suites. The oracles
// deliberately avoid the library's own helpers so they check rather than
// restate the implementation.

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <unistd.h>

#include "stupid/stupid.hpp"

namespace testing_support {

namespace fs = std::filesystem;

class TempDir {
public:
  TempDir()
  {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("stupid_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir()
  {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
  fs::path path_;
};

inline std::string slurp(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::string& path, const std::string& bytes)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << bytes;
}

/// The Fig. 1 benchmark setup: bugs move and grow, nothing is born or dies.
inline stupid::ModelConfig movement_only(stupid::ModelConfig cfg)
{
  cfg.features.mortality_reproduction = false;
  cfg.features.predators = false;
  return cfg;
}

inline stupid::ModelConfig small_config(int width, int height, std::uint32_t bugs, std::uint64_t seed, int preset = 11)
{
  stupid::ModelConfig cfg = stupid::preset_config(preset);
  cfg.width = width;
  cfg.height = height;
  cfg.initial_bug_count = bugs;
  cfg.seed = seed;
  cfg.predator_count = std::min<std::uint32_t>(cfg.predator_count, static_cast<std::uint32_t>(width * height / 20));
  return cfg;
}

/// Best-food destination by exhaustive scan: every (dx, dy) in the block,
/// admissible if free or the bug's own cell, maximal food, then lowest id.
template <typename W>
stupid::CellId oracle_best_food(const W& w, stupid::CellId from, int radius)
{
  const int width = w.geometry.width(), height = w.geometry.height();
  const int fx = static_cast<int>(from) % width, fy = static_cast<int>(from) / width;
  std::vector<std::pair<double, stupid::CellId>> candidates;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx) {
      const int x = ((fx + dx) % width + width) % width;
      const int y = ((fy + dy) % height + height) % height;
      const auto id = static_cast<stupid::CellId>(y * width + x);
      if (id == from || w.cells.occupant(id).is_null()) candidates.emplace_back(w.cells.food(id), id);
    }
  double best = -1;
  for (auto& [f, id] : candidates) best = std::max(best, f);
  stupid::CellId pick = stupid::kNoCell;
  for (auto& [f, id] : candidates)
    if (f == best) pick = std::min(pick, id);
  return pick;
}

/// One arbiter seeing every request at once: walk them in (destination,
/// origin, bug id) order and award a cell to the first request if nobody
/// occupies it and it was not awarded already.
inline std::map<std::uint64_t, bool> oracle_arbitration(std::vector<stupid::EmigrationRequest> requests,
                                                        const std::set<stupid::CellId>& occupied)
{
  std::sort(requests.begin(), requests.end(), [](const auto& a, const auto& b) {
    return std::make_tuple(a.destination, a.origin, a.bug_id) < std::make_tuple(b.destination, b.origin, b.bug_id);
  });
  std::set<stupid::CellId> awarded;
  std::map<std::uint64_t, bool> out;
  for (const auto& q : requests) {
    const bool ok = !occupied.count(q.destination) && !awarded.count(q.destination);
    if (ok) awarded.insert(q.destination);
    out[q.request_id] = ok;
  }
  return out;
}

/// Independent occupancy check: every live bug on its own cell, the cell
/// naming it back, and no two bugs sharing a cell.
template <typename W>
std::string occupancy_audit(const W& w)
{
  std::set<stupid::CellId> cells;
  std::set<stupid::AgentId> ids;
  std::string err;
  w.bugs.for_each([&](stupid::Handle h, const stupid::Bug& b) {
    if (!err.empty()) return;
    if (!cells.insert(b.cell).second) err = "two bugs on cell " + std::to_string(b.cell);
    else if (!ids.insert(b.id).second) err = "duplicate bug id " + std::to_string(b.id);
    else if (!(w.cells.occupant(b.cell) == h)) err = "cell " + std::to_string(b.cell) + " does not name its bug";
  });
  if (!err.empty()) return err;
  std::size_t occupied = 0;
  for (stupid::CellId c = 0; c < w.geometry.cell_count(); ++c)
    if (!w.cells.occupant(c).is_null()) ++occupied;
  if (occupied != cells.size()) return "stray occupant entries";
  return {};
}

} // namespace testing_support
