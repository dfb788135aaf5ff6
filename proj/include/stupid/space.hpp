#pragma once

// Toroidal lattice addressing, neighbourhoods and row-stripe partitions.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <vector>

#include "errors.hpp"

namespace stupid {

/// Row-major flat cell index: y * width + x.
using CellId = std::uint32_t;
inline constexpr CellId kNoCell = 0xFFFFFFFFu;

struct CellIndex {
  int x = 0;
  int y = 0;
  friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

enum class NeighborhoodKind { moore, von_neumann };

class GridGeometry {
public:
  GridGeometry() = default;
  GridGeometry(int width, int height) : width_(width), height_(height)
  {
    if (width < 1 || height < 1)
      throw GeometryError("grid dimensions must be positive, got " + std::to_string(width) + "x" +
                          std::to_string(height));
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t cell_count() const noexcept
  {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }

  CellIndex wrap(int x, int y) const noexcept { return {floor_mod(x, width_), floor_mod(y, height_)}; }

  CellId flat(CellIndex c) const noexcept { return static_cast<CellId>(c.y * width_ + c.x); }
  CellId flat(int x, int y) const noexcept { return flat(wrap(x, y)); }
  CellIndex index(CellId id) const noexcept
  {
    return {static_cast<int>(id % static_cast<CellId>(width_)),
            static_cast<int>(id / static_cast<CellId>(width_))};
  }

  /// Cell at `center + (dx, dy)` on the torus.
  CellId offset(CellId center, int dx, int dy) const noexcept
  {
    const CellIndex c = index(center);
    return flat(c.x + dx, c.y + dy);
  }

  /// Throws unless a radius-`radius` block fits without wrapping onto itself.
  void require_radius(int radius) const
  {
    if (radius < 0) throw GeometryError("negative neighbourhood radius");
    if (2 * radius + 1 > std::min(width_, height_))
      throw GeometryError("grid " + std::to_string(width_) + "x" + std::to_string(height_) +
                          " too small for radius " + std::to_string(radius));
  }

  /// Chebyshev distance on the torus.
  int chebyshev(CellId a, CellId b) const noexcept
  {
    const CellIndex p = index(a), q = index(b);
    int dx = std::abs(p.x - q.x), dy = std::abs(p.y - q.y);
    dx = std::min(dx, width_ - dx);
    dy = std::min(dy, height_ - dy);
    return std::max(dx, dy);
  }

  friend bool operator==(const GridGeometry&, const GridGeometry&) = default;

private:
  static int floor_mod(int v, int m) noexcept
  {
    const int r = v % m;
    return r < 0 ? r + m : r;
  }

  int width_ = 1;
  int height_ = 1;
};

inline CellIndex wrap(const GridGeometry& g, int x, int y) { return g.wrap(x, y); }

/// Visits the Moore block of `radius` around `center` in row-major offset
/// order (dy outer, dx inner, both ascending). No validation; callers check
/// the radius once up front.
template <typename Fn>
inline void for_each_moore(const GridGeometry& g, CellId center, int radius, bool include_center, Fn&& fn)
{
  const CellIndex c = g.index(center);
  for (int dy = -radius; dy <= radius; ++dy) {
    int y = c.y + dy;
    if (y < 0) y += g.height();
    else if (y >= g.height()) y -= g.height();
    const CellId row = static_cast<CellId>(y * g.width());
    for (int dx = -radius; dx <= radius; ++dx) {
      if (!include_center && dx == 0 && dy == 0) continue;
      int x = c.x + dx;
      if (x < 0) x += g.width();
      else if (x >= g.width()) x -= g.width();
      fn(row + static_cast<CellId>(x));
    }
  }
}

inline std::vector<CellIndex> moore_neighborhood(const GridGeometry& g, CellIndex center, int radius,
                                                 bool include_center)
{
  g.require_radius(radius);
  std::vector<CellIndex> out;
  out.reserve(static_cast<std::size_t>((2 * radius + 1) * (2 * radius + 1)));
  for_each_moore(g, g.flat(center), radius, include_center,
                 [&](CellId id) { out.push_back(g.index(id)); });
  return out;
}

/// Cells with |dx| + |dy| <= radius, centre excluded.
inline std::vector<CellIndex> von_neumann_neighborhood(const GridGeometry& g, CellIndex center, int radius)
{
  g.require_radius(radius);
  std::vector<CellIndex> out;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx) {
      if ((dx == 0 && dy == 0) || std::abs(dx) + std::abs(dy) > radius) continue;
      out.push_back(g.wrap(center.x + dx, center.y + dy));
    }
  return out;
}

struct RowRange {
  int begin = 0; // inclusive
  int end = 0;   // exclusive
  int height() const noexcept { return end - begin; }
  bool contains(int y) const noexcept { return y >= begin && y < end; }
};

/// Contiguous row stripes on a ring of workers.
class PartitionMap {
public:
  PartitionMap() = default;
  PartitionMap(GridGeometry g, std::vector<RowRange> stripes, int halo_radius)
      : geometry_(g), stripes_(std::move(stripes)), halo_radius_(halo_radius)
  {
    owner_.resize(static_cast<std::size_t>(g.height()));
    for (std::size_t r = 0; r < stripes_.size(); ++r)
      for (int y = stripes_[r].begin; y < stripes_[r].end; ++y) owner_[static_cast<std::size_t>(y)] = static_cast<int>(r);
  }

  const GridGeometry& geometry() const noexcept { return geometry_; }
  int worker_count() const noexcept { return static_cast<int>(stripes_.size()); }
  int halo_radius() const noexcept { return halo_radius_; }
  const RowRange& stripe(int worker) const { return stripes_.at(static_cast<std::size_t>(worker)); }
  const std::vector<RowRange>& stripes() const noexcept { return stripes_; }

  int owner_of_row(int y) const noexcept { return owner_[static_cast<std::size_t>(y)]; }
  int owner_of(CellId cell) const noexcept { return owner_of_row(static_cast<int>(cell / static_cast<CellId>(geometry_.width()))); }
  bool is_local(int worker, CellId cell) const noexcept { return owner_of(cell) == worker; }

  int up(int worker) const noexcept { return (worker + worker_count() - 1) % worker_count(); }
  int down(int worker) const noexcept { return (worker + 1) % worker_count(); }

  /// Distinct ring neighbours of `worker`, ascending; empty for one worker.
  std::vector<int> ring_neighbors(int worker) const
  {
    if (worker_count() == 1) return {};
    std::vector<int> n{up(worker), down(worker)};
    std::sort(n.begin(), n.end());
    n.erase(std::unique(n.begin(), n.end()), n.end());
    return n;
  }

  /// Flat ids of the worker's own cells, ascending.
  std::vector<CellId> local_cells(int worker) const
  {
    const RowRange& s = stripe(worker);
    std::vector<CellId> out;
    out.reserve(static_cast<std::size_t>(s.height() * geometry_.width()));
    for (int y = s.begin; y < s.end; ++y)
      for (int x = 0; x < geometry_.width(); ++x) out.push_back(geometry_.flat(CellIndex{x, y}));
    return out;
  }

private:
  GridGeometry geometry_;
  std::vector<RowRange> stripes_;
  std::vector<int> owner_;
  int halo_radius_ = 0;
};

/// Heights differ by at most one; the remainder goes to the lowest ranks.
inline PartitionMap stripe_partition(const GridGeometry& g, int workers, int halo_radius)
{
  if (workers < 1) throw GeometryError("worker count must be at least 1");
  if (halo_radius < 0) throw GeometryError("negative halo radius");
  const int base = g.height() / workers;
  const int extra = g.height() % workers;
  if (base < 1 || (workers > 1 && base < halo_radius))
    throw GeometryError(std::to_string(workers) + " workers on " + std::to_string(g.height()) +
                        " rows leaves stripes shorter than the halo radius " + std::to_string(halo_radius));
  std::vector<RowRange> stripes;
  int row = 0;
  for (int w = 0; w < workers; ++w) {
    const int h = base + (w < extra ? 1 : 0);
    stripes.push_back({row, row + h});
    row += h;
  }
  return PartitionMap(g, std::move(stripes), halo_radius);
}

/// Deduplicated ghost set: non-local cells within halo_radius rows of the
/// worker's stripe, ascending flat index.
inline std::vector<CellId> ghost_cells(const PartitionMap& map, int worker)
{
  if (map.worker_count() == 1) return {};
  const GridGeometry& g = map.geometry();
  const RowRange& s = map.stripe(worker);
  std::vector<int> rows;
  for (int d = 1; d <= map.halo_radius(); ++d) {
    for (int y : {s.begin - d, s.end - 1 + d}) {
      const int wy = g.wrap(0, y).y;
      if (!s.contains(wy)) rows.push_back(wy);
    }
  }
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  std::vector<CellId> out;
  out.reserve(rows.size() * static_cast<std::size_t>(g.width()));
  for (int y : rows)
    for (int x = 0; x < g.width(); ++x) out.push_back(g.flat(CellIndex{x, y}));
  return out;
}

/// The neighbour-walk transfer list: every remote neighbour of every local
/// cell, duplicates kept. Quantifies what deduplication saves.
inline std::vector<CellId> naive_ghost_list(const PartitionMap& map, int worker, NeighborhoodKind kind, int radius)
{
  const GridGeometry& g = map.geometry();
  g.require_radius(radius);
  std::vector<CellId> out;
  for (CellId cell : map.local_cells(worker)) {
    if (kind == NeighborhoodKind::moore) {
      for_each_moore(g, cell, radius, false, [&](CellId n) {
        if (!map.is_local(worker, n)) out.push_back(n);
      });
    } else {
      for (const CellIndex& n : von_neumann_neighborhood(g, g.index(cell), radius)) {
        const CellId id = g.flat(n);
        if (!map.is_local(worker, id)) out.push_back(id);
      }
    }
  }
  return out;
}

} // namespace stupid
