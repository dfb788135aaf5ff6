#pragma once

// Deterministic random streams.
//
// Sequential streams wrap std::mt19937_64, whose output sequence is fixed by
// the standard. Conversions to reals and bounded integers are done here rather
// than through <random> distributions, which are implementation-defined.
// Cell streams are a stateless keyed mix over (seed, cell, step, substream),
// so two workers evaluating the same halo cell obtain the same value.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

namespace stupid {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Maps the top 53 bits of a word onto [0, 1).
inline constexpr double unit_real(std::uint64_t bits) noexcept
{
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Named substreams. Each stochastic subsystem draws from its own stream so
/// toggling one feature never shifts the draws seen by another.
enum class Substream : std::uint32_t {
  food = 0,
  init = 1,
  scheduler = 2,
  movement = 3,
  mortality = 4,
  reproduction = 5,
  predators = 6,
};

inline constexpr std::uint64_t derive_seed(std::uint64_t master, Substream stream,
                                           std::uint32_t rank = 0) noexcept
{
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ (static_cast<std::uint64_t>(stream) + 1) * 0xD1B54A32D192ED03ULL);
  return splitmix64(h ^ static_cast<std::uint64_t>(rank) * 0xAEF17502108EF2D9ULL);
}

class RngState {
public:
  RngState() : RngState(0) {}
  explicit RngState(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_bits() { return engine_(); }

  /// Uniform in [lo, hi); lo == hi returns lo. Always consumes one draw.
  double next_uniform(double lo, double hi)
  {
    const double u = unit_real(next_bits());
    if (!(lo < hi)) return lo;
    const double v = lo + (hi - lo) * u;
    return v < hi ? v : std::nextafter(hi, lo);
  }

  double next_unit() { return unit_real(next_bits()); }

  /// Uniform integer in [lo, hi] inclusive (Lemire's multiply-shift with
  /// rejection, so the result is unbiased).
  std::int64_t next_int(std::int64_t lo, std::int64_t hi)
  {
    const std::uint64_t span = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo);
    if (span == std::numeric_limits<std::uint64_t>::max())
      return static_cast<std::int64_t>(next_bits());
    return lo + static_cast<std::int64_t>(bounded(span + 1));
  }

  /// Uniform index in [0, n). n must be positive.
  std::uint64_t next_index(std::uint64_t n) { return bounded(n); }

  /// Normal deviate (Box-Muller, two draws per call, no caching).
  double next_normal(double mean, double sd)
  {
    double u1 = next_unit();
    const double u2 = next_unit();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + sd * r * std::cos(6.283185307179586 * u2);
  }

  /// In-place Fisher-Yates.
  template <typename T>
  void shuffle(std::span<T> items)
  {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(bounded(i));
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

  std::string serialize() const
  {
    std::ostringstream os;
    os << seed_ << ' ' << engine_;
    return os.str();
  }

  static RngState deserialize(const std::string& text)
  {
    std::istringstream is(text);
    RngState s;
    is >> s.seed_ >> s.engine_;
    if (!is) throw std::invalid_argument("malformed rng state");
    return s;
  }

  friend bool operator==(const RngState& a, const RngState& b)
  {
    return a.seed_ == b.seed_ && a.engine_ == b.engine_;
  }

private:
  std::uint64_t bounded(std::uint64_t n)
  {
    auto m = static_cast<unsigned __int128>(next_bits()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(next_bits()) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

struct CellStreamKey {
  std::uint64_t cell_id = 0;
  std::uint64_t step = 0;
  Substream substream = Substream::food;
};

/// Pure per-cell draw in [0, 1).
inline constexpr double cell_stream_draw(std::uint64_t seed, CellStreamKey key) noexcept
{
  std::uint64_t h = splitmix64(seed ^ 0x6A09E667F3BCC909ULL);
  h = splitmix64(h ^ key.cell_id);
  h = splitmix64(h ^ (key.step * 0x9E3779B97F4A7C15ULL));
  h = splitmix64(h ^ static_cast<std::uint64_t>(key.substream));
  return unit_real(h);
}

} // namespace stupid
