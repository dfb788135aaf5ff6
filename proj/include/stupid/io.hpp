#pragma once

// File formats: stats and histogram CSVs, habitat input, checkpoints and PPM
// rasters. Every writer is byte-deterministic for a given input.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "config.hpp"
#include "engine.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "text.hpp"
#include "world.hpp"

namespace stupid {

namespace detail {

inline std::string read_file(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view bytes)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path, "cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(path, "write failed");
}

inline std::vector<std::string_view> split(std::string_view s, char sep)
{
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto next = s.find(sep, pos);
    out.push_back(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

inline std::vector<std::string_view> lines_of(std::string_view s)
{
  auto lines = split(s, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Stats CSV

inline constexpr std::string_view kStatsHeader = "step,bug_count,min_size,mean_size,max_size,predator_count,total_food";

inline std::string format_stats_row(const StatsRow& r)
{
  using text::format_int;
  using text::format_real;
  return format_int(r.step) + ',' + format_int(r.bug_count) + ',' + format_real(r.min_size) + ',' +
         format_real(r.mean_size) + ',' + format_real(r.max_size) + ',' + format_int(r.predator_count) + ',' +
         format_real(r.total_food);
}

inline std::string stats_csv(const std::vector<StatsRow>& rows)
{
  std::string out(kStatsHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += format_stats_row(r);
    out += '\n';
  }
  return out;
}

inline void write_stats(const std::string& path, const std::vector<StatsRow>& rows)
{
  detail::write_file(path, stats_csv(rows));
}

inline std::vector<StatsRow> parse_stats(std::string_view csv)
{
  const auto lines = detail::lines_of(csv);
  if (lines.empty() || lines[0] != kStatsHeader) throw ConfigError("stats CSV header mismatch", 1);
  std::vector<StatsRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = detail::split(lines[i], ',');
    auto bad = [&] { return ConfigError("malformed stats row", i + 1); };
    if (f.size() != 7) throw bad();
    auto u = [&](std::string_view v) {
      auto r = text::parse_int<std::uint64_t>(v);
      if (!r) throw bad();
      return *r;
    };
    auto d = [&](std::string_view v) {
      auto r = text::parse_real(v);
      if (!r) throw bad();
      return *r;
    };
    rows.push_back({u(f[0]), u(f[1]), d(f[2]), d(f[3]), d(f[4]), u(f[5]), d(f[6])});
  }
  return rows;
}

inline std::vector<StatsRow> read_stats(const std::string& path) { return parse_stats(detail::read_file(path)); }

/// Streams stats rows as they are produced.
class StatsWriter {
public:
  explicit StatsWriter(const std::string& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc)
  {
    if (!out_) throw IoError(path, "cannot open for writing");
    out_ << kStatsHeader << '\n';
  }
  void append(const StatsRow& r)
  {
    out_ << format_stats_row(r) << '\n';
    if (!out_) throw IoError(path_, "write failed");
  }
  void flush() { out_.flush(); }

private:
  std::string path_;
  std::ofstream out_;
};

// ---------------------------------------------------------------------------
// Histogram CSV

inline constexpr std::string_view kHistogramHeader = "step,bin_lo,bin_hi,count";

struct HistogramRow {
  std::uint64_t step = 0;
  double bin_lo = 0.0;
  double bin_hi = 0.0;
  std::uint64_t count = 0;
  friend bool operator==(const HistogramRow&, const HistogramRow&) = default;
};

inline std::string histogram_rows(std::uint64_t step, const std::vector<std::uint64_t>& counts, double bin_width)
{
  std::string out;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    out += text::format_int(step) + ',' + text::format_real(static_cast<double>(i) * bin_width) + ',' +
           text::format_real(static_cast<double>(i + 1) * bin_width) + ',' + text::format_int(counts[i]) + '\n';
  }
  return out;
}

/// Appends one step's bins. The header is written when the file is new or
/// `append` is false.
inline void write_histogram(const std::string& path, std::uint64_t step, const std::vector<std::uint64_t>& counts,
                            double bin_width = 1.0, bool append = false)
{
  bool fresh = !append;
  if (append) {
    std::ifstream probe(path, std::ios::binary | std::ios::ate);
    fresh = !probe || probe.tellg() == 0;
  }
  std::ofstream out(path, std::ios::binary | (fresh ? std::ios::trunc : std::ios::app));
  if (!out) throw IoError(path, "cannot open for writing");
  if (fresh) out << kHistogramHeader << '\n';
  out << histogram_rows(step, counts, bin_width);
  if (!out) throw IoError(path, "write failed");
}

inline std::vector<HistogramRow> parse_histogram(std::string_view csv)
{
  const auto lines = detail::lines_of(csv);
  if (lines.empty() || lines[0] != kHistogramHeader) throw ConfigError("histogram CSV header mismatch", 1);
  std::vector<HistogramRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = detail::split(lines[i], ',');
    const auto step = f.size() == 4 ? text::parse_int<std::uint64_t>(f[0]) : std::nullopt;
    const auto lo = f.size() == 4 ? text::parse_real(f[1]) : std::nullopt;
    const auto hi = f.size() == 4 ? text::parse_real(f[2]) : std::nullopt;
    const auto n = f.size() == 4 ? text::parse_int<std::uint64_t>(f[3]) : std::nullopt;
    if (!step || !lo || !hi || !n) throw ConfigError("malformed histogram row", i + 1);
    rows.push_back({*step, *lo, *hi, *n});
  }
  return rows;
}

class HistogramWriter {
public:
  HistogramWriter(const std::string& path, double bin_width, std::size_t bins)
      : path_(path), out_(path, std::ios::binary | std::ios::trunc), width_(bin_width), bins_(bins)
  {
    if (!out_) throw IoError(path, "cannot open for writing");
    out_ << kHistogramHeader << '\n';
  }
  void append(std::uint64_t step, std::span<const double> sizes)
  {
    out_ << histogram_rows(step, histogram(sizes, width_, bins_), width_);
    if (!out_) throw IoError(path_, "write failed");
  }

private:
  std::string path_;
  std::ofstream out_;
  double width_;
  std::size_t bins_;
};

// ---------------------------------------------------------------------------
// Habitat files
//
//   # comment
//   <width> <height>
//   <x> <y> <rate>     one line per listed cell; unlisted cells get rate 0

inline HabitatMap parse_habitat(std::string_view source)
{
  HabitatMap map;
  bool have_dims = false;
  std::vector<bool> seen;
  const auto lines = detail::split(source, '\n');
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    std::string_view line = lines[i];
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (line.empty()) continue;
    std::vector<std::string_view> f;
    for (auto tok : detail::split(line, ' '))
      if (!text::trim(tok).empty()) f.push_back(text::trim(tok));
    if (!have_dims) {
      const auto w = f.size() == 2 ? text::parse_int<int>(f[0]) : std::nullopt;
      const auto h = f.size() == 2 ? text::parse_int<int>(f[1]) : std::nullopt;
      if (!w || !h) throw ConfigError("expected '<width> <height>'", line_no);
      if (*w < 1 || *h < 1) throw ConfigError("habitat dimensions must be positive", line_no);
      map.width = *w;
      map.height = *h;
      map.rates.assign(static_cast<std::size_t>(*w) * static_cast<std::size_t>(*h), 0.0);
      seen.assign(map.rates.size(), false);
      have_dims = true;
      continue;
    }
    const auto x = f.size() == 3 ? text::parse_int<int>(f[0]) : std::nullopt;
    const auto y = f.size() == 3 ? text::parse_int<int>(f[1]) : std::nullopt;
    const auto r = f.size() == 3 ? text::parse_real(f[2]) : std::nullopt;
    if (!x || !y || !r) throw ConfigError("expected '<x> <y> <rate>'", line_no);
    if (*x < 0 || *x >= map.width || *y < 0 || *y >= map.height)
      throw ConfigError("cell (" + std::to_string(*x) + "," + std::to_string(*y) + ") outside " +
                            std::to_string(map.width) + "x" + std::to_string(map.height),
                        line_no);
    if (!(*r >= 0) || !std::isfinite(*r)) throw ConfigError("production rate must be finite and >= 0", line_no);
    const auto idx = static_cast<std::size_t>(*y) * static_cast<std::size_t>(map.width) + static_cast<std::size_t>(*x);
    if (seen[idx])
      map.warnings.push_back("line " + std::to_string(line_no) + ": duplicate cell (" + std::to_string(*x) + "," +
                             std::to_string(*y) + "), last value wins");
    seen[idx] = true;
    map.rates[idx] = *r;
  }
  if (!have_dims) throw ConfigError("habitat file has no '<width> <height>' line");
  return map;
}

inline HabitatMap read_habitat(const std::string& path)
{
  const std::string src = detail::read_file(path);
  try {
    return parse_habitat(src);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what(), e.line());
  }
}

// ---------------------------------------------------------------------------
// Checkpoints
//
// Line-oriented text. Reals are IEEE-754 bit patterns in hex. The last line
// carries the body length and a digest of the body bytes.

inline constexpr std::string_view kCheckpointMagic = "stupid-checkpoint";
inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline std::uint64_t bytes_digest(std::string_view bytes)
{
  std::uint64_t h = 0xCBF29CE484222325ULL; // FNV-1a
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v)
{
  char buf[17];
  for (int i = 15; i >= 0; --i) buf[15 - i] = "0123456789abcdef"[(v >> (4 * i)) & 0xF];
  return std::string(buf, 16);
}

} // namespace detail

template <typename L>
std::string checkpoint_text(const WorldState<L>& w)
{
  using text::format_int;
  using text::real_to_hex;
  std::ostringstream o;
  o << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  const std::string cfg = config_to_text(w.config);
  o << "config " << detail::lines_of(cfg).size() << '\n' << cfg;
  o << "step " << format_int(w.step) << '\n';
  o << "ids " << format_int(w.next_bug_id) << ' ' << format_int(w.id_stride) << '\n';
  o << "rng scheduler " << w.rng.scheduler.serialize() << '\n';
  o << "rng movement " << w.rng.movement.serialize() << '\n';
  o << "rng mortality " << w.rng.mortality.serialize() << '\n';
  o << "rng reproduction " << w.rng.reproduction.serialize() << '\n';
  o << "rng predators " << w.rng.predators.serialize() << '\n';
  const Diagnostics& d = w.diag;
  o << "diag " << d.retry_cap_hits << ' ' << d.ghost_cells_sent << ' ' << d.messages_sent << ' '
    << d.emigration_requests << ' ' << d.approvals << ' ' << d.denials << ' ' << d.kills << ' ' << d.births << ' '
    << d.deaths << ' ' << d.reproductions << '\n';
  const auto bugs = bugs_by_id(w);
  o << "bugs " << bugs.size() << '\n';
  for (BugHandle h : bugs) {
    const Bug& b = w.bugs[h];
    o << format_int(b.id) << ' ' << b.cell << ' ' << real_to_hex(b.size) << '\n';
  }
  const auto preds = predators_by_id(w);
  o << "predators " << preds.size() << '\n';
  for (Handle h : preds) o << format_int(w.predators[h].id) << ' ' << w.predators[h].cell << '\n';
  const CellId n = static_cast<CellId>(w.geometry.cell_count());
  o << "cells " << n << '\n';
  for (CellId c = 0; c < n; ++c) o << real_to_hex(w.cells.food(c)) << ' ' << real_to_hex(w.cells.rate(c)) << '\n';
  std::string body = o.str();
  body += "end " + std::to_string(body.size()) + ' ' + detail::hex64(detail::bytes_digest(body)) + '\n';
  return body;
}

template <typename L>
void checkpoint(const WorldState<L>& w, const std::string& path)
{
  detail::write_file(path, checkpoint_text(w));
}

inline void checkpoint(const AnyWorld& w, const std::string& path)
{
  std::visit([&](const auto& x) { checkpoint(x, path); }, w);
}

namespace detail {

class CheckpointReader {
public:
  CheckpointReader(std::string_view body, std::string path) : lines_(lines_of(body)), path_(std::move(path)) {}

  [[noreturn]] void fail(const std::string& what) const
  {
    throw CorruptionError(path_, "corrupt checkpoint at line " + std::to_string(pos_) + ": " + what);
  }

  std::string_view next()
  {
    if (pos_ >= lines_.size()) fail("unexpected end of image");
    return lines_[pos_++];
  }

  /// Splits the next line on spaces and checks its leading keyword.
  std::vector<std::string_view> record(std::string_view keyword, std::size_t fields)
  {
    auto f = split(next(), ' ');
    if (f.empty() || f[0] != keyword) fail("expected '" + std::string(keyword) + "'");
    if (fields && f.size() != fields) fail("wrong field count in '" + std::string(keyword) + "'");
    return f;
  }

  template <typename Int>
  Int integer(std::string_view v)
  {
    auto r = text::parse_int<Int>(v);
    if (!r) fail("bad integer '" + std::string(v) + "'");
    return *r;
  }

  double real(std::string_view v)
  {
    auto r = text::real_from_hex(v);
    if (!r) fail("bad real '" + std::string(v) + "'");
    return *r;
  }

private:
  std::vector<std::string_view> lines_;
  std::string path_;
  std::size_t pos_ = 0;
};

template <typename L>
WorldState<L> restore_into(CheckpointReader& rd, const ModelConfig& cfg)
{
  WorldState<L> w(cfg);
  w.config.layout = L::kind;
  w.step = rd.integer<std::uint64_t>(rd.record("step", 2)[1]);
  {
    auto f = rd.record("ids", 3);
    w.next_bug_id = rd.integer<std::uint64_t>(f[1]);
    w.id_stride = rd.integer<std::uint64_t>(f[2]);
  }
  for (RngState* s : {&w.rng.scheduler, &w.rng.movement, &w.rng.mortality, &w.rng.reproduction, &w.rng.predators}) {
    const std::string_view line = rd.next();
    const auto second_space = line.find(' ', 4);
    if (line.substr(0, 4) != "rng " || second_space == std::string_view::npos) rd.fail("expected rng state");
    try {
      *s = RngState::deserialize(std::string(line.substr(second_space + 1)));
    } catch (const std::invalid_argument&) {
      rd.fail("bad rng state");
    }
  }
  {
    auto f = rd.record("diag", 11);
    Diagnostics& d = w.diag;
    std::uint64_t* fields[] = {&d.retry_cap_hits, &d.ghost_cells_sent, &d.messages_sent, &d.emigration_requests,
                               &d.approvals,      &d.denials,          &d.kills,         &d.births,
                               &d.deaths,         &d.reproductions};
    for (std::size_t i = 0; i < 10; ++i) *fields[i] = rd.integer<std::uint64_t>(f[i + 1]);
  }
  const std::size_t cells = w.geometry.cell_count();
  const auto nbugs = rd.integer<std::size_t>(rd.record("bugs", 2)[1]);
  if (nbugs > cells) rd.fail("more bugs than cells");
  for (std::size_t i = 0; i < nbugs; ++i) {
    auto f = split(rd.next(), ' ');
    if (f.size() != 3) rd.fail("malformed bug record");
    Bug b{rd.integer<AgentId>(f[0]), rd.integer<CellId>(f[1]), rd.real(f[2])};
    if (b.cell >= cells) rd.fail("bug cell out of range");
    if (!w.is_free(b.cell)) rd.fail("two bugs share a cell");
    w.add_bug(b);
  }
  const auto npred = rd.integer<std::size_t>(rd.record("predators", 2)[1]);
  for (std::size_t i = 0; i < npred; ++i) {
    auto f = split(rd.next(), ' ');
    if (f.size() != 2) rd.fail("malformed predator record");
    Predator p{rd.integer<AgentId>(f[0]), rd.integer<CellId>(f[1])};
    if (p.cell >= cells) rd.fail("predator cell out of range");
    w.predators.insert(p);
  }
  if (rd.integer<std::size_t>(rd.record("cells", 2)[1]) != cells) rd.fail("cell count does not match grid");
  for (CellId c = 0; c < cells; ++c) {
    auto f = split(rd.next(), ' ');
    if (f.size() != 2) rd.fail("malformed cell record");
    w.cells.food(c) = rd.real(f[0]);
    w.cells.rate(c) = rd.real(f[1]);
  }
  return w;
}

} // namespace detail

/// Parses a checkpoint image. Throws CorruptionError on any version, length,
/// digest or structural mismatch; nothing partial is returned.
inline AnyWorld restore_text(std::string_view image, const std::string& path = "<checkpoint>")
{
  using detail::CheckpointReader;
  const auto end_pos = image.rfind("end ");
  if (end_pos == std::string_view::npos || (end_pos != 0 && image[end_pos - 1] != '\n'))
    throw CorruptionError(path, "corrupt checkpoint: missing trailer");
  const std::string_view body = image.substr(0, end_pos);
  const auto trailer = detail::split(text::trim(image.substr(end_pos)), ' ');
  if (trailer.size() != 3 || trailer[1] != std::to_string(body.size()) ||
      trailer[2] != detail::hex64(detail::bytes_digest(body)))
    throw CorruptionError(path, "corrupt checkpoint: length or digest mismatch");

  CheckpointReader rd(body, path);
  {
    auto f = rd.record(kCheckpointMagic, 2);
    if (f[1] != std::to_string(kCheckpointVersion))
      throw CorruptionError(path, "checkpoint version " + std::string(f[1]) + " is not supported (expected " +
                                      std::to_string(kCheckpointVersion) + ")");
  }
  const auto cfg_lines = rd.integer<std::size_t>(rd.record("config", 2)[1]);
  std::string cfg_text;
  for (std::size_t i = 0; i < cfg_lines; ++i) {
    cfg_text += rd.next();
    cfg_text += '\n';
  }
  ModelConfig cfg;
  try {
    cfg = parse_config(cfg_text);
    validate(cfg);
  } catch (const ConfigError& e) {
    rd.fail(std::string("embedded config: ") + e.what());
  } catch (const GeometryError& e) {
    rd.fail(std::string("embedded config: ") + e.what());
  }
  if (cfg.layout == Layout::field) return detail::restore_into<FieldLayout>(rd, cfg);
  return detail::restore_into<CellObjectLayout>(rd, cfg);
}

inline AnyWorld restore(const std::string& path) { return restore_text(detail::read_file(path), path); }

// ---------------------------------------------------------------------------
// PPM raster
//
// P6, one pixel per cell, row-major. Empty cell: green = food scaled by
// food_display_max. Bug: red = size scaled by 100. Predator: pure blue, drawn
// over whatever else is in the cell.

inline std::uint8_t scale_channel(double value, double full_scale)
{
  const double v = std::min(std::max(value / full_scale, 0.0), 1.0);
  return static_cast<std::uint8_t>(std::lround(255.0 * v));
}

inline constexpr double kRasterSizeScale = 100.0;

template <typename L>
std::string raster_ppm(const WorldState<L>& w)
{
  const GridGeometry& g = w.geometry;
  std::string out = "P6\n" + std::to_string(g.width()) + ' ' + std::to_string(g.height()) + "\n255\n";
  const std::size_t header = out.size();
  out.resize(header + 3 * g.cell_count(), '\0');
  auto px = [&](CellId c) { return &out[header + 3 * static_cast<std::size_t>(c)]; };
  const CellId n = static_cast<CellId>(g.cell_count());
  for (CellId c = 0; c < n; ++c) {
    const Handle h = w.cells.occupant(c);
    char* p = px(c);
    if (const Bug* b = (h.is_null() || is_marker(h)) ? nullptr : w.bugs.get(h)) {
      p[0] = static_cast<char>(scale_channel(b->size, kRasterSizeScale));
    } else {
      p[1] = static_cast<char>(scale_channel(w.cells.food(c), w.config.food_display_max));
    }
  }
  w.predators.for_each([&](Handle, const Predator& pr) {
    char* p = px(pr.cell);
    p[0] = 0;
    p[1] = 0;
    p[2] = static_cast<char>(255);
  });
  return out;
}

template <typename L>
void write_raster(const WorldState<L>& w, const std::string& path)
{
  detail::write_file(path, raster_ppm(w));
}

inline void write_raster(const AnyWorld& w, const std::string& path)
{
  std::visit([&](const auto& x) { write_raster(x, path); }, w);
}

} // namespace stupid
