#pragma once

// Model parameters, the v1..v16 feature ladder, and the flat `key = value`
// config format.

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "space.hpp"
#include "text.hpp"

namespace stupid {

enum class Scheduler { fixed, shuffled, sorted_desc_size };
enum class MovementRule { random_retry, best_food };
enum class Layout { cell_object, field };
enum class FoodMode { stochastic, habitat };

struct FeatureSet {
  bool growth = false;
  bool food = false;
  bool file_output = false;
  bool histogram_output = false;
  bool mortality_reproduction = false;
  bool predators = false;
  friend bool operator==(const FeatureSet&, const FeatureSet&) = default;
};

struct StopRule {
  enum class Kind { max_size_reached, fixed_steps };
  Kind kind = Kind::fixed_steps;
  double threshold = 100.0;
  std::uint64_t steps = 500;

  static StopRule max_size(double threshold = 100.0) { return {Kind::max_size_reached, threshold, 0}; }
  static StopRule fixed(std::uint64_t n) { return {Kind::fixed_steps, 100.0, n}; }
  friend bool operator==(const StopRule&, const StopRule&) = default;
};

struct ModelConfig {
  int width = 200;
  int height = 200;
  std::uint32_t initial_bug_count = 4000;
  double initial_bug_size = 1.0;
  double initial_bug_size_sd = 0.0; // > 0 selects a normal truncated at 0
  int move_radius = 4;
  double max_food_production = 0.01;
  double max_consumption = 1.0;
  double survival_probability = 0.95;
  double reproduce_threshold = 10.0;
  std::uint32_t offspring_count = 5;
  int offspring_place_radius = 3;
  std::uint32_t predator_count = 200;
  std::uint64_t seed = 1;
  Scheduler scheduler = Scheduler::shuffled;
  MovementRule movement_rule = MovementRule::best_food;
  FeatureSet features{true, true, true, true, false, false};
  StopRule stop = StopRule::fixed(500);
  Layout layout = Layout::cell_object;
  FoodMode food_mode = FoodMode::stochastic;
  std::string habitat_file;
  double food_display_max = 2.0;
  double histogram_bin_width = 1.0;
  std::uint32_t histogram_bins = 100;
  std::string preset = "v11";

  GridGeometry geometry() const { return GridGeometry(width, height); }
  int retry_cap() const { return 10 * (2 * move_radius + 1) * (2 * move_radius + 1); }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline constexpr int kPresetCount = 16;

/// Applies preset `version` (1..16) on top of `cfg`: features, movement rule,
/// scheduler, stop rule, food mode and initial size spread. Numeric rates and
/// grid size are left alone.
inline void apply_preset(ModelConfig& cfg, int version)
{
  if (version < 1 || version > kPresetCount) throw ConfigError("unknown preset v" + std::to_string(version));
  FeatureSet f;
  f.growth = version >= 2;
  f.food = version >= 3;
  f.histogram_output = version >= 6;
  f.file_output = version >= 8;
  f.mortality_reproduction = version >= 12;
  f.predators = version >= 16;
  cfg.features = f;
  cfg.movement_rule = version >= 11 ? MovementRule::best_food : MovementRule::random_retry;
  cfg.scheduler = version >= 10 ? Scheduler::shuffled
                  : version == 9 ? Scheduler::sorted_desc_size
                                 : Scheduler::fixed;
  if (version >= 16) cfg.stop = StopRule::fixed(1000);
  else if (version >= 10) cfg.stop = StopRule::fixed(500);
  else if (version >= 7) cfg.stop = StopRule::max_size(100.0);
  else cfg.stop = StopRule::fixed(500);
  cfg.food_mode = version >= 15 ? FoodMode::habitat : FoodMode::stochastic;
  cfg.initial_bug_size_sd = version >= 14 ? 0.3 : 0.0;
  cfg.preset = "v" + std::to_string(version);
}

inline ModelConfig preset_config(int version)
{
  ModelConfig cfg;
  apply_preset(cfg, version);
  return cfg;
}

inline int parse_preset_name(std::string_view name)
{
  name = text::trim(name);
  if (name.size() >= 2 && (name[0] == 'v' || name[0] == 'V')) {
    if (auto v = text::parse_int<int>(name.substr(1)); v && *v >= 1 && *v <= kPresetCount) return *v;
  }
  throw ConfigError("unknown preset '" + std::string(name) + "' (expected v1..v16)");
}

inline const char* to_string(Scheduler s)
{
  switch (s) {
  case Scheduler::fixed: return "fixed";
  case Scheduler::shuffled: return "shuffled";
  case Scheduler::sorted_desc_size: return "sorted_desc_size";
  }
  return "?";
}
inline const char* to_string(MovementRule m) { return m == MovementRule::best_food ? "best_food" : "random_retry"; }
inline const char* to_string(Layout l) { return l == Layout::field ? "field" : "cell_object"; }
inline const char* to_string(FoodMode m) { return m == FoodMode::habitat ? "habitat" : "stochastic"; }
inline std::string to_string(const StopRule& s)
{
  return s.kind == StopRule::Kind::fixed_steps ? "steps:" + text::format_int(s.steps)
                                               : "max_size:" + text::format_real(s.threshold);
}

/// Throws ConfigError on the first violated constraint.
inline void validate(const ModelConfig& c)
{
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (c.width < 1 || c.height < 1) fail("grid dimensions must be positive");
  const auto cells = static_cast<std::uint64_t>(c.width) * static_cast<std::uint64_t>(c.height);
  if (c.initial_bug_count > cells) fail("initial_bug_count exceeds cell count");
  if (c.features.predators && c.predator_count > cells) fail("predator_count exceeds cell count");
  if (c.move_radius < 0 || 2 * c.move_radius + 1 > std::min(c.width, c.height))
    fail("move_radius does not fit the grid");
  if (c.features.mortality_reproduction &&
      (c.offspring_place_radius < 0 || 2 * c.offspring_place_radius + 1 > std::min(c.width, c.height)))
    fail("offspring_place_radius does not fit the grid");
  if (c.features.predators && std::min(c.width, c.height) < 3) fail("predators need at least a 3x3 grid");
  if (!(c.initial_bug_size >= 0) || !(c.initial_bug_size_sd >= 0)) fail("initial bug size must be >= 0");
  if (!(c.max_food_production >= 0)) fail("max_food_production must be >= 0");
  if (!(c.max_consumption >= 0)) fail("max_consumption must be >= 0");
  if (!(c.survival_probability >= 0 && c.survival_probability <= 1)) fail("survival_probability must be in [0,1]");
  if (!(c.reproduce_threshold >= 0)) fail("reproduce_threshold must be >= 0");
  if (!(c.food_display_max > 0)) fail("food_display_max must be > 0");
  if (!(c.histogram_bin_width > 0)) fail("histogram_bin_width must be > 0");
  if (c.histogram_bins < 1) fail("histogram_bins must be >= 1");
  if (c.stop.kind == StopRule::Kind::max_size_reached && !(c.stop.threshold >= 0)) fail("stop threshold must be >= 0");
}

namespace detail {

inline bool parse_bool(std::string_view v, std::size_t line)
{
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError("expected boolean, got '" + std::string(v) + "'", line);
}

template <typename T>
T parse_number(std::string_view v, std::size_t line)
{
  std::optional<T> r;
  if constexpr (std::is_floating_point_v<T>) r = text::parse_real(v);
  else r = text::parse_int<T>(v);
  if (!r) throw ConfigError("malformed number '" + std::string(v) + "'", line);
  return *r;
}

inline StopRule parse_stop(std::string_view v, std::size_t line)
{
  const auto colon = v.find(':');
  if (colon != std::string_view::npos) {
    const auto kind = text::trim(v.substr(0, colon));
    const auto arg = v.substr(colon + 1);
    if (kind == "steps") return StopRule::fixed(parse_number<std::uint64_t>(arg, line));
    if (kind == "max_size") return StopRule::max_size(parse_number<double>(arg, line));
  }
  throw ConfigError("stop must be 'steps:N' or 'max_size:X', got '" + std::string(v) + "'", line);
}

} // namespace detail

/// Sets one key. Throws ConfigError (tagged with `line`) for unknown keys or
/// malformed values.
inline void set_config_value(ModelConfig& c, std::string_view key, std::string_view value, std::size_t line = 0)
{
  using namespace detail;
  value = text::trim(value);
  key = text::trim(key);
  auto bad = [&](const char* what) -> ConfigError {
    return ConfigError(std::string(what) + " '" + std::string(value) + "' for " + std::string(key), line);
  };
  if (key == "preset") apply_preset(c, parse_preset_name(value));
  else if (key == "width") c.width = parse_number<int>(value, line);
  else if (key == "height") c.height = parse_number<int>(value, line);
  else if (key == "initial_bug_count") c.initial_bug_count = parse_number<std::uint32_t>(value, line);
  else if (key == "initial_bug_size") c.initial_bug_size = parse_number<double>(value, line);
  else if (key == "initial_bug_size_sd") c.initial_bug_size_sd = parse_number<double>(value, line);
  else if (key == "move_radius") c.move_radius = parse_number<int>(value, line);
  else if (key == "max_food_production") c.max_food_production = parse_number<double>(value, line);
  else if (key == "max_consumption") c.max_consumption = parse_number<double>(value, line);
  else if (key == "survival_probability") c.survival_probability = parse_number<double>(value, line);
  else if (key == "reproduce_threshold") c.reproduce_threshold = parse_number<double>(value, line);
  else if (key == "offspring_count") c.offspring_count = parse_number<std::uint32_t>(value, line);
  else if (key == "offspring_place_radius") c.offspring_place_radius = parse_number<int>(value, line);
  else if (key == "predator_count") c.predator_count = parse_number<std::uint32_t>(value, line);
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(value, line);
  else if (key == "scheduler") {
    if (value == "fixed") c.scheduler = Scheduler::fixed;
    else if (value == "shuffled") c.scheduler = Scheduler::shuffled;
    else if (value == "sorted_desc_size") c.scheduler = Scheduler::sorted_desc_size;
    else throw bad("unknown scheduler");
  }
  else if (key == "movement_rule") {
    if (value == "random_retry") c.movement_rule = MovementRule::random_retry;
    else if (value == "best_food") c.movement_rule = MovementRule::best_food;
    else throw bad("unknown movement rule");
  }
  else if (key == "layout") {
    if (value == "cell_object" || value == "cell") c.layout = Layout::cell_object;
    else if (value == "field") c.layout = Layout::field;
    else throw bad("unknown layout");
  }
  else if (key == "food_mode") {
    if (value == "stochastic") c.food_mode = FoodMode::stochastic;
    else if (value == "habitat") c.food_mode = FoodMode::habitat;
    else throw bad("unknown food mode");
  }
  else if (key == "habitat_file") c.habitat_file = std::string(value);
  else if (key == "stop") c.stop = parse_stop(value, line);
  else if (key == "growth") c.features.growth = parse_bool(value, line);
  else if (key == "food") c.features.food = parse_bool(value, line);
  else if (key == "file_output") c.features.file_output = parse_bool(value, line);
  else if (key == "histogram_output") c.features.histogram_output = parse_bool(value, line);
  else if (key == "mortality_reproduction") c.features.mortality_reproduction = parse_bool(value, line);
  else if (key == "predators") c.features.predators = parse_bool(value, line);
  else if (key == "food_display_max") c.food_display_max = parse_number<double>(value, line);
  else if (key == "histogram_bin_width") c.histogram_bin_width = parse_number<double>(value, line);
  else if (key == "histogram_bins") c.histogram_bins = parse_number<std::uint32_t>(value, line);
  else throw ConfigError("unknown key '" + std::string(key) + "'", line);
}

/// Parses `key = value` text on top of `base`. A `preset` line is applied
/// before every other key regardless of where it appears.
inline ModelConfig parse_config(std::string_view source, ModelConfig base = {})
{
  struct Entry {
    std::string key, value;
    std::size_t line;
  };
  std::vector<Entry> entries;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= source.size()) {
    auto nl = source.find('\n', pos);
    if (nl == std::string_view::npos) nl = source.size();
    std::string_view line = source.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("expected 'key = value'", line_no);
    const auto key = text::trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("missing key", line_no);
    entries.push_back({std::string(key), std::string(text::trim(line.substr(eq + 1))), line_no});
  }
  for (const auto& e : entries)
    if (e.key == "preset") set_config_value(base, e.key, e.value, e.line);
  for (const auto& e : entries)
    if (e.key != "preset") set_config_value(base, e.key, e.value, e.line);
  return base;
}

inline ModelConfig load_config(const std::string& path, ModelConfig base = {})
{
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str(), std::move(base));
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what(), e.line());
  }
}

/// Every key with its resolved value, in a fixed order; parse_config of the
/// result reproduces `c`.
inline std::string config_to_text(const ModelConfig& c)
{
  using text::format_int;
  using text::format_real;
  std::ostringstream o;
  auto b = [](bool v) { return v ? "true" : "false"; };
  o << "preset = " << c.preset << '\n'
    << "width = " << c.width << '\n'
    << "height = " << c.height << '\n'
    << "initial_bug_count = " << c.initial_bug_count << '\n'
    << "initial_bug_size = " << format_real(c.initial_bug_size) << '\n'
    << "initial_bug_size_sd = " << format_real(c.initial_bug_size_sd) << '\n'
    << "move_radius = " << c.move_radius << '\n'
    << "max_food_production = " << format_real(c.max_food_production) << '\n'
    << "max_consumption = " << format_real(c.max_consumption) << '\n'
    << "survival_probability = " << format_real(c.survival_probability) << '\n'
    << "reproduce_threshold = " << format_real(c.reproduce_threshold) << '\n'
    << "offspring_count = " << c.offspring_count << '\n'
    << "offspring_place_radius = " << c.offspring_place_radius << '\n'
    << "predator_count = " << c.predator_count << '\n'
    << "seed = " << format_int(c.seed) << '\n'
    << "scheduler = " << to_string(c.scheduler) << '\n'
    << "movement_rule = " << to_string(c.movement_rule) << '\n'
    << "growth = " << b(c.features.growth) << '\n'
    << "food = " << b(c.features.food) << '\n'
    << "file_output = " << b(c.features.file_output) << '\n'
    << "histogram_output = " << b(c.features.histogram_output) << '\n'
    << "mortality_reproduction = " << b(c.features.mortality_reproduction) << '\n'
    << "predators = " << b(c.features.predators) << '\n'
    << "stop = " << to_string(c.stop) << '\n'
    << "layout = " << to_string(c.layout) << '\n'
    << "food_mode = " << to_string(c.food_mode) << '\n';
  if (!c.habitat_file.empty()) o << "habitat_file = " << c.habitat_file << '\n';
  o << "food_display_max = " << format_real(c.food_display_max) << '\n'
    << "histogram_bin_width = " << format_real(c.histogram_bin_width) << '\n'
    << "histogram_bins = " << c.histogram_bins << '\n';
  return o.str();
}

} // namespace stupid
