#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stupid {

/// Invalid configuration or malformed config/habitat text. `line()` is 0 when
/// the problem is not tied to a source line.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line)
  {}
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

class GeometryError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Phase or step desynchronisation between partition workers.
class ProtocolError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
  IoError(const std::string& path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(path)
  {}
  const std::string& path() const noexcept { return path_; }

private:
  std::string path_;
};

/// A checkpoint image that fails its version, length or checksum checks.
class CorruptionError : public IoError {
public:
  using IoError::IoError;
};

} // namespace stupid
