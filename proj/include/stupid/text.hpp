#pragma once

// Locale-independent number formatting shared by the text formats.

#include <bit>
#include <charconv>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>

namespace stupid::text {

/// Shortest decimal that parses back to the same double.
inline std::string format_real(double v)
{
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

template <typename Int>
std::string format_int(Int v)
{
  char buf[24];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

inline std::string_view trim(std::string_view s)
{
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::optional<double> parse_real(std::string_view s)
{
  s = trim(s);
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

template <typename Int>
std::optional<Int> parse_int(std::string_view s)
{
  s = trim(s);
  Int v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

/// IEEE-754 bit pattern as 16 lowercase hex digits.
inline std::string real_to_hex(double v)
{
  char buf[17];
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 15; i >= 0; --i) buf[15 - i] = "0123456789abcdef"[(bits >> (4 * i)) & 0xF];
  buf[16] = '\0';
  return std::string(buf, 16);
}

inline std::optional<double> real_from_hex(std::string_view s)
{
  if (s.size() != 16) return std::nullopt;
  std::uint64_t bits = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), bits, 16);
  if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
  return std::bit_cast<double>(bits);
}

} // namespace stupid::text
