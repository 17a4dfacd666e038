#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qkdnet {

// One `[name] key=value ...` block of the line-oriented config grammar shared
// by topology and scenario files. Keys may continue on following lines until
// the next section header; `#` starts a comment.
struct ConfigSection {
  std::string name;
  int line = 0;
  std::map<std::string, std::string> values;

  const std::string& require(const std::string& key) const;
  std::optional<std::string> get(const std::string& key) const;
  double require_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  std::uint64_t require_u64(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
};

// Throws Errc::ParseError with a line number on malformed input.
std::vector<ConfigSection> parse_config_text(std::string_view text);

double parse_double(std::string_view token, std::string_view what);
std::uint64_t parse_u64(std::string_view token, std::string_view what);

// Shortest decimal form that reads back to the identical double.
std::string format_double(double v);

}  // namespace qkdnet
