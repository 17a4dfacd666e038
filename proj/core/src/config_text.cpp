#include "qkdnet/config_text.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "qkdnet/error.hpp"

namespace qkdnet {

namespace {

std::string at_line(int line) { return " (line " + std::to_string(line) + ")"; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

void add_tokens(ConfigSection& section, std::string_view rest, int line) {
  std::istringstream in{std::string(rest)};
  std::string token;
  while (in >> token) {
    auto eq = token.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw Error(Errc::ParseError, "expected key=value, got '" + token + "'" + at_line(line));
    }
    std::string key = token.substr(0, eq);
    std::string value = token.substr(eq + 1);
    if (!section.values.emplace(key, value).second) {
      throw Error(Errc::ParseError, "duplicate key '" + key + "' in [" + section.name + "]" + at_line(line));
    }
  }
}

}  // namespace

double parse_double(std::string_view token, std::string_view what) {
  std::string s(token);
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v)) {
    throw Error(Errc::ParseError, "invalid number '" + s + "' for " + std::string(what));
  }
  return v;
}

std::uint64_t parse_u64(std::string_view token, std::string_view what) {
  std::string s(token);
  errno = 0;
  char* end = nullptr;
  if (s.empty() || s.front() == '-') {
    throw Error(Errc::ParseError, "invalid unsigned integer '" + s + "' for " + std::string(what));
  }
  unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size() || errno == ERANGE) {
    throw Error(Errc::ParseError, "invalid unsigned integer '" + s + "' for " + std::string(what));
  }
  return static_cast<std::uint64_t>(v);
}

std::string format_double(double v) {
  char buf[64];
  for (int precision = 6; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

const std::string& ConfigSection::require(const std::string& key) const {
  auto it = values.find(key);
  if (it == values.end()) {
    throw Error(Errc::ParseError, "[" + name + "] missing required key '" + key + "'" + at_line(line));
  }
  return it->second;
}

std::optional<std::string> ConfigSection::get(const std::string& key) const {
  auto it = values.find(key);
  if (it == values.end()) return std::nullopt;
  return it->second;
}

double ConfigSection::require_double(const std::string& key) const {
  return parse_double(require(key), "[" + name + "] " + key + at_line(line));
}

double ConfigSection::get_double(const std::string& key, double fallback) const {
  auto v = get(key);
  return v ? parse_double(*v, "[" + name + "] " + key + at_line(line)) : fallback;
}

std::uint64_t ConfigSection::require_u64(const std::string& key) const {
  return parse_u64(require(key), "[" + name + "] " + key + at_line(line));
}

std::uint64_t ConfigSection::get_u64(const std::string& key, std::uint64_t fallback) const {
  auto v = get(key);
  return v ? parse_u64(*v, "[" + name + "] " + key + at_line(line)) : fallback;
}

bool ConfigSection::get_bool(const std::string& key, bool fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  if (*v == "1" || *v == "true" || *v == "yes") return true;
  if (*v == "0" || *v == "false" || *v == "no") return false;
  throw Error(Errc::ParseError, "[" + name + "] " + key + ": expected boolean, got '" + *v + "'" + at_line(line));
}

std::vector<ConfigSection> parse_config_text(std::string_view text) {
  std::vector<ConfigSection> sections;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;
    ++line_no;

    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      auto close = line.find(']');
      if (close == std::string_view::npos || close == 1) {
        throw Error(Errc::ParseError, "malformed section header" + at_line(line_no));
      }
      ConfigSection section;
      section.name = std::string(trim(line.substr(1, close - 1)));
      section.line = line_no;
      add_tokens(section, line.substr(close + 1), line_no);
      sections.push_back(std::move(section));
      continue;
    }
    if (sections.empty()) {
      throw Error(Errc::ParseError, "key=value outside of any [section]" + at_line(line_no));
    }
    add_tokens(sections.back(), line, line_no);
  }
  return sections;
}

}  // namespace qkdnet
