#include "tws/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "tws/error.hpp"

namespace tws {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::istream& in) {
  KeyValueConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view = line;
    bool quoted = false;
    for (std::size_t i = 0; i < view.size(); ++i) {
      if (view[i] == '"') quoted = !quoted;
      if (view[i] == '#' && !quoted) {
        view = view.substr(0, i);
        break;
      }
    }
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::config, "config line " + std::to_string(lineno) + ": expected key = value");
    }
    std::string_view key = trim(view.substr(0, eq));
    std::string_view value = trim(view.substr(eq + 1));
    if (key.empty()) {
      throw Error(ErrorCode::config, "config line " + std::to_string(lineno) + ": empty key");
    }
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    cfg.entries_.emplace(std::string(key), std::string(value));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open config file " + path.string());
  return parse(in);
}

bool KeyValueConfig::contains(std::string_view key) const {
  return entries_.find(key) != entries_.end();
}

std::optional<std::string> KeyValueConfig::get(std::string_view key) const {
  // Last assignment wins for scalar keys.
  auto [lo, hi] = entries_.equal_range(key);
  if (lo == hi) return std::nullopt;
  return std::prev(hi)->second;
}

std::vector<std::string> KeyValueConfig::all(std::string_view key) const {
  std::vector<std::string> out;
  auto [lo, hi] = entries_.equal_range(key);
  for (auto it = lo; it != hi; ++it) out.push_back(it->second);
  return out;
}

std::string KeyValueConfig::get_or(std::string_view key, std::string fallback) const {
  auto v = get(key);
  return v ? *v : std::move(fallback);
}

double KeyValueConfig::get_double(std::string_view key, double fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc{} || ptr != v->data() + v->size()) {
    throw Error(ErrorCode::config, "config key " + std::string(key) + ": not a number: '" + *v + "'");
  }
  return out;
}

std::int64_t KeyValueConfig::get_int(std::string_view key, std::int64_t fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  std::int64_t out = 0;
  auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc{} || ptr != v->data() + v->size()) {
    throw Error(ErrorCode::config, "config key " + std::string(key) + ": not an integer: '" + *v + "'");
  }
  return out;
}

void KeyValueConfig::set(std::string key, std::string value) {
  entries_.erase(key);
  entries_.emplace(std::move(key), std::move(value));
}

TzTable tz_table_from_config(const KeyValueConfig& config) {
  const std::int64_t base = parse_utc_offset(config.get_or("tz.offset", "Z"));
  std::vector<std::pair<std::int64_t, std::int64_t>> transitions;
  for (const auto& entry : config.all("tz.transition")) {
    std::istringstream fields(entry);
    std::string instant, offset;
    if (!(fields >> instant >> offset)) {
      throw Error(ErrorCode::config, "tz.transition wants '<UTC instant> <offset>', got '" + entry + "'");
    }
    transitions.emplace_back(parse_utc_instant(instant), parse_utc_offset(offset));
  }
  return TzTable(base, std::move(transitions));
}

}  // namespace tws
