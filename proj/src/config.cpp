#include "rpn/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace rpn {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view s) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t comma = s.find(',', start);
    if (comma == std::string_view::npos) {
      parts.push_back(trim(s.substr(start)));
      break;
    }
    parts.push_back(trim(s.substr(start, comma - start)));
    start = comma + 1;
  }
  return parts;
}

}  // namespace

KeyValueConfig KeyValueConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  try {
    return from_lines(lines);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

KeyValueConfig KeyValueConfig::from_lines(const std::vector<std::string>& lines) {
  KeyValueConfig config;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view view = lines[i];
    if (std::size_t hash = view.find('#'); hash != std::string_view::npos)
      view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    std::size_t eq = view.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(i + 1) + ": expected key=value, got '" +
                        std::string(view) + "'");
    std::string key(trim(view.substr(0, eq)));
    std::string value(trim(view.substr(eq + 1)));
    if (key.empty())
      throw ConfigError("line " + std::to_string(i + 1) + ": empty key");
    config.set(std::move(key), std::move(value));
  }
  return config;
}

void KeyValueConfig::set_assignment(std::string_view assignment) {
  std::size_t eq = assignment.find('=');
  if (eq == std::string_view::npos)
    throw ConfigError("override must be key=value, got '" + std::string(assignment) + "'");
  std::string key(trim(assignment.substr(0, eq)));
  std::string value(trim(assignment.substr(eq + 1)));
  if (key.empty()) throw ConfigError("override has empty key: '" + std::string(assignment) + "'");
  set(std::move(key), std::move(value));
}

void KeyValueConfig::set(std::string key, std::string value) {
  entries_[std::move(key)] = std::move(value);
}

bool KeyValueConfig::has(const std::string& key) const {
  return entries_.count(key) != 0;
}

const std::string* KeyValueConfig::find(const std::string& key) const {
  consumed_.insert(key);
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

std::string KeyValueConfig::get_string(const std::string& key, std::string default_value) const {
  const std::string* value = find(key);
  return value ? *value : std::move(default_value);
}

std::string KeyValueConfig::require_string(const std::string& key) const {
  const std::string* value = find(key);
  if (!value) throw ConfigError("missing required key '" + key + "'");
  return *value;
}

std::int64_t KeyValueConfig::get_int(const std::string& key, std::int64_t default_value) const {
  const std::string* value = find(key);
  return value ? parse_int(*value, key) : default_value;
}

std::uint64_t KeyValueConfig::require_u64(const std::string& key) const {
  const std::string* value = find(key);
  if (!value) throw ConfigError("missing required key '" + key + "'");
  std::string_view text = trim(*value);
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw ConfigError(key + ": expected unsigned integer, got '" + *value + "'");
  return out;
}

double KeyValueConfig::get_double(const std::string& key, double default_value) const {
  const std::string* value = find(key);
  return value ? parse_double(*value, key) : default_value;
}

bool KeyValueConfig::get_bool(const std::string& key, bool default_value) const {
  const std::string* value = find(key);
  return value ? parse_bool(*value, key) : default_value;
}

std::vector<double> KeyValueConfig::get_double_list(const std::string& key,
                                                    std::vector<double> default_value) const {
  const std::string* value = find(key);
  if (!value) return default_value;
  std::vector<double> out;
  for (std::string_view part : split_commas(*value)) out.push_back(parse_double(part, key));
  return out;
}

std::vector<std::int64_t> KeyValueConfig::get_int_list(
    const std::string& key, std::vector<std::int64_t> default_value) const {
  const std::string* value = find(key);
  if (!value) return default_value;
  std::vector<std::int64_t> out;
  for (std::string_view part : split_commas(*value)) out.push_back(parse_int(part, key));
  return out;
}

void KeyValueConfig::reject_unknown_keys() const {
  std::vector<std::string> unknown;
  for (const auto& [key, value] : entries_)
    if (consumed_.count(key) == 0) unknown.push_back(key);
  if (unknown.empty()) return;
  std::ostringstream msg;
  msg << "unknown config key" << (unknown.size() > 1 ? "s" : "") << ":";
  for (const std::string& key : unknown) msg << " '" << key << "'";
  throw ConfigError(msg.str());
}

std::vector<std::string> KeyValueConfig::render() const {
  std::vector<std::string> lines;
  lines.reserve(entries_.size());
  for (const auto& [key, value] : entries_) lines.push_back(key + "=" + value);
  return lines;
}

std::string format_double(double value) {
  char buffer[64];
  auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  if (ec != std::errc{}) throw NumericError("double formatting failed");
  return std::string(buffer, ptr);
}

double parse_double(std::string_view text, const std::string& context) {
  text = trim(text);
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw ConfigError(context + ": expected number, got '" + std::string(text) + "'");
  return out;
}

std::int64_t parse_int(std::string_view text, const std::string& context) {
  text = trim(text);
  std::int64_t out = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw ConfigError(context + ": expected integer, got '" + std::string(text) + "'");
  return out;
}

bool parse_bool(std::string_view text, const std::string& context) {
  text = trim(text);
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError(context + ": expected boolean, got '" + std::string(text) + "'");
}

}  // namespace rpn
