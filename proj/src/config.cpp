#include "ctxforge/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "ctxforge/text.hpp"

namespace ctxforge {

namespace {

std::string strip_comment(std::string_view line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (c == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
    if (c == '#' && !in_string) return std::string(line.substr(0, i));
  }
  return std::string(line);
}

std::string unquote(std::string_view v, int line_no) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') {
    std::string out;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
      if (v[i] == '\\' && i + 2 < v.size()) {
        const char n = v[++i];
        switch (n) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          default:
            throw ConfigError("config line " + std::to_string(line_no) + ": unsupported escape \\" + n);
        }
      } else {
        out += v[i];
      }
    }
    return out;
  }
  if (v.size() >= 2 && v.front() == '\'' && v.back() == '\'') return std::string(v.substr(1, v.size() - 2));
  if (!v.empty() && (v.front() == '"' || v.front() == '\'')) {
    throw ConfigError("config line " + std::to_string(line_no) + ": unterminated string");
  }
  return std::string(v);
}

}  // namespace

Config Config::parse(std::string_view text) {
  Config cfg;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = text::trim_ascii(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("config line " + std::to_string(line_no) + ": bad section header");
      section = text::trim_ascii(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    std::string key = text::trim_ascii(std::string_view(line).substr(0, eq));
    const std::string value = text::trim_ascii(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    if (!section.empty()) key = section + "." + key;
    cfg.values_[key] = unquote(value, line_no);
  }
  return cfg;
}

Config Config::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::optional<std::string> Config::get(std::string_view key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string Config::get_string(std::string_view key, std::string_view fallback) const {
  auto v = get(key);
  return v ? *v : std::string(fallback);
}

long long Config::get_int(std::string_view key, long long fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  long long out = 0;
  auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc{} || ptr != v->data() + v->size()) {
    throw ConfigError("config key " + std::string(key) + ": expected an integer, got '" + *v + "'");
  }
  return out;
}

double Config::get_double(std::string_view key, double fallback) const {
  auto v = get_optional_double(key);
  return v ? *v : fallback;
}

std::optional<double> Config::get_optional_double(std::string_view key) const {
  auto v = get(key);
  if (!v) return std::nullopt;
  try {
    std::size_t used = 0;
    double out = std::stod(*v, &used);
    if (used != v->size()) throw std::invalid_argument("trailing");
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config key " + std::string(key) + ": expected a number, got '" + *v + "'");
  }
}

bool Config::get_bool(std::string_view key, bool fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw ConfigError("config key " + std::string(key) + ": expected true/false, got '" + *v + "'");
}

std::vector<long long> Config::get_int_list(std::string_view key, std::vector<long long> fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  std::string body = text::trim_ascii(*v);
  if (!body.empty() && body.front() == '[') {
    if (body.back() != ']') throw ConfigError("config key " + std::string(key) + ": unterminated list");
    body = body.substr(1, body.size() - 2);
  }
  std::vector<long long> out;
  std::istringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = text::trim_ascii(item);
    if (item.empty()) continue;
    long long x = 0;
    auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), x);
    if (ec != std::errc{} || ptr != item.data() + item.size()) {
      throw ConfigError("config key " + std::string(key) + ": bad list element '" + item + "'");
    }
    out.push_back(x);
  }
  return out;
}

}  // namespace ctxforge
