#include "core/config.hpp"

#include <charconv>
#include <sstream>
#include <stdexcept>

#include "core/textio.hpp"

namespace mixmatch::config {
namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void fail(const std::filesystem::path& origin, const std::string& what) {
  const std::string where = origin.empty() ? "config" : origin.string();
  throw std::invalid_argument(where + ": " + what);
}

}  // namespace

Config Config::parse(const std::string& text, std::filesystem::path origin) {
  Config c;
  c.origin_ = std::move(origin);
  std::istringstream in(text);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(c.origin_, "line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      fail(c.origin_, "line " + std::to_string(lineno) + ": empty key");
    if (c.kv_.count(key))
      fail(c.origin_, "duplicate key '" + key + "'");
    c.kv_[key] = value;
    c.order_.push_back(key);
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  return parse(textio::read_file(path), path);
}

bool Config::has(const std::string& key) const { return kv_.count(key) != 0; }

const std::string& Config::str(const std::string& key) const {
  const auto it = kv_.find(key);
  if (it == kv_.end()) fail(origin_, "missing key '" + key + "'");
  return it->second;
}

std::string Config::str_or(const std::string& key, const std::string& fallback) const {
  const auto it = kv_.find(key);
  return it == kv_.end() ? fallback : it->second;
}

double Config::num(const std::string& key) const {
  const std::string& v = str(key);
  double out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
    fail(origin_, "key '" + key + "': not a number: '" + v + "'");
  return out;
}

double Config::num_or(const std::string& key, double fallback) const {
  return has(key) ? num(key) : fallback;
}

int64_t Config::integer(const std::string& key) const {
  const std::string& v = str(key);
  int64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
    fail(origin_, "key '" + key + "': not an integer: '" + v + "'");
  return out;
}

int64_t Config::integer_or(const std::string& key, int64_t fallback) const {
  return has(key) ? integer(key) : fallback;
}

uint64_t Config::uinteger(const std::string& key) const {
  const std::string& v = str(key);
  uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
    fail(origin_, "key '" + key + "': not a nonnegative integer: '" + v + "'");
  return out;
}

uint64_t Config::uinteger_or(const std::string& key, uint64_t fallback) const {
  return has(key) ? uinteger(key) : fallback;
}

std::vector<double> Config::nums(const std::string& key) const {
  std::istringstream in(str(key));
  std::vector<double> out;
  std::string tok;
  while (in >> tok) {
    double v = 0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
      fail(origin_, "key '" + key + "': not a number: '" + tok + "'");
    out.push_back(v);
  }
  if (out.empty()) fail(origin_, "key '" + key + "': empty number list");
  return out;
}

std::vector<std::string> Config::keys_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const auto& k : order_)
    if (k.rfind(prefix, 0) == 0) out.push_back(k);
  return out;
}

std::filesystem::path Config::resolve(const std::string& relative) const {
  std::filesystem::path p(relative);
  if (p.is_absolute() || origin_.empty()) return p;
  return origin_.parent_path() / p;
}

}  // namespace mixmatch::config
