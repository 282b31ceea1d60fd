#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

// Key-value config files: one `key = value` per line, `#` starts a comment,
// keys are case-sensitive and may not repeat. Values keep internal spaces;
// vector values are whitespace-separated numbers.
namespace mixmatch::config {

class Config {
 public:
  static Config parse(const std::string& text, std::filesystem::path origin = {});
  static Config load(const std::filesystem::path& path);

  bool has(const std::string& key) const;
  const std::string& str(const std::string& key) const;
  std::string str_or(const std::string& key, const std::string& fallback) const;
  double num(const std::string& key) const;
  double num_or(const std::string& key, double fallback) const;
  int64_t integer(const std::string& key) const;
  int64_t integer_or(const std::string& key, int64_t fallback) const;
  uint64_t uinteger(const std::string& key) const;
  uint64_t uinteger_or(const std::string& key, uint64_t fallback) const;
  std::vector<double> nums(const std::string& key) const;

  // Keys beginning with `prefix`, in file order.
  std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

  // Paths in configs resolve against the config file's directory.
  std::filesystem::path resolve(const std::string& relative) const;

  const std::filesystem::path& origin() const { return origin_; }

 private:
  std::map<std::string, std::string> kv_;
  std::vector<std::string> order_;
  std::filesystem::path origin_;
};

}  // namespace mixmatch::config
