#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

// Key-value text configuration: one `key = value` per line, `#` comments.
// Command lines may override entries with repeated `--set key=value` flags.

namespace gmcop {

class Config {
 public:
  static Config from_file(const std::string& path);
  static Config from_string(const std::string& text);

  /// Applies "key=value" strings on top of the file contents.
  void apply_overrides(const std::vector<std::string>& overrides);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace gmcop
