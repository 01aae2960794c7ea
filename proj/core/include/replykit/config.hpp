#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace replykit {

// Flat key=value tree with dotted keys ("train.lr = 0.001"). Lines starting
// with '#' are comments. Later assignments win. Schema in docs/formats.md.
class Config {
 public:
  static Config parse_string(const std::string& text);
  static Config parse_file(const std::string& path);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  // Comma-separated list value.
  std::vector<std::string> get_list(const std::string& key) const;

  // Entries under "<prefix>.", keyed by the remainder.
  std::map<std::string, std::string> with_prefix(const std::string& prefix) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace replykit
