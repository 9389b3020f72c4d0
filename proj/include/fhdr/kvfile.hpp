#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fhdr {

/// Shortest decimal form that parses back to the identical double.
std::string format_real(double v);
/// Parses a real; throws IoError mentioning `context` on failure.
double parse_real(std::string_view text, const std::string& context);
std::uint64_t parse_uint(std::string_view text, const std::string& context);
bool parse_bool(std::string_view text, const std::string& context);

/// Ordered `key=value` text file. Blank lines and lines starting with '#' are ignored.
class KvFile {
 public:
  KvFile() = default;
  static KvFile parse(std::string_view text, const std::string& origin);
  static KvFile load(const std::filesystem::path& path);

  void set(const std::string& key, std::string value);
  void set(const std::string& key, double value) { set(key, format_real(value)); }
  void set(const std::string& key, std::uint64_t value) { set(key, std::to_string(value)); }
  void set(const std::string& key, bool value) { set(key, std::string(value ? "true" : "false")); }
  void set(const std::string& key, const char* value) { set(key, std::string(value)); }

  bool has(const std::string& key) const;
  /// Throws IoError naming the origin when absent.
  const std::string& get(const std::string& key) const;
  std::optional<std::string> find(const std::string& key) const;
  double get_real(const std::string& key) const;
  std::uint64_t get_uint(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
  const std::string& origin() const { return origin_; }
  std::string str() const;
  void save(const std::filesystem::path& path) const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
  std::string origin_ = "<memory>";
};

}  // namespace fhdr
