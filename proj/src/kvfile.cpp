#include "fhdr/kvfile.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "fhdr/checkpoint.hpp"
#include "fhdr/errors.hpp"

namespace fhdr {

std::string format_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_real(std::string_view text, const std::string& context) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw IoError(context + ": '" + std::string(text) + "' is not a real number");
  }
  return v;
}

std::uint64_t parse_uint(std::string_view text, const std::string& context) {
  std::uint64_t v = 0;
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw IoError(context + ": '" + std::string(text) + "' is not a non-negative integer");
  }
  return v;
}

bool parse_bool(std::string_view text, const std::string& context) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw IoError(context + ": '" + std::string(text) + "' is not a boolean");
}

KvFile KvFile::parse(std::string_view text, const std::string& origin) {
  KvFile kv;
  kv.origin_ = origin;
  std::istringstream in{std::string(text)};
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto b = line.find_first_not_of(" \t");
    if (b == std::string::npos || line[b] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw IoError(origin + ":" + std::to_string(lineno) + ": expected key=value");
    }
    auto trim = [](std::string s) {
      const auto first = s.find_first_not_of(" \t");
      const auto last = s.find_last_not_of(" \t");
      return first == std::string::npos ? std::string() : s.substr(first, last - first + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw IoError(origin + ":" + std::to_string(lineno) + ": empty key");
    if (kv.has(key)) throw IoError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    kv.entries_.emplace_back(key, trim(line.substr(eq + 1)));
  }
  return kv;
}

KvFile KvFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string() + ": cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

void KvFile::set(const std::string& key, std::string value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  entries_.emplace_back(key, std::move(value));
}

bool KvFile::has(const std::string& key) const { return find(key).has_value(); }

std::optional<std::string> KvFile::find(const std::string& key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  return std::nullopt;
}

const std::string& KvFile::get(const std::string& key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  throw IoError(origin_ + ": missing key '" + key + "'");
}

double KvFile::get_real(const std::string& key) const { return parse_real(get(key), origin_ + ": " + key); }
std::uint64_t KvFile::get_uint(const std::string& key) const { return parse_uint(get(key), origin_ + ": " + key); }
bool KvFile::get_bool(const std::string& key) const { return parse_bool(get(key), origin_ + ": " + key); }

std::string KvFile::str() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
  return out;
}

void KvFile::save(const std::filesystem::path& path) const { write_text_atomic(path, str()); }

}  // namespace fhdr
