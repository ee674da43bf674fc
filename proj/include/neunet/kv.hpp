#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "neunet/volume.hpp"

namespace neunet {

/// Ordered plain-text `key=value` record. Blank lines and lines starting
/// with '#' are ignored when parsing.
class KeyValues {
 public:
  void set(const std::string& key, const std::string& value) { entries_[key] = value; }
  void set(const std::string& key, const char* value) { entries_[key] = value; }
  void set(const std::string& key, double value);
  void set(const std::string& key, long long value);
  void set(const std::string& key, int value) { set(key, static_cast<long long>(value)); }
  void set(const std::string& key, Index3 value);
  void set(const std::string& key, const Spacing3& value);

  bool contains(const std::string& key) const { return entries_.count(key) != 0; }
  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  long long get_int(const std::string& key) const;
  Index3 get_index3(const std::string& key) const;
  Spacing3 get_spacing(const std::string& key) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

  void write(std::ostream& os) const;
  /// Reads until EOF or a line equal to `terminator` (when non-empty).
  static KeyValues read(std::istream& is, const std::string& terminator = "");
  static KeyValues load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

 private:
  std::map<std::string, std::string> entries_;
};

/// Parses "a,b,c" (also accepts 'x' as separator); a single value is broadcast.
Index3 parse_index3(const std::string& text);
std::vector<double> parse_doubles(const std::string& text);

}  // namespace neunet
