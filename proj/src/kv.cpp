#include "neunet/kv.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace neunet {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    if (ch == ',' || ch == 'x' || ch == ' ') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

void KeyValues::set(const std::string& key, double value) {
  std::ostringstream os;
  os << std::setprecision(17) << value;
  entries_[key] = os.str();
}

void KeyValues::set(const std::string& key, long long value) { entries_[key] = std::to_string(value); }

void KeyValues::set(const std::string& key, Index3 value) {
  entries_[key] = std::to_string(value[0]) + "," + std::to_string(value[1]) + "," + std::to_string(value[2]);
}

void KeyValues::set(const std::string& key, const Spacing3& value) {
  std::ostringstream os;
  os << std::setprecision(17) << value[0] << "," << value[1] << "," << value[2];
  entries_[key] = os.str();
}

const std::string& KeyValues::get(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("missing key '" + key + "'");
  return it->second;
}

std::string KeyValues::get_or(const std::string& key, const std::string& fallback) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second;
}

double KeyValues::get_double(const std::string& key) const {
  try {
    return std::stod(get(key));
  } catch (const std::logic_error&) {
    throw ConfigError("key '" + key + "' is not a number: " + get(key));
  }
}

long long KeyValues::get_int(const std::string& key) const {
  try {
    return std::stoll(get(key));
  } catch (const std::logic_error&) {
    throw ConfigError("key '" + key + "' is not an integer: " + get(key));
  }
}

Index3 KeyValues::get_index3(const std::string& key) const { return parse_index3(get(key)); }

Spacing3 KeyValues::get_spacing(const std::string& key) const {
  const auto v = parse_doubles(get(key));
  if (v.size() != 3) throw ConfigError("key '" + key + "' needs three values");
  return {v[0], v[1], v[2]};
}

void KeyValues::write(std::ostream& os) const {
  for (const auto& [k, v] : entries_) os << k << "=" << v << "\n";
}

KeyValues KeyValues::read(std::istream& is, const std::string& terminator) {
  KeyValues kv;
  std::string line;
  while (std::getline(is, line)) {
    const auto t = trim(line);
    if (!terminator.empty() && t == terminator) return kv;
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("malformed key-value line: " + t);
    kv.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  if (!terminator.empty()) throw IoError("key-value header missing terminator '" + terminator + "'");
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  return read(is);
}

void KeyValues::save(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  write(os);
}

Index3 parse_index3(const std::string& text) {
  const auto parts = split_list(text);
  try {
    if (parts.size() == 1) {
      const Index v = std::stoll(parts[0]);
      return {v, v, v};
    }
    if (parts.size() == 3) return {std::stoll(parts[0]), std::stoll(parts[1]), std::stoll(parts[2])};
  } catch (const std::logic_error&) {
  }
  throw ArgumentError("expected one or three integers, got '" + text + "'");
}

std::vector<double> parse_doubles(const std::string& text) {
  std::vector<double> out;
  try {
    for (const auto& p : split_list(text)) out.push_back(std::stod(p));
  } catch (const std::logic_error&) {
    throw ArgumentError("expected numbers, got '" + text + "'");
  }
  return out;
}

}  // namespace neunet
