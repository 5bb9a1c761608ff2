#include "mxtts/kvfile.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace mxtts {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

KeyValueFile KeyValueFile::parse(const std::string& text, const std::string& origin) {
  KeyValueFile out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected `key = value`");
    Entry e{trim(stripped.substr(0, eq)), trim(stripped.substr(eq + 1)), lineno};
    if (e.key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    out.entries.push_back(std::move(e));
  }
  return out;
}

KeyValueFile KeyValueFile::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse(ss.str(), path.string());
}

std::optional<std::string> KeyValueFile::get(const std::string& key) const {
  std::optional<std::string> v;
  for (const auto& e : entries)
    if (e.key == key) v = e.value;
  return v;
}

std::string KeyValueFile::render() const {
  std::ostringstream ss;
  for (const auto& e : entries) ss << e.key << " = " << e.value << '\n';
  return ss.str();
}

void write_key_values(const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, std::string>>& kv) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path.string());
  for (const auto& [k, v] : kv) f << k << " = " << v << '\n';
}

bool parse_bool(const std::string& s, const std::string& key) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("key `" + key + "`: expected a boolean, got `" + s + "`");
}

long long parse_int(const std::string& s, const std::string& key) {
  long long v = 0;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || p != end)
    throw ConfigError("key `" + key + "`: expected an integer, got `" + s + "`");
  return v;
}

double parse_double(const std::string& s, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key `" + key + "`: expected a number, got `" + s + "`");
  }
}

}  // namespace mxtts
