#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mxtts {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Ordered `key = value` entries. Blank lines and `#` comments are skipped.
struct KeyValueFile {
  struct Entry {
    std::string key;
    std::string value;
    int line = 0;
  };
  std::vector<Entry> entries;

  static KeyValueFile parse(const std::string& text, const std::string& origin = "<string>");
  static KeyValueFile load(const std::filesystem::path& path);

  std::optional<std::string> get(const std::string& key) const;
  std::string render() const;
};

void write_key_values(const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, std::string>>& kv);

std::string trim(const std::string& s);
bool parse_bool(const std::string& s, const std::string& key);
long long parse_int(const std::string& s, const std::string& key);
double parse_double(const std::string& s, const std::string& key);

}  // namespace mxtts
