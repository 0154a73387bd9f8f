#ifndef EHOPT_CONFIG_HPP
#define EHOPT_CONFIG_HPP

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace ehopt {

// Configuration problems carry the file position (or the offending override)
// so the CLI can print line/field diagnostics and exit with the config code.
class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// Flat key/value text with [section] headers, '#' comments, and
// "key = value" lines. Values keep their raw text; typed access converts on
// demand and reports the section/key on failure.
class ConfigFile {
 public:
  static ConfigFile parse_file(const std::string& path);
  static ConfigFile parse_string(const std::string& text, const std::string& origin);

  // "section.key=value"; the key must already exist in the file or in the
  // registry of known keys, so a typo never silently reverts to a default.
  void apply_override(const std::string& assignment);

  bool has(const std::string& section, const std::string& key) const;
  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key,
                    double fallback) const;
  long get_long(const std::string& section, const std::string& key,
                long fallback) const;
  bool get_bool(const std::string& section, const std::string& key,
                bool fallback) const;
  // comma-separated list
  std::vector<std::string> get_list(const std::string& section, const std::string& key,
                                    const std::vector<std::string>& fallback) const;

  // required-value variants: throw config_error when the key is absent
  std::string require_string(const std::string& section, const std::string& key) const;
  double require_double(const std::string& section, const std::string& key) const;

  const std::string& origin() const { return origin_; }
  std::string id() const;  // [meta] id, else the file stem

 private:
  std::string raw(const std::string& section, const std::string& key) const;

  std::map<std::string, std::map<std::string, std::string>> sections_;
  std::string origin_;
};

// section.key names accepted by apply_override for keys not present in the
// parsed file. Shared with the CLI's documentation output.
const std::vector<std::string>& known_config_keys();

}  // namespace ehopt

#endif  // EHOPT_CONFIG_HPP
