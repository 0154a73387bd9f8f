#include "ehopt/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace ehopt {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

void parse_stream(std::istream& in, const std::string& origin,
                  std::map<std::string, std::map<std::string, std::string>>& out) {
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw config_error(origin + ":" + std::to_string(lineno) +
                           ": unterminated section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) {
        throw config_error(origin + ":" + std::to_string(lineno) + ": empty section name");
      }
      out[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw config_error(origin + ":" + std::to_string(lineno) +
                         ": expected 'key = value', got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw config_error(origin + ":" + std::to_string(lineno) + ": empty key");
    }
    if (section.empty()) {
      throw config_error(origin + ":" + std::to_string(lineno) +
                         ": key '" + key + "' outside any [section]");
    }
    out[section][key] = value;
  }
}

}  // namespace

ConfigFile ConfigFile::parse_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw config_error("cannot open config file: " + path);
  ConfigFile cf;
  cf.origin_ = path;
  parse_stream(f, path, cf.sections_);
  return cf;
}

ConfigFile ConfigFile::parse_string(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  ConfigFile cf;
  cf.origin_ = origin;
  parse_stream(in, origin, cf.sections_);
  return cf;
}

const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys = {
      "meta.id",
      "system.tau", "system.lambda_bar", "system.alpha_bar", "system.N_E",
      "system.N", "system.zeta", "system.alpha_th",
      "sim.policies", "sim.policy", "sim.horizon", "sim.warmup", "sim.seeds",
      "sim.base_seed", "sim.q0", "sim.e0", "sim.energy_scale",
      "sim.energy_max_multiple", "sim.epsilon_frac", "sim.a0", "sim.trace",
      "sim.q2_checkpoints", "sim.table", "sim.report_bits", "sim.packet_bits",
      "mdp.n_q", "mdp.n_e", "mdp.n_h", "mdp.n_p", "mdp.q_max",
      "mdp.arrival_bins", "mdp.energy_scale", "mdp.energy_max_multiple",
      "mdp.span_tol", "mdp.max_iter", "mdp.eval_span_tol", "mdp.eval_max_iter",
      "mdp.stationary_iters",
      "vcts.policy", "vcts.q0", "vcts.e0", "vcts.horizon", "vcts.dt",
      "vcts.e_off", "vcts.e_on", "vcts.p_on",
      "sweep.axis", "sweep.start", "sweep.stop", "sweep.points", "sweep.values",
      "sweep.policies", "sweep.seeds", "sweep.base_seed",
      "compare.alphas", "compare.lambda_rule", "compare.lambda_bar",
      "compare.policies", "compare.table",
      "regimes.water_grid", "regimes.q_max", "regimes.e_max", "regimes.points",
  };
  return keys;
}

void ConfigFile::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw config_error("override '" + assignment + "' is not of the form section.key=value");
  }
  const std::string path = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));
  const auto dot = path.find('.');
  if (dot == std::string::npos) {
    throw config_error("override key '" + path + "' must be section.key");
  }
  const std::string section = path.substr(0, dot);
  const std::string key = path.substr(dot + 1);

  const bool in_file = has(section, key);
  const auto& known = known_config_keys();
  const bool in_schema = std::find(known.begin(), known.end(), path) != known.end();
  if (!in_file && !in_schema) {
    throw config_error("override references unknown key '" + path + "'");
  }
  sections_[section][key] = value;
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
  const auto s = sections_.find(section);
  return s != sections_.end() && s->second.count(key) > 0;
}

std::string ConfigFile::raw(const std::string& section, const std::string& key) const {
  return sections_.at(section).at(key);
}

std::string ConfigFile::get_string(const std::string& section, const std::string& key,
                                   const std::string& fallback) const {
  return has(section, key) ? raw(section, key) : fallback;
}

double ConfigFile::get_double(const std::string& section, const std::string& key,
                              double fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = raw(section, key);
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0') {
    throw config_error(origin_ + ": [" + section + "] " + key +
                       ": expected a number, got '" + v + "'");
  }
  return d;
}

long ConfigFile::get_long(const std::string& section, const std::string& key,
                          long fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = raw(section, key);
  char* end = nullptr;
  const long l = std::strtol(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0') {
    throw config_error(origin_ + ": [" + section + "] " + key +
                       ": expected an integer, got '" + v + "'");
  }
  return l;
}

bool ConfigFile::get_bool(const std::string& section, const std::string& key,
                          bool fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = raw(section, key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw config_error(origin_ + ": [" + section + "] " + key +
                     ": expected a boolean, got '" + v + "'");
}

std::vector<std::string> ConfigFile::get_list(
    const std::string& section, const std::string& key,
    const std::vector<std::string>& fallback) const {
  if (!has(section, key)) return fallback;
  std::vector<std::string> out;
  std::stringstream ss(raw(section, key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string ConfigFile::require_string(const std::string& section,
                                       const std::string& key) const {
  if (!has(section, key)) {
    throw config_error(origin_ + ": missing required key [" + section + "] " + key);
  }
  return raw(section, key);
}

double ConfigFile::require_double(const std::string& section,
                                  const std::string& key) const {
  if (!has(section, key)) {
    throw config_error(origin_ + ": missing required key [" + section + "] " + key);
  }
  return get_double(section, key, 0.0);
}

std::string ConfigFile::id() const {
  if (has("meta", "id")) return raw("meta", "id");
  auto slash = origin_.find_last_of('/');
  std::string stem = slash == std::string::npos ? origin_ : origin_.substr(slash + 1);
  const auto dot = stem.find_last_of('.');
  if (dot != std::string::npos) stem.erase(dot);
  return stem.empty() ? "config" : stem;
}

}  // namespace ehopt
