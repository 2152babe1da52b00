// Copyright 2026 The EquiSwarm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "equiswarm/config.hpp"

#include <algorithm>
#include <fstream>

#include <boost/property_tree/ini_parser.hpp>

namespace equiswarm {
namespace pt = boost::property_tree;

Config Config::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw ConfigError("config file not found: " + path.string());
  }
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path.string());
  Config cfg;
  try {
    pt::read_ini(in, cfg.tree_);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.message() + " (line " +
                      std::to_string(e.line()) + ")");
  }
  return cfg;
}

Config Config::parse(const std::string& text) {
  std::istringstream in(text);
  Config cfg;
  try {
    pt::read_ini(in, cfg.tree_);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("malformed config: " + e.message() + " (line " + std::to_string(e.line()) +
                      ")");
  }
  return cfg;
}

bool Config::has(const std::string& section, const std::string& key) const {
  return raw(section, key).has_value();
}

std::optional<std::string> Config::raw(const std::string& section, const std::string& key) const {
  auto sec = tree_.get_child_optional(pt::ptree::path_type(section, '\0'));
  if (!sec) return std::nullopt;
  auto v = sec->get_optional<std::string>(pt::ptree::path_type(key, '\0'));
  if (!v) return std::nullopt;
  return *v;
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
  auto sec = tree_.get_child_optional(pt::ptree::path_type(section, '\0'));
  if (!sec) {
    tree_.put_child(pt::ptree::path_type(section, '\0'), pt::ptree());
  }
  tree_.get_child(pt::ptree::path_type(section, '\0')).put(pt::ptree::path_type(key, '\0'), value);
}

void Config::apply_override(std::string_view assignment, const std::vector<ConfigKey>& known) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override must look like key=value: '" + std::string(assignment) + "'");
  }
  const std::string lhs(assignment.substr(0, eq));
  const std::string value(assignment.substr(eq + 1));
  const auto dot = lhs.find('.');
  if (dot != std::string::npos) {
    ConfigKey k{lhs.substr(0, dot), lhs.substr(dot + 1)};
    const bool ok = std::any_of(known.begin(), known.end(), [&](const ConfigKey& c) {
      return c.section == k.section && c.key == k.key;
    });
    if (!ok) throw ConfigError("unknown config field in override: " + lhs);
    set(k.section, k.key, value);
    return;
  }
  const ConfigKey* match = nullptr;
  for (const auto& c : known) {
    if (c.key != lhs) continue;
    if (match) {
      throw ConfigError("ambiguous override '" + lhs + "': present in [" + match->section +
                        "] and [" + c.section + "]; use section.key");
    }
    match = &c;
  }
  if (!match) throw ConfigError("unknown config field in override: " + lhs);
  set(match->section, match->key, value);
}

void Config::validate_keys(const std::vector<ConfigKey>& known) const {
  for (const auto& [k, v] : entries()) {
    const bool ok = std::any_of(known.begin(), known.end(), [&](const ConfigKey& c) {
      return c.section == k.section && c.key == k.key;
    });
    if (!ok) throw ConfigError("unknown config field [" + k.section + "] " + k.key);
  }
}

std::vector<std::pair<ConfigKey, std::string>> Config::entries() const {
  std::vector<std::pair<ConfigKey, std::string>> out;
  for (const auto& [section, child] : tree_) {
    for (const auto& [key, value] : child) {
      out.push_back({{section, key}, value.get_value<std::string>()});
    }
  }
  return out;
}

}  // namespace equiswarm
