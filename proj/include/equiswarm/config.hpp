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

#pragma once
// Flat INI-style configuration: `[section]` headers followed by `key = value`
// lines. Values are parsed on access by the requesting module.

#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <boost/property_tree/ptree.hpp>

#include "equiswarm/errors.hpp"

namespace equiswarm {

struct ConfigKey {
  std::string section;
  std::string key;
};

class Config {
 public:
  Config() = default;

  // Throws ConfigError naming the path when the file is missing or malformed.
  static Config load(const std::filesystem::path& path);
  static Config parse(const std::string& text);

  bool has(const std::string& section, const std::string& key) const;
  std::optional<std::string> raw(const std::string& section, const std::string& key) const;
  void set(const std::string& section, const std::string& key, const std::string& value);

  template <typename T>
  T get(const std::string& section, const std::string& key, T fallback) const {
    const auto text = raw(section, key);
    if (!text) return fallback;
    return convert<T>(section, key, *text);
  }

  // Applies `section.key=value` or `key=value`. A bare key must match exactly
  // one entry of `known`.
  void apply_override(std::string_view assignment, const std::vector<ConfigKey>& known);
  // Throws ConfigError for the first entry that is not in `known`.
  void validate_keys(const std::vector<ConfigKey>& known) const;

  std::vector<std::pair<ConfigKey, std::string>> entries() const;

 private:
  template <typename T>
  static T convert(const std::string& section, const std::string& key, const std::string& text) {
    if constexpr (std::is_same_v<T, std::string>) {
      return text;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
      if (text == "false" || text == "0" || text == "no" || text == "off") return false;
      throw ConfigError("[" + section + "] " + key + ": expected a boolean, got '" + text + "'");
    } else {
      std::istringstream in(text);
      T v{};
      in >> v;
      if (in.fail() || !(in >> std::ws).eof()) {
        throw ConfigError("[" + section + "] " + key + ": cannot parse '" + text + "'");
      }
      return v;
    }
  }

  boost::property_tree::ptree tree_;
};

}  // namespace equiswarm
