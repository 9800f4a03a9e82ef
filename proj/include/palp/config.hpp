// Copyright 2026 The PALP Authors
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

#ifndef PALP_CONFIG_HPP_
#define PALP_CONFIG_HPP_

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "palp/error.hpp"
#include "palp/io.hpp"
#include "palp/strings.hpp"

namespace palp
{

/// Flat key-value configuration with sections:
///
///     [section]
///     key = value
///     other = "value with edge spaces\n"
///
/// Values may be double-quoted to keep leading/trailing whitespace, and
/// backslash escapes are decoded in every value. Lines starting with ';'
/// or '#' are comments.
class Config
{
public:
  using Section = std::map<std::string, std::string>;

  static Config parse(const std::string & text, const std::string & origin = "<config>")
  {
    // ptree's ini reader only understands ';' comments.
    std::string cleaned;
    std::istringstream lines(text);
    for (std::string line; std::getline(lines, line);) {
      const auto t = trim(line);
      if (!t.empty() && t[0] == '#') {
        continue;
      }
      cleaned += line;
      cleaned += '\n';
    }
    boost::property_tree::ptree tree;
    try {
      std::istringstream in(cleaned);
      boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error & e) {
      throw user_error(origin + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
    }
    Config cfg;
    for (const auto & [name, child] : tree) {
      if (child.empty() && !child.data().empty()) {
        throw user_error(origin + ": key '" + name + "' outside of any section");
      }
      auto & sec = cfg.sections_[name];
      for (const auto & [key, value] : child) {
        sec[key] = decode(value.data());
      }
    }
    return cfg;
  }

  static Config load(const fs::path & path) { return parse(read_file(path), path.string()); }

  bool has(const std::string & section, const std::string & key) const
  {
    const auto s = sections_.find(section);
    return s != sections_.end() && s->second.count(key) > 0;
  }

  std::optional<std::string> find(const std::string & section, const std::string & key) const
  {
    const auto s = sections_.find(section);
    if (s == sections_.end()) {
      return std::nullopt;
    }
    const auto k = s->second.find(key);
    if (k == s->second.end()) {
      return std::nullopt;
    }
    return k->second;
  }

  std::string get(const std::string & section, const std::string & key, const std::string & def) const
  {
    return find(section, key).value_or(def);
  }

  std::string require(const std::string & section, const std::string & key) const
  {
    auto v = find(section, key);
    if (!v) {
      throw user_error("config: missing required key " + section + "." + key);
    }
    return *v;
  }

  double get_double(const std::string & section, const std::string & key, double def) const
  {
    const auto v = find(section, key);
    return v ? to_double(section + "." + key, *v) : def;
  }

  std::int64_t get_int(const std::string & section, const std::string & key, std::int64_t def) const
  {
    const auto v = find(section, key);
    return v ? to_int(section + "." + key, *v) : def;
  }

  bool get_bool(const std::string & section, const std::string & key, bool def) const
  {
    const auto v = find(section, key);
    if (!v) {
      return def;
    }
    if (*v == "true" || *v == "1" || *v == "yes") {
      return true;
    }
    if (*v == "false" || *v == "0" || *v == "no") {
      return false;
    }
    throw user_error("config: " + section + "." + key + " is not a boolean: '" + *v + "'");
  }

  /// Split a value on `sep`, trimming each item; empty value gives an empty list.
  std::vector<std::string> get_list(const std::string & section, const std::string & key, char sep = ',') const
  {
    const auto v = find(section, key);
    std::vector<std::string> out;
    if (!v || trim(*v).empty()) {
      return out;
    }
    for (auto & item : split(*v, sep)) {
      out.push_back(trim(item));
    }
    return out;
  }

  void set(const std::string & section, const std::string & key, const std::string & value)
  {
    sections_[section][key] = value;
  }

  /// Apply "section.key=value".
  void apply_override(const std::string & assignment)
  {
    const auto eq = assignment.find('=');
    const auto dot = assignment.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      throw user_error("override must look like section.key=value: '" + assignment + "'");
    }
    set(trim(assignment.substr(0, dot)), trim(assignment.substr(dot + 1, eq - dot - 1)),
        decode(trim(assignment.substr(eq + 1))));
  }

  const std::map<std::string, Section> & sections() const { return sections_; }

  static double to_double(const std::string & name, const std::string & v)
  {
    try {
      std::size_t used = 0;
      const double d = std::stod(v, &used);
      if (used == v.size()) {
        return d;
      }
    } catch (const std::exception &) {
    }
    throw user_error("config: " + name + " is not a number: '" + v + "'");
  }

  static std::int64_t to_int(const std::string & name, const std::string & v)
  {
    std::int64_t out = 0;
    const auto * end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end) {
      throw user_error("config: " + name + " is not an integer: '" + v + "'");
    }
    return out;
  }

private:
  static std::string decode(const std::string & raw)
  {
    const auto t = trim(raw);
    if (t.size() >= 2 && t.front() == '"' && t.back() == '"') {
      return unescape(std::string_view(t).substr(1, t.size() - 2));
    }
    return unescape(t);
  }

  std::map<std::string, Section> sections_;
};

}  // namespace palp

#endif  // PALP_CONFIG_HPP_
