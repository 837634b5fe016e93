// Copyright 2026 The dgnet Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// `key = value` text files. One entry per line; `#` starts a comment; blank
// lines are ignored; keys are unique. Used for run configs and skeletons.

#ifndef DGNET_CONFIG_HPP_
#define DGNET_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace dgnet {

class KeyValueFile {
 public:
  struct Entry {
    std::string value;
    std::size_t line = 0;
  };

  static KeyValueFile parse(std::string_view text);
  static KeyValueFile load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  const std::map<std::string, Entry>& entries() const { return entries_; }

  // Throws ConfigError naming the first key outside `allowed`.
  void reject_unknown(const std::set<std::string>& allowed) const;

  std::string get_string(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  bool get_bool(const std::string& key) const;

 private:
  const Entry& entry(const std::string& key) const;
  std::map<std::string, Entry> entries_;
};

// Strict whole-string conversions; throw ConfigError mentioning `what`.
double parse_double(std::string_view s, std::string_view what);
std::int64_t parse_int(std::string_view s, std::string_view what);
bool parse_bool(std::string_view s, std::string_view what);

std::vector<std::string> split_ws(std::string_view s);
std::string trim(std::string_view s);

}  // namespace dgnet

#endif  // DGNET_CONFIG_HPP_
