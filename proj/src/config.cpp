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

#include "dgnet/config.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "dgnet/error.hpp"

namespace dgnet {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

double parse_double(std::string_view s, std::string_view what) {
  const std::string str = trim(s);
  if (str.empty()) throw ConfigError(std::string(what) + ": empty value");
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(str.c_str(), &end);
  if (end != str.c_str() + str.size() || errno == ERANGE) {
    throw ConfigError(std::string(what) + ": not a number: '" + str + "'");
  }
  if (!std::isfinite(v)) {
    throw ConfigError(std::string(what) + ": must be finite, got '" + str + "'");
  }
  return v;
}

std::int64_t parse_int(std::string_view s, std::string_view what) {
  const std::string str = trim(s);
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(str.data(), str.data() + str.size(), v);
  if (str.empty() || ec != std::errc() || ptr != str.data() + str.size()) {
    throw ConfigError(std::string(what) + ": not an integer: '" + str + "'");
  }
  return v;
}

bool parse_bool(std::string_view s, std::string_view what) {
  const std::string str = trim(s);
  if (str == "true" || str == "1" || str == "yes" || str == "on") return true;
  if (str == "false" || str == "0" || str == "no" || str == "off") return false;
  throw ConfigError(std::string(what) + ": not a boolean: '" + str + "'");
}

KeyValueFile KeyValueFile::parse(std::string_view text) {
  KeyValueFile kv;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view raw = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (const std::size_t hash = raw.find('#'); hash != std::string_view::npos) {
      raw = raw.substr(0, hash);
    }
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("expected 'key = value', got '" + line + "'", line_no);
    }
    std::string key = trim(std::string_view(line).substr(0, eq));
    std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw ParseError("empty key", line_no);
    if (kv.entries_.count(key)) {
      throw ParseError("duplicate key '" + key + "'", line_no);
    }
    kv.entries_.emplace(std::move(key), Entry{std::move(value), line_no});
  }
  return kv;
}

KeyValueFile KeyValueFile::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line());
  }
}

void KeyValueFile::reject_unknown(const std::set<std::string>& allowed) const {
  for (const auto& [key, e] : entries_) {
    if (!allowed.count(key)) {
      throw ConfigError("unknown key '" + key + "' at line " +
                        std::to_string(e.line));
    }
  }
}

const KeyValueFile::Entry& KeyValueFile::entry(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("missing key '" + key + "'");
  return it->second;
}

std::string KeyValueFile::get_string(const std::string& key) const {
  return entry(key).value;
}
double KeyValueFile::get_double(const std::string& key) const {
  return parse_double(entry(key).value, key);
}
std::int64_t KeyValueFile::get_int(const std::string& key) const {
  return parse_int(entry(key).value, key);
}
bool KeyValueFile::get_bool(const std::string& key) const {
  return parse_bool(entry(key).value, key);
}

}  // namespace dgnet
