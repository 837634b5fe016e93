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

#include "dgnet/skeleton.hpp"

#include <algorithm>
#include <charconv>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>

#include "dgnet/config.hpp"
#include "dgnet/error.hpp"

namespace dgnet {
namespace {

std::string format_number(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

std::vector<JointPair> parse_pairs(const std::string& value,
                                   const std::string& key) {
  std::vector<JointPair> out;
  for (const std::string& tok : split_ws(value)) {
    const std::size_t dash = tok.find('-');
    if (dash == std::string::npos || dash == 0 || dash + 1 == tok.size()) {
      throw ConfigError(key + ": expected 'a-b', got '" + tok + "'");
    }
    out.emplace_back(static_cast<int>(parse_int(tok.substr(0, dash), key)),
                     static_cast<int>(parse_int(tok.substr(dash + 1), key)));
  }
  return out;
}

std::string format_pairs(const std::vector<JointPair>& pairs) {
  std::string s;
  for (const auto& [a, b] : pairs) {
    if (!s.empty()) s += ' ';
    s += std::to_string(a) + "-" + std::to_string(b);
  }
  return s;
}

}  // namespace

void SkeletonGraph::validate() const {
  if (joint_count == 0) throw ConfigError("skeleton: joint_count must be > 0");
  const int n = static_cast<int>(joint_count);
  auto check_pair = [n](const JointPair& e, const char* what) {
    if (e.first < 0 || e.first >= n || e.second < 0 || e.second >= n) {
      throw ConfigError(std::string("skeleton: ") + what + " " +
                        std::to_string(e.first) + "-" + std::to_string(e.second) +
                        " out of range [0, " + std::to_string(n) + ")");
    }
    if (e.first == e.second) {
      throw ConfigError(std::string("skeleton: ") + what + " " +
                        std::to_string(e.first) + "-" +
                        std::to_string(e.second) + " is a self-loop");
    }
  };
  std::set<JointPair> seen;
  for (const JointPair& e : edges) {
    check_pair(e, "edge");
    const JointPair key{std::min(e.first, e.second), std::max(e.first, e.second)};
    if (!seen.insert(key).second) {
      throw ConfigError("skeleton: duplicate edge " + std::to_string(e.first) +
                        "-" + std::to_string(e.second));
    }
  }
  std::vector<int> mirror_count(joint_count, 0);
  for (const JointPair& m : mirror_pairs) {
    check_pair(m, "mirror pair");
    if (++mirror_count[m.first] > 1 || ++mirror_count[m.second] > 1) {
      throw ConfigError("skeleton: joint appears in more than one mirror pair");
    }
  }
  if (!names.empty() && names.size() != joint_count) {
    throw ConfigError("skeleton: " + std::to_string(names.size()) +
                      " names for " + std::to_string(joint_count) + " joints");
  }
  if (!rest_offsets.empty() && rest_offsets.size() != joint_count) {
    throw ConfigError("skeleton: " + std::to_string(rest_offsets.size()) +
                      " rest offsets for " + std::to_string(joint_count) +
                      " joints");
  }
  if (root < 0 || root >= n) throw ConfigError("skeleton: root out of range");
  // Connectivity.
  const auto adj = adjacency();
  std::vector<bool> reached(joint_count, false);
  std::deque<int> queue{root};
  reached[root] = true;
  std::size_t count = 1;
  while (!queue.empty()) {
    const int j = queue.front();
    queue.pop_front();
    for (int k : adj[j]) {
      if (!reached[k]) {
        reached[k] = true;
        ++count;
        queue.push_back(k);
      }
    }
  }
  if (count != joint_count) {
    throw ConfigError("skeleton: graph is disconnected (" +
                      std::to_string(count) + " of " +
                      std::to_string(joint_count) + " joints reachable)");
  }
}

std::vector<std::vector<int>> SkeletonGraph::adjacency() const {
  std::vector<std::vector<int>> adj(joint_count);
  for (const auto& [a, b] : edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  for (auto& row : adj) std::sort(row.begin(), row.end());
  return adj;
}

std::vector<int> SkeletonGraph::parents() const {
  std::vector<int> parent(joint_count, -2);
  const auto adj = adjacency();
  std::deque<int> queue{root};
  parent[root] = -1;
  while (!queue.empty()) {
    const int j = queue.front();
    queue.pop_front();
    for (int k : adj[j]) {
      if (parent[k] == -2) {
        parent[k] = j;
        queue.push_back(k);
      }
    }
  }
  return parent;
}

std::vector<int> SkeletonGraph::topological_order() const {
  std::vector<int> order;
  std::vector<bool> seen(joint_count, false);
  const auto adj = adjacency();
  std::deque<int> queue{root};
  seen[root] = true;
  while (!queue.empty()) {
    const int j = queue.front();
    queue.pop_front();
    order.push_back(j);
    for (int k : adj[j]) {
      if (!seen[k]) {
        seen[k] = true;
        queue.push_back(k);
      }
    }
  }
  return order;
}

std::vector<int> SkeletonGraph::mirror_map() const {
  std::vector<int> m(joint_count);
  for (std::size_t j = 0; j < joint_count; ++j) m[j] = static_cast<int>(j);
  for (const auto& [a, b] : mirror_pairs) {
    m[a] = b;
    m[b] = a;
  }
  return m;
}

SkeletonGraph SkeletonGraph::human36m17() {
  SkeletonGraph s;
  s.joint_count = 17;
  s.names = {"hip",      "r_hip",      "r_knee",  "r_ankle", "l_hip",
             "l_knee",   "l_ankle",    "spine",   "thorax",  "neck",
             "head",     "l_shoulder", "l_elbow", "l_wrist", "r_shoulder",
             "r_elbow",  "r_wrist"};
  s.edges = {{0, 1},  {1, 2},  {2, 3},   {0, 4},   {4, 5},   {5, 6},
             {0, 7},  {7, 8},  {8, 9},   {9, 10},  {8, 11},  {11, 12},
             {12, 13}, {8, 14}, {14, 15}, {15, 16}};
  s.mirror_pairs = {{1, 4}, {2, 5}, {3, 6}, {11, 14}, {12, 15}, {13, 16}};
  s.root = 0;
  // Body frame: x towards the subject's left, y up, z forward.
  s.rest_offsets = {{0, 0, 0},      {-130, 0, 0},   {0, -440, 0},
                    {0, -430, 0},   {130, 0, 0},    {0, -440, 0},
                    {0, -430, 0},   {0, 230, 0},    {0, 250, 0},
                    {0, 110, 30},   {0, 120, 0},    {150, 0, 0},
                    {0, -280, 0},   {0, -250, 0},   {-150, 0, 0},
                    {0, -280, 0},   {0, -250, 0}};
  return s;
}

SkeletonGraph parse_skeleton(std::string_view text) {
  const KeyValueFile kv = KeyValueFile::parse(text);
  kv.reject_unknown(
      {"joint_count", "names", "edges", "mirror_pairs", "root", "rest_offsets"});
  SkeletonGraph s;
  const std::int64_t n = kv.get_int("joint_count");
  if (n <= 0) throw ConfigError("skeleton: joint_count must be > 0");
  s.joint_count = static_cast<std::size_t>(n);
  s.edges = parse_pairs(kv.get_string("edges"), "edges");
  if (kv.has("names")) s.names = split_ws(kv.get_string("names"));
  if (kv.has("mirror_pairs")) {
    s.mirror_pairs = parse_pairs(kv.get_string("mirror_pairs"), "mirror_pairs");
  }
  if (kv.has("root")) s.root = static_cast<int>(kv.get_int("root"));
  if (kv.has("rest_offsets")) {
    for (const std::string& tok : split_ws(kv.get_string("rest_offsets"))) {
      std::array<double, 3> v{};
      std::size_t start = 0;
      for (int c = 0; c < 3; ++c) {
        const std::size_t comma = tok.find(',', start);
        const bool last = c == 2;
        if (last != (comma == std::string::npos)) {
          throw ConfigError("rest_offsets: expected 'x,y,z', got '" + tok + "'");
        }
        const std::size_t end = last ? tok.size() : comma;
        v[c] = parse_double(tok.substr(start, end - start), "rest_offsets");
        start = end + 1;
      }
      s.rest_offsets.push_back(v);
    }
  }
  s.validate();
  return s;
}

SkeletonGraph load_skeleton(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open skeleton file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_skeleton(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string format_skeleton(const SkeletonGraph& s) {
  std::string out = "# dgnet skeleton\n";
  out += "joint_count = " + std::to_string(s.joint_count) + "\n";
  if (!s.names.empty()) {
    out += "names =";
    for (const auto& n : s.names) out += " " + n;
    out += "\n";
  }
  out += "edges = " + format_pairs(s.edges) + "\n";
  if (!s.mirror_pairs.empty()) {
    out += "mirror_pairs = " + format_pairs(s.mirror_pairs) + "\n";
  }
  out += "root = " + std::to_string(s.root) + "\n";
  if (!s.rest_offsets.empty()) {
    out += "rest_offsets =";
    for (const auto& v : s.rest_offsets) {
      out += " " + format_number(v[0]) + "," + format_number(v[1]) + "," +
             format_number(v[2]);
    }
    out += "\n";
  }
  return out;
}

}  // namespace dgnet
