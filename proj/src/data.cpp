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

#include "dgnet/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "dgnet/error.hpp"
#include "dgnet/rng.hpp"
#include "json.hpp"

namespace dgnet {
namespace {

using Mat3 = std::array<double, 9>;
using Vec3 = std::array<double, 3>;

Mat3 mat_mul(const Mat3& a, const Mat3& b) {
  Mat3 c{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += a[i * 3 + k] * b[k * 3 + j];
      c[i * 3 + j] = s;
    }
  }
  return c;
}

Vec3 mat_vec(const Mat3& a, const Vec3& v) {
  return {a[0] * v[0] + a[1] * v[1] + a[2] * v[2],
          a[3] * v[0] + a[4] * v[1] + a[5] * v[2],
          a[6] * v[0] + a[7] * v[1] + a[8] * v[2]};
}

Mat3 rot_x(double t) {
  const double c = std::cos(t), s = std::sin(t);
  return {1, 0, 0, 0, c, -s, 0, s, c};
}
Mat3 rot_y(double t) {
  const double c = std::cos(t), s = std::sin(t);
  return {c, 0, s, 0, 1, 0, -s, 0, c};
}
Mat3 rot_z(double t) {
  const double c = std::cos(t), s = std::sin(t);
  return {c, -s, 0, s, c, 0, 0, 0, 1};
}
Mat3 euler(const Vec3& a) {
  return mat_mul(rot_z(a[2]), mat_mul(rot_y(a[1]), rot_x(a[0])));
}

// Uniform Catmull-Rom curve through random control values in [0, 1], one
// knot every `spacing` frames.
class Spline {
 public:
  Spline(Rng& rng, std::size_t frames, double spacing) : spacing_(spacing) {
    const std::size_t m =
        static_cast<std::size_t>(static_cast<double>(frames) / spacing) + 4;
    for (std::size_t i = 0; i < m; ++i) c_.push_back(rng.uniform());
  }
  double operator()(std::size_t t) const {
    const double u = static_cast<double>(t) / spacing_ + 1.0;
    const std::size_t s = static_cast<std::size_t>(u);
    const double f = u - static_cast<double>(s);
    const double p0 = c_[s - 1], p1 = c_[s], p2 = c_[s + 1], p3 = c_[s + 2];
    const double v =
        0.5 * ((2.0 * p1) + (-p0 + p2) * f +
               (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * f * f +
               (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * f * f * f);
    return std::clamp(v, 0.0, 1.0);
  }

 private:
  double spacing_;
  std::vector<double> c_;
};

struct Range {
  double lo, hi;
};
using JointRanges = std::array<Range, 3>;

enum class Group { kTorso, kHead, kArm, kLeg, kStatic };

struct JointModel {
  JointRanges ranges;
  Group group;
};

// Rotation ranges (radians, x/y/z in the body frame) applied at the parent
// joint to the bone ending at the named joint.
const std::map<std::string, JointModel>& joint_models() {
  static const std::map<std::string, JointModel> m = {
      {"r_hip", {{{{-0.1, 0.1}, {-0.1, 0.1}, {-0.1, 0.1}}}, Group::kStatic}},
      {"l_hip", {{{{-0.1, 0.1}, {-0.1, 0.1}, {-0.1, 0.1}}}, Group::kStatic}},
      {"r_knee", {{{{-1.2, 0.4}, {-0.3, 0.3}, {-0.4, 0.1}}}, Group::kLeg}},
      {"l_knee", {{{{-1.2, 0.4}, {-0.3, 0.3}, {-0.1, 0.4}}}, Group::kLeg}},
      {"r_ankle", {{{{0.0, 1.6}, {-0.05, 0.05}, {-0.05, 0.05}}}, Group::kLeg}},
      {"l_ankle", {{{{0.0, 1.6}, {-0.05, 0.05}, {-0.05, 0.05}}}, Group::kLeg}},
      {"spine", {{{{-0.3, 0.5}, {-0.4, 0.4}, {-0.2, 0.2}}}, Group::kTorso}},
      {"thorax", {{{{-0.2, 0.3}, {-0.3, 0.3}, {-0.15, 0.15}}}, Group::kTorso}},
      {"neck", {{{{-0.3, 0.4}, {-0.5, 0.5}, {-0.3, 0.3}}}, Group::kHead}},
      {"head", {{{{-0.3, 0.3}, {-0.2, 0.2}, {-0.2, 0.2}}}, Group::kHead}},
      {"l_shoulder", {{{{-0.1, 0.1}, {-0.1, 0.1}, {-0.1, 0.1}}}, Group::kStatic}},
      {"r_shoulder", {{{{-0.1, 0.1}, {-0.1, 0.1}, {-0.1, 0.1}}}, Group::kStatic}},
      {"l_elbow", {{{{-1.8, 0.6}, {-0.4, 0.4}, {0.0, 1.6}}}, Group::kArm}},
      {"r_elbow", {{{{-1.8, 0.6}, {-0.4, 0.4}, {-1.6, 0.0}}}, Group::kArm}},
      {"l_wrist", {{{{-2.0, 0.0}, {-0.3, 0.3}, {-0.1, 0.1}}}, Group::kArm}},
      {"r_wrist", {{{{-2.0, 0.0}, {-0.3, 0.3}, {-0.1, 0.1}}}, Group::kArm}},
  };
  return m;
}

const JointModel kGenericJoint{{{{-0.3, 0.3}, {-0.3, 0.3}, {-0.3, 0.3}}},
                               Group::kTorso};

// Share of each group's motion range a style uses.
std::array<double, 5> activity(const std::string& action) {
  //                      torso head arm  leg  static
  if (action == "walk") return {0.3, 0.3, 0.3, 0.3, 0.2};
  if (action == "squat") return {0.5, 0.3, 0.4, 0.2, 0.2};
  if (action == "reach") return {0.6, 0.5, 1.0, 0.15, 0.3};
  if (action == "wave") return {0.2, 0.3, 0.2, 0.15, 0.2};
  if (action == "turn") return {0.4, 0.4, 0.4, 0.4, 0.3};
  return {1.0, 1.0, 1.0, 1.0, 1.0};
}

double rest_share(const Range& r) {
  if (r.hi <= r.lo) return 0.5;
  return std::clamp((0.0 - r.lo) / (r.hi - r.lo), 0.0, 1.0);
}

int joint_index(const SkeletonGraph& s, const std::string& name) {
  for (std::size_t j = 0; j < s.names.size(); ++j) {
    if (s.names[j] == name) return static_cast<int>(j);
  }
  return -1;
}

PoseSequence synthesize(const SkeletonGraph& sk, std::size_t frames,
                        std::uint64_t stream, const std::string& action,
                        std::string id, const Intrinsics& intr) {
  Rng rng(stream);
  const std::size_t n = sk.joint_count;
  const std::vector<int> parent = sk.parents();
  const std::vector<int> order = sk.topological_order();

  // Bone layout.
  const double body_scale = rng.uniform(0.85, 1.15);
  std::vector<Vec3> offset(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double s = body_scale * rng.uniform(0.95, 1.05);
    for (int a = 0; a < 3; ++a) offset[j][a] = sk.rest_offsets[j][a] * s;
  }

  // Per-joint angle curves.
  const auto act = activity(action);
  const double spacing = rng.uniform(4.0, 7.0);
  std::vector<JointModel> model(n, kGenericJoint);
  for (std::size_t j = 0; j < n; ++j) {
    if (j < sk.names.size()) {
      const auto it = joint_models().find(sk.names[j]);
      if (it != joint_models().end()) model[j] = it->second;
    }
  }
  std::vector<std::array<Spline, 3>> curves;
  curves.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    curves.push_back({Spline(rng, frames, spacing), Spline(rng, frames, spacing),
                      Spline(rng, frames, spacing)});
  }
  const double period = rng.uniform(16.0, 28.0);
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double omega = 2.0 * std::numbers::pi / period;
  Spline depth(rng, frames, spacing);
  const bool wave_left = rng.uniform() < 0.5;

  const int r_thigh = joint_index(sk, "r_knee"), l_thigh = joint_index(sk, "l_knee");
  const int r_shin = joint_index(sk, "r_ankle"), l_shin = joint_index(sk, "l_ankle");
  const int r_upper = joint_index(sk, "r_elbow"), l_upper = joint_index(sk, "l_elbow");
  const int r_fore = joint_index(sk, "r_wrist"), l_fore = joint_index(sk, "l_wrist");
  const int spine = joint_index(sk, "spine");

  // Root trajectory.
  const double yaw0 = rng.uniform(-std::numbers::pi, std::numbers::pi);
  double yaw_rate = rng.uniform(-0.01, 0.01);
  if (action == "turn") {
    yaw_rate = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.04, 0.1);
  }
  Spline pitch(rng, frames, spacing), roll(rng, frames, spacing);
  Spline drift_x(rng, frames, spacing), drift_z(rng, frames, spacing);
  const Vec3 start{rng.uniform(-700.0, 700.0), rng.uniform(-300.0, 100.0),
                   rng.uniform(4200.0, 6200.0)};
  double speed = action == "walk" ? rng.uniform(8.0, 20.0) : 0.0;
  speed = std::min(speed, 1500.0 / static_cast<double>(frames));

  PoseSequence seq;
  seq.seq_id = std::move(id);
  seq.action = action;
  seq.intrinsics = intr;
  seq.joints3d = Tensor({frames, n, 3});
  seq.joints2d = Tensor({frames, n, 2});

  std::vector<Mat3> world(n);
  std::vector<Vec3> pos(n);
  for (std::size_t t = 0; t < frames; ++t) {
    const double tt = static_cast<double>(t);
    const double wave = std::sin(omega * tt + phase);
    const double wave_q = std::sin(omega * tt + phase + std::numbers::pi / 2);
    const double d = depth(t);

    std::vector<Vec3> angle(n);
    for (std::size_t j = 0; j < n; ++j) {
      const double a = act[static_cast<int>(model[j].group)];
      for (int ax = 0; ax < 3; ++ax) {
        const Range& r = model[j].ranges[ax];
        const double rest = rest_share(r);
        const double s = std::clamp(rest + a * (curves[j][ax](t) - rest), 0.0, 1.0);
        angle[j][ax] = r.lo + (r.hi - r.lo) * s;
      }
    }
    if (action == "walk" && r_thigh >= 0 && l_thigh >= 0) {
      angle[r_thigh][0] = -0.45 * wave - 0.1;
      angle[l_thigh][0] = 0.45 * wave - 0.1;
      if (r_shin >= 0) angle[r_shin][0] = 0.4 + 0.4 * std::max(0.0, wave_q);
      if (l_shin >= 0) angle[l_shin][0] = 0.4 + 0.4 * std::max(0.0, -wave_q);
      if (r_upper >= 0) angle[r_upper][0] = 0.35 * wave;
      if (l_upper >= 0) angle[l_upper][0] = -0.35 * wave;
    }
    if (action == "squat" && r_thigh >= 0 && l_thigh >= 0) {
      angle[r_thigh][0] = -1.3 * d;
      angle[l_thigh][0] = -1.3 * d;
      if (r_shin >= 0) angle[r_shin][0] = 1.6 * d;
      if (l_shin >= 0) angle[l_shin][0] = 1.6 * d;
      if (spine >= 0) angle[spine][0] = 0.4 * d;
    }
    if (action == "wave") {
      const int upper = wave_left ? l_upper : r_upper;
      const int fore = wave_left ? l_fore : r_fore;
      if (upper >= 0) angle[upper][2] = (wave_left ? 1.0 : -1.0) * (1.3 + 0.2 * d);
      if (fore >= 0) angle[fore][0] = -1.0 - 0.6 * wave;
    }

    const double yaw = yaw0 + yaw_rate * tt;
    const Mat3 root_rot =
        mat_mul(rot_y(yaw), mat_mul(rot_x(0.16 * (pitch(t) - 0.5)),
                                    rot_z(0.16 * (roll(t) - 0.5))));
    const Vec3 heading = mat_vec(rot_y(yaw), {0.0, 0.0, 1.0});
    double drop = 0.0;
    if (action == "squat") drop = 350.0 * body_scale * d;
    const Vec3 root{start[0] + speed * tt * heading[0] + 300.0 * (drift_x(t) - 0.5),
                    start[1] - drop,
                    start[2] + speed * tt * heading[2] + 300.0 * (drift_z(t) - 0.5)};

    for (int j : order) {
      if (parent[j] < 0) {
        world[j] = root_rot;
        pos[j] = root;
        continue;
      }
      world[j] = mat_mul(world[parent[j]], euler(angle[j]));
      const Vec3 bone = mat_vec(world[j], offset[j]);
      const Vec3& p = pos[parent[j]];
      pos[j] = {p[0] + bone[0], p[1] + bone[1], p[2] + bone[2]};
    }
    for (std::size_t j = 0; j < n; ++j) {
      // Body frame is y-up, camera frame y-down.
      const double xyz[3] = {pos[j][0], -pos[j][1], pos[j][2]};
      for (int a = 0; a < 3; ++a) seq.joints3d.at(t, j, a) = xyz[a];
      double uv[2];
      project(intr, xyz, uv);
      seq.joints2d.at(t, j, 0) = uv[0];
      seq.joints2d.at(t, j, 1) = uv[1];
    }
  }
  return seq;
}

std::string format_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "synth-%06zu", i);
  return buf;
}

}  // namespace

void PoseSequence::validate() const {
  if (seq_id.empty()) throw ValidationError("sequence has an empty seq_id");
  if (joints3d.rank() != 3 || joints3d.dim(2) != 3) {
    throw ValidationError(seq_id + ": joints3d must be [T x N x 3]");
  }
  if (joints2d.rank() != 3 || joints2d.dim(2) != 2 ||
      joints2d.dim(0) != joints3d.dim(0) || joints2d.dim(1) != joints3d.dim(1)) {
    throw ValidationError(seq_id + ": joints2d must be [T x N x 2] matching joints3d");
  }
  if (!joints3d.all_finite() || !joints2d.all_finite()) {
    throw ValidationError(seq_id + ": non-finite coordinates");
  }
  try {
    intrinsics.validate();
  } catch (const ConfigError& e) {
    throw ValidationError(seq_id + ": " + e.what());
  }
}

const std::vector<std::string>& synthetic_actions() {
  static const std::vector<std::string> a = {"walk", "squat", "reach", "wave",
                                             "turn"};
  return a;
}

std::vector<PoseSequence> generate_synthetic(std::size_t count, std::size_t frames,
                                             const SkeletonGraph& skeleton,
                                             std::uint64_t seed,
                                             const SynthOptions& options) {
  if (frames < 2) throw ConfigError("synthetic sequences need T >= 2 frames");
  skeleton.validate();
  if (skeleton.rest_offsets.size() != skeleton.joint_count) {
    throw ConfigError("skeleton has no rest_offsets; the generator needs them");
  }
  options.intrinsics.validate();
  std::vector<PoseSequence> out;
  out.reserve(count);
  const std::uint64_t base = splitmix64(seed);
  for (std::size_t i = 0; i < count; ++i) {
    const std::string action =
        options.actions ? synthetic_actions()[i % synthetic_actions().size()] : "";
    out.push_back(synthesize(skeleton, frames, splitmix64(base ^ i), action,
                             format_id(i), options.intrinsics));
  }
  return out;
}

PoseSequence corrupt_2d(const PoseSequence& seq, const CorruptionSpec& spec) {
  if (!(spec.sigma >= 0.0) || !std::isfinite(spec.sigma)) {
    throw ConfigError("noise sigma must be a non-negative number");
  }
  PoseSequence out = seq;
  if (spec.sigma == 0.0) return out;
  Rng rng(splitmix64(spec.seed ^ fnv1a64(seq.seq_id)));
  for (double& v : out.joints2d.data()) v += rng.normal(0.0, spec.sigma);
  return out;
}

double projection_residual(const PoseSequence& seq) {
  double worst = 0.0;
  const std::size_t t_count = seq.frames(), n = seq.joints();
  for (std::size_t t = 0; t < t_count; ++t) {
    for (std::size_t j = 0; j < n; ++j) {
      const double xyz[3] = {seq.joints3d.at(t, j, 0), seq.joints3d.at(t, j, 1),
                             seq.joints3d.at(t, j, 2)};
      double uv[2];
      project(seq.intrinsics, xyz, uv);
      worst = std::max(worst, std::abs(uv[0] - seq.joints2d.at(t, j, 0)));
      worst = std::max(worst, std::abs(uv[1] - seq.joints2d.at(t, j, 1)));
    }
  }
  return worst;
}

// ---- JSONL ------------------------------------------------------------------

namespace {

using nlohmann::json;

json to_json(const PoseSequence& s) {
  json j;
  j["seq_id"] = s.seq_id;
  j["action"] = s.action;
  j["intrinsics"] = {{"f", s.intrinsics.f}, {"cx", s.intrinsics.cx},
                     {"cy", s.intrinsics.cy}};
  j["frames"] = s.frames();
  j["joints"] = s.joints();
  json j3 = json::array(), j2 = json::array();
  const std::size_t n = s.joints();
  for (std::size_t t = 0; t < s.frames(); ++t) {
    std::vector<double> a(s.joints3d.raw() + t * n * 3,
                          s.joints3d.raw() + (t + 1) * n * 3);
    std::vector<double> b(s.joints2d.raw() + t * n * 2,
                          s.joints2d.raw() + (t + 1) * n * 2);
    j3.push_back(std::move(a));
    j2.push_back(std::move(b));
  }
  j["joints3d"] = std::move(j3);
  j["joints2d"] = std::move(j2);
  return j;
}

Tensor frames_tensor(const json& arr, std::size_t t, std::size_t n,
                     std::size_t c, const char* key) {
  if (!arr.is_array() || arr.size() != t) {
    throw ValidationError(std::string(key) + ": expected " + std::to_string(t) +
                          " frames");
  }
  Tensor out({t, n, c});
  for (std::size_t f = 0; f < t; ++f) {
    const json& row = arr[f];
    if (!row.is_array() || row.size() != n * c) {
      throw ValidationError(std::string(key) + ": frame " + std::to_string(f) +
                            " needs " + std::to_string(n * c) + " numbers");
    }
    for (std::size_t i = 0; i < n * c; ++i) {
      if (!row[i].is_number()) {
        throw ValidationError(std::string(key) + ": non-numeric entry");
      }
      out[f * n * c + i] = row[i].get<double>();
    }
  }
  return out;
}

PoseSequence from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("record is not a JSON object");
  PoseSequence s;
  s.seq_id = j.at("seq_id").get<std::string>();
  if (j.contains("action")) s.action = j.at("action").get<std::string>();
  const json& k = j.at("intrinsics");
  s.intrinsics = {k.at("f").get<double>(), k.at("cx").get<double>(),
                  k.at("cy").get<double>()};
  const std::size_t t = j.at("frames").get<std::size_t>();
  const std::size_t n = j.at("joints").get<std::size_t>();
  if (t == 0 || n == 0) throw ValidationError("frames and joints must be > 0");
  s.joints3d = frames_tensor(j.at("joints3d"), t, n, 3, "joints3d");
  s.joints2d = frames_tensor(j.at("joints2d"), t, n, 2, "joints2d");
  s.validate();
  return s;
}

}  // namespace

std::string format_dataset(const std::vector<PoseSequence>& seqs) {
  std::string out;
  for (const PoseSequence& s : seqs) {
    s.validate();
    out += to_json(s).dump();
    out += '\n';
  }
  return out;
}

void write_dataset(const std::vector<PoseSequence>& seqs,
                   const std::filesystem::path& path) {
  const std::string text = format_dataset(seqs);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open '" + path.string() + "' for writing");
  f << text;
  if (!f.flush()) throw Error("failed writing '" + path.string() + "'");
}

std::vector<PoseSequence> parse_dataset(const std::string& text,
                                        std::optional<std::size_t> expected) {
  std::vector<PoseSequence> out;
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    const std::string line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    PoseSequence s;
    try {
      s = from_json(json::parse(line));
    } catch (const json::exception& e) {
      throw ParseError(std::string("malformed record ") +
                       std::to_string(out.size() + 1) + ": " + e.what(),
                       line_no);
    } catch (const ValidationError& e) {
      throw ParseError(std::string("invalid record ") +
                       std::to_string(out.size() + 1) + ": " + e.what(),
                       line_no);
    }
    if (expected && s.joints() != *expected) {
      throw ValidationError("line " + std::to_string(line_no) + ": sequence '" +
                            s.seq_id + "' has " + std::to_string(s.joints()) +
                            " joints, skeleton has " + std::to_string(*expected));
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<PoseSequence> read_dataset(const std::filesystem::path& path,
                                       std::optional<std::size_t> expected) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open dataset '" + path.string() + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  try {
    return parse_dataset(ss.str(), expected);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line());
  }
}

}  // namespace dgnet
