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

#include "dgnet/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <fstream>
#include <sstream>

#include "dgnet/config.hpp"
#include "dgnet/error.hpp"
#include "json.hpp"

namespace dgnet {
namespace {

constexpr const char* kFormatTag = "dgnet-checkpoint";

std::string number(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

std::string flag(bool b) { return b ? "true" : "false"; }

std::size_t count_field(const std::string& key, const std::string& value) {
  const std::int64_t v = parse_int(value, key);
  if (v < 0) throw ConfigError(key + " must be non-negative");
  return static_cast<std::size_t>(v);
}

void put_u64(std::string& out, std::uint64_t x) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((x >> (8 * b)) & 0xFF));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t x = 0;
  for (int b = 0; b < 8; ++b) x |= static_cast<std::uint64_t>(p[b]) << (8 * b);
  return x;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> variant_fields(const VariantSpec& s) {
  return {
      {"spatial_stack", stack_string(s.spatial_stack)},
      {"temporal_stack", stack_string(s.temporal_stack)},
      {"connection_style", to_string(s.connection_style)},
      {"weighting", to_string(s.weighting)},
      {"blocks", std::to_string(s.blocks)},
      {"frames", std::to_string(s.frames)},
      {"k_spatial", std::to_string(s.k_spatial)},
      {"k_temporal", std::to_string(s.k_temporal)},
      {"dg_form", to_string(s.form)},
      {"channels", std::to_string(s.channels)},
      {"nonlocal", flag(s.nonlocal)},
      {"spatial_include_self", flag(s.spatial_include_self)},
      {"temporal_include_self", flag(s.temporal_include_self)},
      {"self_loops", flag(s.self_loops)},
      {"row_normalize", flag(s.row_normalize)},
      {"zero_init_branches", flag(s.zero_init_branches)},
      {"output_scale", number(s.output_scale)},
      {"model_seed", std::to_string(s.seed)},
  };
}

bool set_variant_field(VariantSpec& s, const std::string& key, const std::string& v) {
  if (key == "spatial_stack") {
    s.spatial_stack = parse_stack(v);
  } else if (key == "temporal_stack") {
    s.temporal_stack = parse_stack(v);
  } else if (key == "connection_style") {
    s.connection_style = parse_connection_style(v);
  } else if (key == "weighting") {
    s.weighting = parse_head_activation(v);
  } else if (key == "blocks") {
    s.blocks = count_field(key, v);
  } else if (key == "frames") {
    s.frames = count_field(key, v);
  } else if (key == "k_spatial") {
    s.k_spatial = count_field(key, v);
  } else if (key == "k_temporal") {
    s.k_temporal = count_field(key, v);
  } else if (key == "dg_form") {
    s.form = parse_dg_form(v);
  } else if (key == "channels") {
    s.channels = count_field(key, v);
  } else if (key == "nonlocal") {
    s.nonlocal = parse_bool(v, key);
  } else if (key == "spatial_include_self") {
    s.spatial_include_self = parse_bool(v, key);
  } else if (key == "temporal_include_self") {
    s.temporal_include_self = parse_bool(v, key);
  } else if (key == "self_loops") {
    s.self_loops = parse_bool(v, key);
  } else if (key == "row_normalize") {
    s.row_normalize = parse_bool(v, key);
  } else if (key == "zero_init_branches") {
    s.zero_init_branches = parse_bool(v, key);
  } else if (key == "output_scale") {
    s.output_scale = parse_double(v, key);
  } else if (key == "model_seed") {
    s.seed = static_cast<std::uint64_t>(count_field(key, v));
  } else {
    return false;
  }
  return true;
}

std::string serialize_checkpoint(const DgNetModel& model) {
  nlohmann::ordered_json h;
  h["format"] = kFormatTag;
  h["version"] = kCheckpointVersion;
  nlohmann::ordered_json variant = nlohmann::ordered_json::object();
  for (const auto& [k, v] : variant_fields(model.variant())) variant[k] = v;
  h["variant"] = std::move(variant);
  h["skeleton"] = format_skeleton(model.skeleton());
  nlohmann::ordered_json tensors = nlohmann::ordered_json::array();
  std::size_t total = 0;
  for (const NamedParam& p : model.parameters()) {
    tensors.push_back({{"name", p.name}, {"shape", p.tensor->shape()}});
    total += p.tensor->size();
  }
  h["tensors"] = std::move(tensors);
  h["values"] = total;

  std::string out = h.dump();
  out.push_back('\n');
  out.reserve(out.size() + total * 8);
  for (const NamedParam& p : model.parameters()) {
    for (double v : p.tensor->data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

std::unique_ptr<DgNetModel> deserialize_checkpoint(const std::string& bytes) {
  const std::size_t nl = bytes.find('\n');
  if (nl == std::string::npos) throw ValidationError("checkpoint: missing header line");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(bytes.substr(0, nl));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("checkpoint: malformed header: ") + e.what());
  }
  if (!h.is_object() || h.value("format", "") != kFormatTag) {
    throw ValidationError("checkpoint: not a dgnet checkpoint");
  }
  const int version = h.value("version", -1);
  if (version != kCheckpointVersion) {
    throw ValidationError("checkpoint: version " + std::to_string(version) +
                          " is not supported (this build reads version " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  std::unique_ptr<DgNetModel> model;
  try {
    VariantSpec spec;
    for (const auto& [k, v] : h.at("variant").items()) {
      if (!set_variant_field(spec, k, v.get<std::string>())) {
        throw ValidationError("checkpoint: unknown variant field '" + k + "'");
      }
    }
    model = configure_variant(spec, parse_skeleton(h.at("skeleton").get<std::string>()));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("checkpoint: bad header field: ") + e.what());
  } catch (const ConfigError& e) {
    throw ValidationError(std::string("checkpoint: ") + e.what());
  }

  const ParamList& params = model->parameters();
  const nlohmann::json& tensors = h.at("tensors");
  if (!tensors.is_array() || tensors.size() != params.size()) {
    throw ValidationError("checkpoint: tensor list does not match the variant");
  }
  std::size_t total = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string name = tensors[i].at("name").get<std::string>();
    const Shape shape = tensors[i].at("shape").get<Shape>();
    if (name != params[i].name || shape != params[i].tensor->shape()) {
      throw ValidationError("checkpoint: tensor " + std::to_string(i) + " is '" + name +
                            "' " + shape_string(shape) + ", the variant expects '" +
                            params[i].name + "' " +
                            shape_string(params[i].tensor->shape()));
    }
    total += params[i].tensor->size();
  }
  if (bytes.size() - nl - 1 != total * 8) {
    throw ValidationError("checkpoint: payload holds " +
                          std::to_string(bytes.size() - nl - 1) + " bytes, expected " +
                          std::to_string(total * 8));
  }
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + nl + 1);
  for (const NamedParam& np : params) {
    for (double& v : np.tensor->data()) {
      v = std::bit_cast<double>(get_u64(p));
      p += 8;
    }
  }
  return model;
}

void save_checkpoint(const DgNetModel& model, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(model);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open '" + path.string() + "' for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f.flush()) throw Error("failed writing '" + path.string() + "'");
}

std::unique_ptr<DgNetModel> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open checkpoint '" + path.string() + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace dgnet
