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

// Model checkpoints and the text form of a VariantSpec.
//
// A checkpoint is one JSON header line (format tag, version, variant,
// skeleton text and the name and shape of every parameter tensor) followed by
// the parameter values as little-endian IEEE-754 doubles in header order.

#ifndef DGNET_CHECKPOINT_HPP_
#define DGNET_CHECKPOINT_HPP_

#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "dgnet/model.hpp"

namespace dgnet {

inline constexpr int kCheckpointVersion = 1;

// (key, value) pairs covering every VariantSpec field.
std::vector<std::pair<std::string, std::string>> variant_fields(const VariantSpec& spec);
// Sets one field from its text form; false when `key` is not a variant field.
// Malformed values throw ConfigError.
bool set_variant_field(VariantSpec& spec, const std::string& key,
                       const std::string& value);

std::string serialize_checkpoint(const DgNetModel& model);
std::unique_ptr<DgNetModel> deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const DgNetModel& model, const std::filesystem::path& path);
std::unique_ptr<DgNetModel> load_checkpoint(const std::filesystem::path& path);

}  // namespace dgnet

#endif  // DGNET_CHECKPOINT_HPP_
