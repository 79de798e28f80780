// Copyright 2026 The DCLP Authors.
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


// Run configuration: one JSON or TOML file, then DCLP_* environment
// overrides, then explicit overrides. Later sources win.

#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dclp/augment.hpp"
#include "dclp/curriculum.hpp"
#include "dclp/predictor.hpp"
#include "dclp/pretrain.hpp"
#include "dclp/search.hpp"
#include "dclp/spaces.hpp"

namespace dclp {

inline constexpr const char* kCodeVersion = "dclp-0.1.0";

// Every key the config understands, with its default. Keys whose default is
// null are optional; seed, output_dir and space.name are required.
nlohmann::json default_config();

// [section] headers, key = value with strings, integers, floats, booleans
// and flat arrays; '#' comments.
nlohmann::json parse_toml(const std::string& text);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
std::optional<std::string> process_env(const std::string& name);

struct RunConfig {
  nlohmann::json tree;               // fully resolved
  std::filesystem::path base_dir;    // relative paths resolve against this

  std::uint64_t seed() const;
  std::filesystem::path output_dir() const;
  // Path-valued key or nullopt when unset.
  std::optional<std::filesystem::path> path(const std::string& section,
                                            const std::string& key) const;

  SearchSpaceSpec space() const;
  SyntheticOracle oracle() const;
  ContrastiveConfig pretrain() const;
  AugmentationSpec augmentation() const;
  CurriculumConfig curriculum() const;
  FinetuneConfig finetune() const;
  SearchConfig search() const;

  // Stable digest of the resolved tree.
  std::string digest() const;
  // Resolved config + seed + code version.
  nlohmann::json echo() const;
};

// `overrides` are "section.key=value" (or "key=value" for top-level keys);
// the value is parsed as JSON when possible, else taken as a string.
// Throws Error(kConfig) naming the offending field.
RunConfig load_config(const std::filesystem::path& file,
                      const std::vector<std::string>& overrides = {},
                      const EnvLookup& env = process_env);

// Same, from an in-memory tree (base_dir for relative paths).
RunConfig resolve_config(nlohmann::json tree, const std::filesystem::path& base_dir,
                         const std::vector<std::string>& overrides = {},
                         const EnvLookup& env = process_env);

}  // namespace dclp
