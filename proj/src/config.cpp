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


#include "dclp/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace dclp {

namespace {

using nlohmann::json;

Error config_error(const std::string& what) { return Error(ErrorKind::kConfig, what); }

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Drops a trailing comment, ignoring '#' inside double quotes.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

json parse_toml_value(const std::string& raw, std::size_t line_no) {
  const std::string v = trim(raw);
  if (v.empty()) throw config_error("toml line " + std::to_string(line_no) + ": missing value");
  if (v == "true") return true;
  if (v == "false") return false;
  // Strings, numbers and flat arrays share JSON syntax closely enough.
  try {
    return json::parse(v);
  } catch (const json::exception&) {
  }
  if (v.size() >= 2 && v.front() == '\'' && v.back() == '\'') return v.substr(1, v.size() - 2);
  throw config_error("toml line " + std::to_string(line_no) + ": cannot parse value '" + v + "'");
}

json value_from_string(const std::string& s) {
  try {
    return json::parse(s);
  } catch (const json::exception&) {
    return s;
  }
}

bool compatible(const json& def, const json& v) {
  if (def.is_null() || v.is_null()) return true;
  if (def.is_number_integer()) return v.is_number_integer();
  if (def.is_number()) return v.is_number();
  return def.type() == v.type();
}

void set_field(json& tree, const json& defaults, const std::string& dotted, json value,
               const std::string& source) {
  const auto dot = dotted.find('.');
  if (dot == std::string::npos) {
    if (!defaults.contains(dotted) || defaults[dotted].is_object()) {
      throw config_error(source + ": unknown field '" + dotted + "'");
    }
    tree[dotted] = std::move(value);
    return;
  }
  const std::string section = dotted.substr(0, dot);
  const std::string key = dotted.substr(dot + 1);
  if (!defaults.contains(section) || !defaults[section].is_object() ||
      !defaults[section].contains(key)) {
    throw config_error(source + ": unknown field '" + dotted + "'");
  }
  tree[section][key] = std::move(value);
}

void merge_file(json& tree, const json& defaults, const json& file) {
  if (!file.is_object()) throw config_error("config root must be a table/object");
  for (const auto& [k, v] : file.items()) {
    if (v.is_object()) {
      for (const auto& [k2, v2] : v.items()) set_field(tree, defaults, k + "." + k2, v2, "config");
    } else {
      set_field(tree, defaults, k, v, "config");
    }
  }
}

std::string env_name(const std::string& section, const std::string& key) {
  std::string name = "DCLP_" + (section.empty() ? key : section + "_" + key);
  std::transform(name.begin(), name.end(), name.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return name;
}

const json& field(const json& tree, const std::string& section, const std::string& key) {
  return tree.at(section).at(key);
}

template <typename T>
T get(const json& tree, const std::string& section, const std::string& key) {
  try {
    return field(tree, section, key).get<T>();
  } catch (const json::exception&) {
    throw config_error("field '" + section + "." + key + "' has the wrong type");
  }
}

// Runs a check(), reporting failures as config errors.
template <typename T>
T checked(T value, const std::string& section) {
  try {
    value.check();
  } catch (const Error& e) {
    throw config_error("section '" + section + "': " + e.what());
  }
  return value;
}

template <typename F>
auto parse_enum(const json& tree, const std::string& section, const std::string& key, F parse) {
  const auto name = get<std::string>(tree, section, key);
  try {
    return parse(name);
  } catch (const Error&) {
    throw config_error("field '" + section + "." + key + "': unknown value '" + name + "'");
  }
}

}  // namespace

json default_config() {
  const ContrastiveConfig pc;
  const CurriculumConfig cc;
  const FinetuneConfig fc;
  const SearchConfig sc;
  return {
      {"seed", nullptr},
      {"output_dir", nullptr},
      {"workers", 1},
      {"space",
       {{"name", nullptr},
        {"table", nullptr},
        {"synthetic_size", 4096},
        {"oracle_seed", 0},
        {"noise", 0.01}}},
      {"pretrain",
       {{"unlabeled", 200},
        {"unlabeled_file", nullptr},
        {"temperature", pc.temperature},
        {"rbf_sigma", pc.rbf_sigma},
        {"bank_capacity", pc.bank_capacity},
        {"batch_size", pc.batch_size},
        {"epochs", pc.epochs},
        {"lr", pc.lr},
        {"momentum", pc.momentum},
        {"candidates", pc.candidates},
        {"hidden", pc.hidden},
        {"layers", pc.layers},
        {"selection", to_string(pc.selection)},
        {"augment_method", "mixed"},
        {"augment_ratio", nullptr},
        {"normalize_embeddings", pc.normalize_embeddings},
        {"checkpoint_every", 10}}},
      {"curriculum",
       {{"tau_start", cc.tau_start},
        {"tau_end", cc.tau_end},
        {"sigma", cc.sigma},
        {"frequency", cc.frequency},
        {"amplitude", cc.amplitude},
        {"selection_mode", to_string(cc.selection_mode)}}},
      {"finetune",
       {{"labels", nullptr},
        {"label_count", 100},
        {"loss", to_string(fc.loss)},
        {"lr", fc.lr},
        {"max_epochs", fc.max_epochs},
        {"patience", fc.patience},
        {"min_delta", fc.min_delta},
        {"head_hidden", fc.head_hidden},
        {"freeze_encoder", fc.freeze_encoder},
        {"holdout_fraction", fc.holdout_fraction}}},
      {"search",
       {{"strategy", to_string(sc.strategy)},
        {"iterations", sc.iterations},
        {"samples", sc.samples},
        {"top_k", sc.top_k},
        {"population", sc.population},
        {"max_population", sc.max_population},
        {"policy_lr", sc.policy_lr},
        {"baseline_decay", sc.baseline_decay}}},
      {"eval", {{"table", nullptr}, {"scatter", true}}},
  };
}

json parse_toml(const std::string& text) {
  json root = json::object();
  std::string section;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw config_error("toml line " + std::to_string(line_no) + ": bad section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      if (root.contains(section)) {
        throw config_error("toml line " + std::to_string(line_no) + ": duplicate section '" +
                           section + "'");
      }
      root[section] = json::object();
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw config_error("toml line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    json& target = section.empty() ? root : root[section];
    if (key.empty() || target.contains(key)) {
      throw config_error("toml line " + std::to_string(line_no) + ": bad or duplicate key");
    }
    target[key] = parse_toml_value(line.substr(eq + 1), line_no);
  }
  return root;
}

std::optional<std::string> process_env(const std::string& name) {
  const char* v = std::getenv(name.c_str());
  if (v == nullptr) return std::nullopt;
  return std::string(v);
}

RunConfig resolve_config(json file_tree, const std::filesystem::path& base_dir,
                         const std::vector<std::string>& overrides, const EnvLookup& env) {
  const json defaults = default_config();
  json tree = defaults;
  merge_file(tree, defaults, file_tree);

  for (const auto& [k, v] : defaults.items()) {
    if (v.is_object()) {
      for (const auto& [k2, unused] : v.items()) {
        if (auto s = env(env_name(k, k2))) tree[k][k2] = value_from_string(*s);
      }
    } else if (auto s = env(env_name("", k))) {
      tree[k] = value_from_string(*s);
    }
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw config_error("override '" + o + "' is not key=value");
    set_field(tree, defaults, trim(o.substr(0, eq)), value_from_string(o.substr(eq + 1)),
              "override");
  }

  for (const auto& [k, v] : defaults.items()) {
    if (v.is_object()) {
      for (const auto& [k2, d2] : v.items()) {
        if (!compatible(d2, tree[k][k2])) {
          throw config_error("field '" + k + "." + k2 + "' has the wrong type");
        }
      }
    } else if (!compatible(v, tree[k])) {
      throw config_error("field '" + k + "' has the wrong type");
    }
  }
  if (tree["seed"].is_null()) throw config_error("missing required field 'seed'");
  if (!tree["seed"].is_number_integer() || tree["seed"].get<long long>() < 0) {
    throw config_error("field 'seed' must be a non-negative integer");
  }
  if (!tree["output_dir"].is_string()) throw config_error("missing required field 'output_dir'");
  if (!tree["space"]["name"].is_string()) throw config_error("missing required field 'space.name'");

  RunConfig cfg{std::move(tree), base_dir};
  // Eager validation of every section so errors surface before any work.
  cfg.space();
  cfg.pretrain();
  cfg.augmentation();
  cfg.curriculum();
  cfg.finetune();
  cfg.search();
  for (const auto& [section, key] : {std::pair{"space", "table"}, {"pretrain", "unlabeled_file"},
                                     {"finetune", "labels"}, {"eval", "table"}}) {
    if (auto p = cfg.path(section, key); p && !std::filesystem::exists(*p)) {
      throw config_error(std::string("field '") + section + "." + key + "': file '" +
                         p->string() + "' does not exist");
    }
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& file, const std::vector<std::string>& overrides,
                      const EnvLookup& env) {
  std::ifstream in(file);
  if (!in) throw config_error("cannot open config file '" + file.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  json tree;
  if (file.extension() == ".json") {
    try {
      tree = json::parse(buf.str());
    } catch (const json::exception& e) {
      throw config_error("config JSON: " + std::string(e.what()));
    }
  } else {
    tree = parse_toml(buf.str());
  }
  return resolve_config(std::move(tree), std::filesystem::absolute(file).parent_path(),
                        overrides, env);
}

std::uint64_t RunConfig::seed() const { return tree.at("seed").get<std::uint64_t>(); }

std::filesystem::path RunConfig::output_dir() const {
  const std::filesystem::path p = tree.at("output_dir").get<std::string>();
  return p.is_absolute() ? p : base_dir / p;
}

std::optional<std::filesystem::path> RunConfig::path(const std::string& section,
                                                     const std::string& key) const {
  const json& v = field(tree, section, key);
  if (v.is_null()) return std::nullopt;
  if (!v.is_string()) throw config_error("field '" + section + "." + key + "' must be a path");
  const std::filesystem::path p = v.get<std::string>();
  return p.is_absolute() ? p : base_dir / p;
}

SearchSpaceSpec RunConfig::space() const {
  const auto name = get<std::string>(tree, "space", "name");
  try {
    return SearchSpaceSpec::by_name(name);
  } catch (const Error&) {
    throw config_error("field 'space.name': unknown space '" + name + "'");
  }
}

SyntheticOracle RunConfig::oracle() const {
  return SyntheticOracle::for_space(space(), get<std::uint64_t>(tree, "space", "oracle_seed"),
                                    get<double>(tree, "space", "noise"));
}

ContrastiveConfig RunConfig::pretrain() const {
  ContrastiveConfig c;
  c.temperature = get<double>(tree, "pretrain", "temperature");
  c.rbf_sigma = get<double>(tree, "pretrain", "rbf_sigma");
  c.bank_capacity = get<int>(tree, "pretrain", "bank_capacity");
  c.batch_size = get<int>(tree, "pretrain", "batch_size");
  c.epochs = get<int>(tree, "pretrain", "epochs");
  c.lr = get<double>(tree, "pretrain", "lr");
  c.momentum = get<double>(tree, "pretrain", "momentum");
  c.candidates = get<int>(tree, "pretrain", "candidates");
  c.hidden = get<int>(tree, "pretrain", "hidden");
  c.layers = get<int>(tree, "pretrain", "layers");
  c.selection = parse_enum(tree, "pretrain", "selection", positive_selection_from_string);
  c.normalize_embeddings = get<bool>(tree, "pretrain", "normalize_embeddings");
  if (get<int>(tree, "pretrain", "checkpoint_every") < 0) {
    throw config_error("field 'pretrain.checkpoint_every' must be >= 0");
  }
  if (get<int>(tree, "pretrain", "unlabeled") < 1) {
    throw config_error("field 'pretrain.unlabeled' must be positive");
  }
  return checked(c, "pretrain");
}

AugmentationSpec RunConfig::augmentation() const {
  AugmentationSpec a;
  a.method = parse_enum(tree, "pretrain", "augment_method", augment_method_from_string);
  if (!field(tree, "pretrain", "augment_ratio").is_null()) {
    a.ratio = get<double>(tree, "pretrain", "augment_ratio");
  }
  a.candidates = get<int>(tree, "pretrain", "candidates");
  return checked(a, "pretrain");
}

CurriculumConfig RunConfig::curriculum() const {
  CurriculumConfig c;
  c.tau_start = get<double>(tree, "curriculum", "tau_start");
  c.tau_end = get<double>(tree, "curriculum", "tau_end");
  c.sigma = get<double>(tree, "curriculum", "sigma");
  c.frequency = get<double>(tree, "curriculum", "frequency");
  c.amplitude = get<double>(tree, "curriculum", "amplitude");
  c.selection_mode = parse_enum(tree, "curriculum", "selection_mode", selection_mode_from_string);
  return checked(c, "curriculum");
}

FinetuneConfig RunConfig::finetune() const {
  FinetuneConfig f;
  f.loss = parse_enum(tree, "finetune", "loss", loss_kind_from_string);
  f.lr = get<double>(tree, "finetune", "lr");
  f.max_epochs = get<int>(tree, "finetune", "max_epochs");
  f.patience = get<int>(tree, "finetune", "patience");
  f.min_delta = get<double>(tree, "finetune", "min_delta");
  f.head_hidden = get<int>(tree, "finetune", "head_hidden");
  f.freeze_encoder = get<bool>(tree, "finetune", "freeze_encoder");
  f.holdout_fraction = get<double>(tree, "finetune", "holdout_fraction");
  if (get<int>(tree, "finetune", "label_count") < 2) {
    throw config_error("field 'finetune.label_count' must be at least 2");
  }
  return checked(f, "finetune");
}

SearchConfig RunConfig::search() const {
  SearchConfig s;
  s.strategy = parse_enum(tree, "search", "strategy", search_strategy_from_string);
  s.iterations = get<int>(tree, "search", "iterations");
  s.samples = get<int>(tree, "search", "samples");
  s.top_k = get<int>(tree, "search", "top_k");
  s.population = get<int>(tree, "search", "population");
  s.max_population = get<int>(tree, "search", "max_population");
  s.policy_lr = get<double>(tree, "search", "policy_lr");
  s.baseline_decay = get<double>(tree, "search", "baseline_decay");
  s.seed = seed();
  return checked(s, "search");
}

std::string RunConfig::digest() const { return Digest{fnv1a64(tree.dump())}.hex(); }

json RunConfig::echo() const {
  return {{"config", tree},
          {"seed", seed()},
          {"config_digest", digest()},
          {"code_version", kCodeVersion},
          {"base_dir", base_dir.string()}};
}

}  // namespace dclp
