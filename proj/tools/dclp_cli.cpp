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


// dclp: pretrain | finetune | eval | search | oracle-export.
//
// Exit codes: 0 ok, 2 config, 3 artifact incompatibility, 4 runtime.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dclp/config.hpp"
#include "dclp/evalkit.hpp"
#include "dclp/predictor.hpp"
#include "dclp/pretrain.hpp"
#include "dclp/search.hpp"
#include "dclp/spaces.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dclp;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitArtifact = 3;
constexpr int kExitRuntime = 4;

// Independent stream per stage so stages can be rerun in isolation.
Rng stage_rng(std::uint64_t seed, const char* stage) {
  return Rng(splitmix64(hash_combine(seed, fnv1a64(stage))));
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

json read_json(const fs::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kArtifact, std::string("cannot open ") + what + " '" +
                                                 path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kArtifact, std::string(what) + " is not valid JSON: " + e.what());
  }
}

void write_echo(const RunConfig& cfg, const std::string& stage) {
  json echo = cfg.echo();
  echo["stage"] = stage;
  write_text(cfg.output_dir() / (stage + "_config.json"), echo.dump(2) + "\n");
}

// The benchmark file when configured, else the seeded synthetic table.
BenchmarkTable ground_truth(const RunConfig& cfg) {
  const SearchSpaceSpec space = cfg.space();
  if (auto p = cfg.path("space", "table")) return load_table(*p, space);
  Rng rng(splitmix64(cfg.tree["space"]["oracle_seed"].get<std::uint64_t>()));
  return synthetic_table(space, cfg.oracle(),
                         cfg.tree["space"]["synthetic_size"].get<std::size_t>(), rng);
}

std::vector<std::size_t> sample_indices(std::size_t population, std::size_t count, Rng& rng) {
  if (count > population) throw runtime_error("requested more samples than the table holds");
  std::vector<std::size_t> idx(population);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < count; ++i) std::swap(idx[i], idx[i + uniform_index(rng, population - i)]);
  idx.resize(count);
  return idx;
}

// Labelled split: the labels file when given, else a seeded sample of the
// ground-truth table.
std::vector<LabeledSample> labeled_set(const RunConfig& cfg, const BenchmarkTable& table) {
  std::vector<LabeledSample> out;
  if (auto p = cfg.path("finetune", "labels")) {
    const BenchmarkTable labels = load_table(*p, cfg.space());
    for (const auto& r : labels.records()) out.push_back({r.graph, r.accuracy});
    return out;
  }
  Rng rng = stage_rng(cfg.seed(), "labels");
  for (std::size_t i : sample_indices(table.size(), cfg.tree["finetune"]["label_count"], rng)) {
    out.push_back({table.records()[i].graph, table.records()[i].accuracy});
  }
  return out;
}

void check_encoder_shape(const nn::EncoderParams& enc, const SearchSpaceSpec& space) {
  const auto vocab = space.encoding_vocabulary();
  if (enc.input_width != static_cast<int>(vocab.size())) {
    throw Error(ErrorKind::kArtifact,
                "encoder input width " + std::to_string(enc.input_width) + " does not match space '" +
                    space.name + "' vocabulary size " + std::to_string(vocab.size()));
  }
}

Predictor load_predictor(const fs::path& path, const SearchSpaceSpec& space) {
  Predictor p = predictor_from_json(read_json(path, "predictor checkpoint"));
  if (p.vocabulary != space.encoding_vocabulary()) {
    throw Error(ErrorKind::kArtifact, "predictor vocabulary does not match space '" + space.name + "'");
  }
  return p;
}

std::string epoch_csv(std::span<const double> losses) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,loss\n";
  for (std::size_t i = 0; i < losses.size(); ++i) out << i + 1 << ',' << losses[i] << '\n';
  return out.str();
}

int run_pretrain(const RunConfig& cfg) {
  const SearchSpaceSpec space = cfg.space();
  const auto vocab = space.encoding_vocabulary();
  std::vector<CellGraph> unlabeled;
  if (auto p = cfg.path("pretrain", "unlabeled_file")) {
    const BenchmarkTable file = load_table(*p, space);
    for (const auto& r : file.records()) unlabeled.push_back(r.graph);
  } else {
    const BenchmarkTable table = ground_truth(cfg);
    Rng pick = stage_rng(cfg.seed(), "unlabeled");
    for (std::size_t i :
         sample_indices(table.size(), cfg.tree["pretrain"]["unlabeled"].get<std::size_t>(), pick)) {
      unlabeled.push_back(table.records()[i].graph);
    }
  }
  const ContrastiveConfig pc = cfg.pretrain();
  Rng rng = stage_rng(cfg.seed(), "pretrain");
  auto params = nn::init_encoder(static_cast<int>(vocab.size()), pc.hidden, pc.layers, rng);
  const fs::path out = cfg.output_dir();
  PretrainOptions options;
  const int every = cfg.tree["pretrain"]["checkpoint_every"].get<int>();
  if (every > 0) {
    options.on_epoch_end = [&](int epoch, const nn::EncoderParams& p) {
      if (epoch % every != 0) return;
      std::ostringstream name;
      name << "encoder_epoch_" << std::setw(4) << std::setfill('0') << epoch << ".json";
      auto blob = nn::to_json(p);
      blob["config"] = cfg.echo();
      write_text(out / name.str(), blob.dump() + "\n");
    };
  }
  const auto result = pretrain(unlabeled, std::move(params), cfg.curriculum(), pc,
                               cfg.augmentation(), space.vocabulary, vocab, rng, options);
  write_echo(cfg, "pretrain");
  auto blob = nn::to_json(result.params);
  blob["config"] = cfg.echo();
  write_text(out / "encoder.json", blob.dump() + "\n");
  write_text(out / "pretrain_loss.csv", epoch_csv(result.epoch_losses));
  write_text(out / "pretrain_steps.csv", loss_trace_csv(result.steps));
  std::cout.precision(17);
  std::cout << "final_epoch_loss " << result.epoch_losses.back() << "\n";
  return 0;
}

int run_finetune(const RunConfig& cfg, const fs::path& checkpoint) {
  const SearchSpaceSpec space = cfg.space();
  const auto encoder = nn::encoder_from_json(read_json(checkpoint, "encoder checkpoint"));
  check_encoder_shape(encoder, space);
  std::vector<LabeledSample> labels;
  if (cfg.path("finetune", "labels")) {
    labels = labeled_set(cfg, BenchmarkTable(space));
  } else {
    labels = labeled_set(cfg, ground_truth(cfg));
  }
  Rng rng = stage_rng(cfg.seed(), "finetune");
  const auto result = finetune(encoder, labels, cfg.finetune(), space.encoding_vocabulary(), rng);
  write_echo(cfg, "finetune");
  write_text(cfg.output_dir() / "predictor.json", to_json(result.predictor).dump() + "\n");
  write_text(cfg.output_dir() / "finetune_loss.csv", epoch_csv(result.trace.epoch_losses));
  std::cout.precision(17);
  std::cout << "labels " << labels.size() << " batch_size " << result.trace.batch_size
            << " best_loss " << result.trace.best_loss << "\n";
  return 0;
}

RankReport write_rank_outputs(const RunConfig& cfg, std::span<const double> pred,
                              std::span<const double> truth, double wall) {
  RankReport report;
  report.tau = kendall_tau(pred, truth);
  report.n = pred.size();
  report.seed = cfg.seed();
  report.config_digest = cfg.digest();
  report.wall_time = wall;
  write_echo(cfg, "eval");
  write_text(cfg.output_dir() / "rank_report.json", to_json(report).dump(2) + "\n");
  if (cfg.tree["eval"]["scatter"].get<bool>()) {
    write_text(cfg.output_dir() / "rank_scatter.csv", rank_scatter_csv(pred, truth));
  }
  return report;
}

// "pred,true" rows with a header line.
void read_scores(const fs::path& path, std::vector<double>& pred, std::vector<double>& truth) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kArtifact, "cannot open scores file '" + path.string() + "'");
  std::string line;
  std::getline(in, line);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    double a = 0, b = 0;
    char comma = 0;
    if (!(row >> a >> comma >> b) || comma != ',') {
      throw Error(ErrorKind::kArtifact, "scores line " + std::to_string(line_no) + ": expected pred,true");
    }
    pred.push_back(a);
    truth.push_back(b);
  }
}

int run_eval(const RunConfig& cfg, const std::optional<fs::path>& predictor_path,
             const std::optional<fs::path>& scores) {
  const auto start = std::chrono::steady_clock::now();
  std::vector<double> pred, truth;
  if (scores) {
    read_scores(*scores, pred, truth);
  } else {
    if (!predictor_path) throw Error(ErrorKind::kConfig, "eval needs --predictor or --scores");
    const SearchSpaceSpec space = cfg.space();
    const Predictor p = load_predictor(*predictor_path, space);
    const BenchmarkTable table = cfg.path("eval", "table")
                                     ? load_table(*cfg.path("eval", "table"), space)
                                     : ground_truth(cfg);
    std::vector<CellGraph> graphs;
    for (const auto& r : table.records()) {
      graphs.push_back(r.graph);
      truth.push_back(r.accuracy);
    }
    pred = predict(p, graphs);
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const RankReport report = write_rank_outputs(cfg, pred, truth, wall);
  std::cout.precision(17);
  std::cout << "tau " << report.tau << "\n";
  return 0;
}

int run_search_cmd(const RunConfig& cfg, const fs::path& predictor_path) {
  const auto start = std::chrono::steady_clock::now();
  const SearchSpaceSpec space = cfg.space();
  const Predictor p = load_predictor(predictor_path, space);
  const BenchmarkTable table = ground_truth(cfg);
  const SearchDomain domain = domain_from_table(table);
  const SearchConfig sc = cfg.search();
  Rng rng = stage_rng(cfg.seed(), "search");
  const ScoreFn scorer = [&](std::span<const CellGraph> gs) { return predict(p, gs); };
  const Evaluator evaluator = [&](const CellGraph& g) { return lookup_performance(table, g); };
  const SearchReport report = run_search(domain, scorer, evaluator, sc, rng);
  if (!report.best) throw runtime_error("search kept no candidates (top_k = 0)");

  std::vector<double> population;
  for (const auto& r : table.records()) population.push_back(r.accuracy);
  RankReport rank;
  rank.percentile = percentile_rank(population, *report.best->truth);
  rank.query_budget = report.queries;
  rank.seed = cfg.seed();
  rank.config_digest = cfg.digest();
  rank.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  json pool = json::array();
  for (const auto& e : report.pool) pool.push_back(to_json(e));
  json out = {{"strategy", to_string(report.strategy)},
              {"best", to_json(*report.best)},
              {"report", to_json(rank)},
              {"pool", pool}};
  write_echo(cfg, "search");
  write_text(cfg.output_dir() / "search_log.jsonl", search_log_jsonl(report));
  write_text(cfg.output_dir() / "search_report.json", out.dump(2) + "\n");
  std::cout.precision(17);
  std::cout << json(report.best->graph).dump() << "\n";
  std::cout << "accuracy " << *report.best->truth << " percentile " << *rank.percentile
            << " queries " << report.queries << "\n";
  return 0;
}

int run_oracle_export(const RunConfig& cfg, const std::optional<fs::path>& out_path) {
  const BenchmarkTable table = ground_truth(cfg);
  const fs::path out = out_path ? *out_path : cfg.output_dir() / "oracle_table.jsonl";
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_table(table, out);
  write_echo(cfg, "oracle_export");
  std::cout << "records " << table.size() << " -> " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Curriculum-guided contrastive pre-training for architecture performance predictors"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<int> workers;
  auto common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "Config file (.toml or .json)")->required();
    sub->add_option("--set", overrides, "Override, section.key=value (repeatable)");
    sub->add_option("--seed", seed, "Global seed");
    sub->add_option("-o,--output-dir", output_dir, "Output directory");
    sub->add_option("--workers", workers, "Parallel worker cap")->check(CLI::PositiveNumber);
  };

  auto* pre = app.add_subcommand("pretrain", "Contrastive pre-training of the encoder");
  common(pre);

  std::string checkpoint;
  std::optional<std::string> labels;
  auto* fin = app.add_subcommand("finetune", "Fine-tune a predictor on labelled cells");
  common(fin);
  fin->add_option("--checkpoint", checkpoint, "Encoder checkpoint")->required();
  fin->add_option("--labels", labels, "Labels file (benchmark JSON Lines)");

  std::optional<std::string> predictor_path, scores, table_path;
  auto* ev = app.add_subcommand("eval", "Kendall tau of a predictor against ground truth");
  common(ev);
  ev->add_option("--predictor", predictor_path, "Predictor checkpoint");
  ev->add_option("--scores", scores, "CSV of pred,true pairs instead of a predictor");
  ev->add_option("--table", table_path, "Benchmark table to rank");

  std::string search_predictor;
  std::optional<std::string> strategy;
  auto* se = app.add_subcommand("search", "Predictor-guided architecture search");
  common(se);
  se->add_option("--predictor", search_predictor, "Predictor checkpoint")->required();
  se->add_option("--strategy", strategy, "random | evolution | rl");

  std::optional<std::string> export_path;
  auto* ox = app.add_subcommand("oracle-export", "Write the synthetic benchmark table");
  common(ox);
  ox->add_option("--out", export_path, "Output JSON Lines file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (seed) overrides.push_back("seed=" + std::to_string(*seed));
    // Flag paths are relative to the working directory, not the config file.
    auto abs = [](const std::string& p) { return json(fs::absolute(p).string()).dump(); };
    if (output_dir) overrides.push_back("output_dir=" + abs(*output_dir));
    if (workers) overrides.push_back("workers=" + std::to_string(*workers));
    if (labels) overrides.push_back("finetune.labels=" + abs(*labels));
    if (table_path) overrides.push_back("eval.table=" + abs(*table_path));
    if (strategy) overrides.push_back("search.strategy=" + json(*strategy).dump());
    const RunConfig cfg = load_config(config_path, overrides);
    fs::create_directories(cfg.output_dir());

    if (*pre) return run_pretrain(cfg);
    if (*fin) return run_finetune(cfg, checkpoint);
    if (*ev) {
      return run_eval(cfg, predictor_path ? std::optional<fs::path>(*predictor_path) : std::nullopt,
                      scores ? std::optional<fs::path>(*scores) : std::nullopt);
    }
    if (*se) return run_search_cmd(cfg, search_predictor);
    if (*ox) {
      return run_oracle_export(cfg,
                               export_path ? std::optional<fs::path>(*export_path) : std::nullopt);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.kind()) {
      case ErrorKind::kConfig: return kExitConfig;
      case ErrorKind::kArtifact: return kExitArtifact;
      default: return kExitRuntime;
    }
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: malformed artifact: " << e.what() << "\n";
    return kExitArtifact;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitRuntime;
}
