/*
 * Copyright 2026 The sirank Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sirank/experiment.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_output(const std::string& content, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << content;
    return;
  }
  fs::path p(out_path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw sirank::error("cannot write " + out_path);
  out << content;
}

long long parse_budget(const std::string& text) {
  if (text == "full") return sirank::unbounded_budget;
  try {
    return std::stoll(text);
  } catch (const std::exception&) {
    throw sirank::error("budget must be a number or \"full\": " + text);
  }
}

int cmd_stats(const std::string& data_path, const std::vector<std::string>& curve_ks,
              const std::string& out_path) {
  auto d = sirank::parse_dataset_file(data_path);
  json summary = to_json(sirank::dataset_stats(d));
  if (!curve_ks.empty()) {
    std::vector<long long> ks;
    for (const auto& text : curve_ks) ks.push_back(parse_budget(text));
    json curve = json::array();
    for (const auto& [k, total] : sirank::budget_curve(d, ks)) {
      json point;
      point["k"] = (k == sirank::unbounded_budget) ? json("full") : json(k);
      point["selected"] = total;
      curve.push_back(std::move(point));
    }
    summary["budget_curve"] = curve;
  }
  write_output(summary.dump(2) + "\n", out_path);
  return 0;
}

int cmd_folds(const std::string& data_path, const std::string& categories_path,
              std::uint64_t seed, const std::string& out_path) {
  auto d = sirank::parse_dataset_file(data_path);
  sirank::fold_assignment folds =
      categories_path.empty()
          ? sirank::assign_folds(d.concepts(), seed)
          : sirank::assign_folds(d.concepts(),
                                 sirank::parse_categories_file(categories_path), seed);
  write_output(to_json(folds).dump(2) + "\n", out_path);
  return 0;
}

int cmd_sample(const std::string& data_path, const std::string& strategy,
               const std::string& k_text, std::uint64_t seed,
               const std::string& scores_path, const std::string& out_path) {
  auto d = sirank::parse_dataset_file(data_path);
  const long long k = parse_budget(k_text);
  sirank::subset_selection selection;
  if (sirank::parse_strategy(strategy) == sirank::selection_strategy::random) {
    selection = sirank::sample_random_k(d, k, seed);
  } else {
    if (scores_path.empty()) throw sirank::error("top-k sampling needs --scores");
    selection = sirank::select_top_k(d, sirank::parse_scores_file(scores_path), k);
  }
  write_output(to_json(selection).dump(2) + "\n", out_path);
  return 0;
}

int cmd_evaluate(const std::string& data_path, const std::string& scores_path,
                 const std::vector<int>& cutoffs, const std::string& out_path) {
  auto d = sirank::parse_dataset_file(data_path);
  auto scores = sirank::parse_scores_file(scores_path);
  json per_concept;
  json summary;
  for (int cutoff : cutoffs) {
    const std::string key = "ndcg@" + std::to_string(cutoff);
    summary[key] = sirank::macro_ndcg(d, scores, static_cast<std::size_t>(cutoff));
    for (const auto& concept_key : d.concepts()) {
      auto ranked = sirank::rank_concept(d, scores, concept_key);
      per_concept[concept_key][key] =
          sirank::ndcg(ranked, static_cast<std::size_t>(cutoff)).ndcg;
    }
  }
  summary["concepts"] = per_concept;
  write_output(summary.dump(2) + "\n", out_path);
  return 0;
}

int cmd_ensemble(const std::vector<std::string>& score_paths,
                 const std::string& out_path) {
  std::vector<sirank::score_table> tables;
  tables.reserve(score_paths.size());
  for (const auto& path : score_paths) tables.push_back(sirank::parse_scores_file(path));
  auto averaged = sirank::ensemble_average(tables);
  std::ostringstream out;
  sirank::emit_scores(averaged, out);
  write_output(out.str(), out_path);
  return 0;
}

int cmd_select_epoch(const std::string& data_path,
                     const std::vector<std::string>& score_paths, int cutoff,
                     const std::string& out_path) {
  auto validation = sirank::parse_dataset_file(data_path);
  std::vector<sirank::epoch_entry> epochs;
  for (std::size_t i = 0; i < score_paths.size(); ++i)
    epochs.push_back({static_cast<int>(i) + 1, score_paths[i], score_paths[i]});
  auto choice = sirank::select_best_epoch(epochs, validation, cutoff);
  json result{{"epoch", choice.epoch},
              {"file", choice.test_scores.string()},
              {"validation_ndcg", choice.validation_ndcg}};
  write_output(result.dump(2) + "\n", out_path);
  return 0;
}

int cmd_plot_data(const std::string& report_path, const std::string& out_path) {
  std::ifstream in(report_path);
  if (!in) throw sirank::error("cannot open report file " + report_path);
  json obj = json::parse(in, nullptr, false);
  if (obj.is_discarded())
    throw sirank::error("malformed JSON in report file " + report_path);
  auto report = sirank::report_from_json(obj);
  std::ostringstream csv;
  sirank::write_report_csv(report, csv);
  write_output(csv.str(), out_path);
  return 0;
}

int cmd_annotate(const std::string& data_path, const std::string& train_path,
                 const sirank::llm_settings& llm, const std::string& out_dir) {
  auto d = sirank::parse_dataset_file(data_path);
  auto train = sirank::parse_dataset_file(train_path);
  auto few_shot = sirank::select_few_shot(train, llm.few_shot_seed);

  std::shared_ptr<sirank::annotation_cache> cache;
  if (!llm.cache_path.empty())
    cache = std::make_shared<sirank::annotation_cache>(llm.cache_path);

  fs::create_directories(out_dir);
  int rc = 0;
  for (sirank::prompt_variant variant : llm.variants) {
    auto tmpl = sirank::prompt_template::load(
        variant, llm.templates_dir / (sirank::variant_name(variant) + ".txt"));
    sirank::endpoint_config ecfg;
    ecfg.url = llm.endpoint;
    ecfg.model = llm.model;
    ecfg.variant = variant;
    ecfg.guided_choice = llm.guided_choice;
    ecfg.api_key_env = llm.api_key_env;
    sirank::annotator ann(ecfg, tmpl, few_shot, cache);
    auto outcome = ann.annotate_batch(d, llm.max_in_flight);

    const std::string name = sirank::variant_name(variant);
    std::ostringstream annotations;
    sirank::emit_annotations(outcome.results, annotations);
    write_output(annotations.str(),
                 (fs::path(out_dir) / ("annotations_" + name + ".jsonl")).string());
    std::ostringstream scores;
    sirank::emit_scores(outcome.scores, scores);
    write_output(scores.str(),
                 (fs::path(out_dir) / ("scores_" + name + ".jsonl")).string());

    json summary{{"variant", name},
                 {"annotated", outcome.results.size()},
                 {"failures", outcome.failures.size()}};
    if (!outcome.failures.empty()) {
      json failed = json::array();
      for (const auto& [id, message] : outcome.failures)
        failed.push_back({{"id", id}, {"error", message}});
      summary["failed"] = failed;
      rc = 1;
    }
    std::cout << summary.dump(2) << "\n";
  }
  return rc;
}

int cmd_experiment(const sirank::experiment_config& cfg) {
  if (cfg.strategy == sirank::experiment_strategy::llm) {
    auto rows = sirank::run_llm_experiment(cfg);
    std::ostringstream table;
    sirank::write_llm_report_csv(rows, cfg.cutoffs, table);
    std::cout << table.str();
    int rc = 0;
    for (const auto& row : rows)
      if (row.failures > 0) rc = 1;
    return rc;
  }

  auto report = sirank::run_budget_experiment(cfg);
  std::cout << "selection manifests written: " << report.manifests_written << "\n";
  if (!report.evaluated) {
    if (!report.missing_cells.empty()) {
      std::cerr << "score files missing for " << report.missing_cells.size()
                << " grid cells:\n";
      for (const auto& cell : report.missing_cells) std::cerr << "  " << cell << "\n";
      return 1;
    }
    std::cout << "no score files configured; selection phase only\n";
    return 0;
  }
  std::ostringstream table;
  sirank::write_report_csv(report.aggregated, table);
  std::cout << table.str();
  std::cout << "report written to " << (cfg.out_dir / "report.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Annotation-budget simulation and evaluation toolkit for "
               "statutory-interpretation sentence ranking"};
  app.require_subcommand(1);

  std::string data_path, train_path, scores_path, categories_path, out_path;
  std::string strategy = "random";
  std::string k_text = "100";
  std::uint64_t seed = 0;
  std::vector<int> cutoffs = {10, 100};
  std::vector<std::string> score_paths;
  int cutoff = 10;

  auto* stats = app.add_subcommand("stats", "Summarize a dataset");
  std::vector<std::string> curve_ks;
  stats->add_option("--data", data_path, "dataset JSONL file")->required();
  stats->add_option("--curve", curve_ks,
                    "also report total selected sentences for these budgets");
  stats->add_option("--out", out_path, "output file (default stdout)");

  auto* folds = app.add_subcommand("folds", "Assign concepts to stratified folds");
  folds->add_option("--data", data_path, "dataset JSONL file")->required();
  folds->add_option("--categories", categories_path, "concept category JSON map");
  folds->add_option("--seed", seed, "shuffle seed");
  folds->add_option("--out", out_path, "output file (default stdout)");

  auto* sample = app.add_subcommand("sample", "Select up to k sentences per concept");
  sample->add_option("--data", data_path, "dataset JSONL file")->required();
  sample->add_option("--strategy", strategy, "random or top-k");
  sample->add_option("--k", k_text, "budget per concept, or \"full\"")->required();
  sample->add_option("--seed", seed, "random strategy seed");
  sample->add_option("--scores", scores_path, "score file for top-k");
  sample->add_option("--out", out_path, "output file (default stdout)");

  auto* evaluate = app.add_subcommand("evaluate", "Macro NDCG of a score table");
  evaluate->add_option("--data", data_path, "gold dataset JSONL file")->required();
  evaluate->add_option("--scores", scores_path, "score JSONL file")->required();
  evaluate->add_option("--cutoffs", cutoffs, "NDCG cutoffs");
  evaluate->add_option("--out", out_path, "output file (default stdout)");

  auto* ensemble = app.add_subcommand("ensemble", "Average score tables (voting)");
  ensemble->add_option("--scores", score_paths, "score JSONL files")
      ->required()
      ->expected(-1);
  ensemble->add_option("--out", out_path, "output file (default stdout)");

  auto* select_epoch =
      app.add_subcommand("select-epoch", "Pick the epoch with best validation NDCG");
  select_epoch->add_option("--data", data_path, "validation dataset JSONL")->required();
  select_epoch
      ->add_option("--scores", score_paths, "per-epoch validation score files, in order")
      ->required()
      ->expected(-1);
  select_epoch->add_option("--cutoff", cutoff, "NDCG cutoff (default 10)");
  select_epoch->add_option("--out", out_path, "output file (default stdout)");

  auto* plot = app.add_subcommand("plot-data", "Long-form CSV from a report JSON");
  plot->add_option("--report", data_path, "report JSON file")->required();
  plot->add_option("--out", out_path, "output CSV file (default stdout)");

  // annotate and experiment share the endpoint options
  std::string config_path, endpoint, model, templates_dir = "templates";
  std::string api_key_env = "SIRANK_API_KEY";
  std::string cache_path;
  std::vector<std::string> variant_names;
  std::vector<std::string> k_list;
  std::vector<std::uint64_t> seeds;
  int max_in_flight = 8;
  std::uint64_t few_shot_seed = 0;
  bool no_guided = false;

  auto* annotate =
      app.add_subcommand("annotate", "Annotate a dataset via an LLM endpoint");
  annotate->add_option("--data", data_path, "sentences to annotate (JSONL)")->required();
  annotate->add_option("--train", train_path, "training split for few-shot examples")
      ->required();
  annotate->add_option("--endpoint", endpoint, "chat-completions base URL")->required();
  annotate->add_option("--model", model, "model name")->required();
  annotate->add_option("--variant", variant_names, "original and/or improved");
  annotate->add_option("--templates", templates_dir, "template directory");
  annotate->add_option("--few-shot-seed", few_shot_seed, "few-shot selection seed");
  annotate->add_option("--max-in-flight", max_in_flight, "concurrent requests");
  annotate->add_option("--cache", cache_path, "annotation cache file");
  annotate->add_option("--api-key-env", api_key_env,
                       "environment variable holding the API key");
  annotate->add_flag("--no-guided", no_guided, "skip the guided-choice request field");
  annotate->add_option("--out", out_path, "output directory")->required();

  auto* experiment =
      app.add_subcommand("experiment", "Run a configured experiment grid");
  experiment->add_option("--config", config_path, "experiment config JSON")->required();
  experiment->add_option("--strategy", strategy, "override: random, top-k or llm");
  experiment->add_option("--k", k_list, "override: budget list (numbers or \"full\")");
  experiment->add_option("--seeds", seeds, "override: seed list");
  experiment->add_option("--cutoffs", cutoffs, "override: NDCG cutoffs");
  experiment->add_option("--endpoint", endpoint, "override: endpoint URL");
  experiment->add_option("--model", model, "override: model name");
  experiment->add_option("--variant", variant_names, "override: prompt variants");
  experiment->add_option("--max-in-flight", max_in_flight, "override: concurrency");
  experiment->add_option("--out", out_path, "override: output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (stats->parsed()) return cmd_stats(data_path, curve_ks, out_path);
    if (folds->parsed()) return cmd_folds(data_path, categories_path, seed, out_path);
    if (sample->parsed())
      return cmd_sample(data_path, strategy, k_text, seed, scores_path, out_path);
    if (evaluate->parsed())
      return cmd_evaluate(data_path, scores_path, cutoffs, out_path);
    if (ensemble->parsed()) return cmd_ensemble(score_paths, out_path);
    if (select_epoch->parsed())
      return cmd_select_epoch(data_path, score_paths, cutoff, out_path);
    if (plot->parsed()) return cmd_plot_data(data_path, out_path);

    if (annotate->parsed()) {
      sirank::llm_settings llm;
      llm.endpoint = endpoint;
      llm.model = model;
      if (!variant_names.empty()) {
        llm.variants.clear();
        for (const auto& name : variant_names)
          llm.variants.push_back(sirank::parse_variant(name));
      }
      llm.templates_dir = templates_dir;
      llm.few_shot_seed = few_shot_seed;
      llm.max_in_flight = max_in_flight;
      llm.guided_choice = !no_guided;
      llm.api_key_env = api_key_env;
      if (!cache_path.empty()) llm.cache_path = cache_path;
      return cmd_annotate(data_path, train_path, llm, out_path);
    }

    if (experiment->parsed()) {
      auto cfg = sirank::load_config(config_path);
      if (experiment->count("--strategy"))
        cfg.strategy = sirank::parse_experiment_strategy(strategy);
      if (!k_list.empty()) {
        cfg.ks.clear();
        for (const auto& text : k_list) cfg.ks.push_back(parse_budget(text));
      }
      if (!seeds.empty()) cfg.seeds = seeds;
      if (experiment->count("--cutoffs")) cfg.cutoffs = cutoffs;
      if (!endpoint.empty()) cfg.llm.endpoint = endpoint;
      if (!model.empty()) cfg.llm.model = model;
      if (!variant_names.empty()) {
        cfg.llm.variants.clear();
        for (const auto& name : variant_names)
          cfg.llm.variants.push_back(sirank::parse_variant(name));
      }
      if (experiment->count("--max-in-flight")) cfg.llm.max_in_flight = max_in_flight;
      if (!out_path.empty()) cfg.out_dir = out_path;
      return cmd_experiment(cfg);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
