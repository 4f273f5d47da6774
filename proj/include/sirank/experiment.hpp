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
#ifndef SIRANK_EXPERIMENT_HPP_
#define SIRANK_EXPERIMENT_HPP_

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "sirank/annotator.hpp"
#include "sirank/dataset.hpp"
#include "sirank/error.hpp"
#include "sirank/folds.hpp"
#include "sirank/metrics.hpp"
#include "sirank/sampling.hpp"

namespace sirank {

enum class experiment_strategy { random, top_k, llm };

inline std::string experiment_strategy_name(experiment_strategy s) {
  switch (s) {
    case experiment_strategy::random: return "random";
    case experiment_strategy::top_k: return "top-k";
    case experiment_strategy::llm: return "llm";
  }
  return "random";
}

inline experiment_strategy parse_experiment_strategy(const std::string& name) {
  if (name == "random") return experiment_strategy::random;
  if (name == "top-k" || name == "top_k") return experiment_strategy::top_k;
  if (name == "llm") return experiment_strategy::llm;
  throw error("unknown experiment strategy \"" + name + "\"");
}

/// One externally trained checkpoint: validation scores pick the epoch, test
/// scores feed the reported metrics.
struct epoch_entry {
  int epoch = 0;
  std::filesystem::path validation_scores;
  std::filesystem::path test_scores;
};

/// Score files delivered by the external trainer for one grid cell.
struct cell_scores {
  long long k = 0;
  int split = 0;
  std::uint64_t seed = 0;
  std::vector<epoch_entry> epochs;
};

struct llm_settings {
  std::string endpoint;
  std::string model;
  std::vector<prompt_variant> variants = {prompt_variant::original,
                                          prompt_variant::improved};
  std::filesystem::path templates_dir = "templates";
  int max_in_flight = 8;
  std::uint64_t few_shot_seed = 0;
  std::filesystem::path cache_path;  // empty disables the cache
  bool guided_choice = true;
  std::string api_key_env = "SIRANK_API_KEY";
};

struct experiment_config {
  std::filesystem::path dataset_path;
  std::filesystem::path categories_path;  // optional
  std::filesystem::path folds_path;       // optional; computed when absent
  std::uint64_t fold_seed = 0;
  experiment_strategy strategy = experiment_strategy::random;
  std::vector<long long> ks = {100, 200, 300, 400, 500,
                               600, 700, 800, 900, 1000};
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::vector<int> cutoffs = {10, 100};
  std::map<int, std::filesystem::path> ranking_scores;  // split -> file, top-k only
  std::vector<cell_scores> scores;
  llm_settings llm;
  std::filesystem::path out_dir = "out";
};

namespace detail {

inline std::filesystem::path resolve(const std::filesystem::path& base,
                                     const std::filesystem::path& p) {
  return p.is_absolute() ? p : base / p;
}

inline long long budget_from_json(const nlohmann::json& value) {
  if (value.is_string()) {
    if (value.get<std::string>() == "full") return unbounded_budget;
    throw error("budget must be a number or \"full\"");
  }
  if (!value.is_number_integer()) throw error("budget must be a number or \"full\"");
  const long long k = value.get<long long>();
  if (k < 0) throw error("budget must be non-negative");
  return k;
}

inline std::string budget_label(long long k) {
  return k == unbounded_budget ? "full" : std::to_string(k);
}

// %.17g round-trips doubles exactly through strtod.
inline std::string format_double(double v) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

}  // namespace detail

/// Loads a single-document JSON config. All relative paths resolve against
/// the config file's directory.
inline experiment_config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw error("cannot open config file " + path.string());
  nlohmann::json obj = nlohmann::json::parse(in, nullptr, false);
  if (obj.is_discarded()) throw error("malformed JSON in config file " + path.string());

  const std::filesystem::path base = path.parent_path();
  experiment_config cfg;
  if (!obj.contains("dataset")) throw error("config is missing \"dataset\"");
  cfg.dataset_path = detail::resolve(base, obj["dataset"].get<std::string>());
  if (obj.contains("categories"))
    cfg.categories_path = detail::resolve(base, obj["categories"].get<std::string>());
  if (obj.contains("folds"))
    cfg.folds_path = detail::resolve(base, obj["folds"].get<std::string>());
  if (obj.contains("fold_seed")) cfg.fold_seed = obj["fold_seed"].get<std::uint64_t>();
  if (obj.contains("strategy"))
    cfg.strategy = parse_experiment_strategy(obj["strategy"].get<std::string>());
  if (obj.contains("k")) {
    cfg.ks.clear();
    for (const auto& value : obj["k"]) cfg.ks.push_back(detail::budget_from_json(value));
    if (cfg.ks.empty()) throw error("config \"k\" list is empty");
  }
  if (obj.contains("seeds")) {
    cfg.seeds = obj["seeds"].get<std::vector<std::uint64_t>>();
    if (cfg.seeds.empty()) throw error("config \"seeds\" list is empty");
  }
  if (obj.contains("cutoffs")) {
    cfg.cutoffs = obj["cutoffs"].get<std::vector<int>>();
    if (cfg.cutoffs.empty()) throw error("config \"cutoffs\" list is empty");
  }
  if (obj.contains("ranking_scores")) {
    for (const auto& [split, file] : obj["ranking_scores"].items())
      cfg.ranking_scores[std::stoi(split)] =
          detail::resolve(base, file.get<std::string>());
  }
  if (obj.contains("scores")) {
    for (const auto& cell : obj["scores"]) {
      cell_scores cs;
      cs.k = detail::budget_from_json(cell.at("k"));
      cs.split = cell.at("split").get<int>();
      cs.seed = cell.at("seed").get<std::uint64_t>();
      for (const auto& e : cell.at("epochs")) {
        epoch_entry entry;
        entry.epoch = e.at("epoch").get<int>();
        entry.validation_scores =
            detail::resolve(base, e.at("validation").get<std::string>());
        entry.test_scores = detail::resolve(base, e.at("test").get<std::string>());
        cs.epochs.push_back(std::move(entry));
      }
      cfg.scores.push_back(std::move(cs));
    }
  }
  if (obj.contains("llm")) {
    const auto& llm = obj["llm"];
    if (llm.contains("endpoint")) cfg.llm.endpoint = llm["endpoint"].get<std::string>();
    if (llm.contains("model")) cfg.llm.model = llm["model"].get<std::string>();
    if (llm.contains("variants")) {
      cfg.llm.variants.clear();
      for (const auto& v : llm["variants"])
        cfg.llm.variants.push_back(parse_variant(v.get<std::string>()));
    }
    if (llm.contains("templates"))
      cfg.llm.templates_dir = detail::resolve(base, llm["templates"].get<std::string>());
    if (llm.contains("max_in_flight"))
      cfg.llm.max_in_flight = llm["max_in_flight"].get<int>();
    if (llm.contains("few_shot_seed"))
      cfg.llm.few_shot_seed = llm["few_shot_seed"].get<std::uint64_t>();
    if (llm.contains("cache"))
      cfg.llm.cache_path = detail::resolve(base, llm["cache"].get<std::string>());
    if (llm.contains("guided")) cfg.llm.guided_choice = llm["guided"].get<bool>();
    if (llm.contains("api_key_env"))
      cfg.llm.api_key_env = llm["api_key_env"].get<std::string>();
  }
  if (obj.contains("out"))
    cfg.out_dir = detail::resolve(base, obj["out"].get<std::string>());
  return cfg;
}

struct epoch_choice {
  int epoch = 0;
  std::filesystem::path test_scores;
  double validation_ndcg = 0.0;
};

/// Picks the epoch whose validation macro NDCG@cutoff is maximal; earlier
/// epochs win ties.
inline epoch_choice select_best_epoch(const std::vector<epoch_entry>& epochs,
                                      const dataset& validation, int cutoff = 10) {
  if (epochs.empty()) throw error("no epochs to select from");
  std::vector<epoch_entry> ordered = epochs;
  std::sort(ordered.begin(), ordered.end(),
            [](const epoch_entry& a, const epoch_entry& b) { return a.epoch < b.epoch; });
  std::optional<epoch_choice> best;
  for (const epoch_entry& entry : ordered) {
    score_table scores;
    try {
      scores = parse_scores_file(entry.validation_scores);
    } catch (const std::exception& e) {
      throw error("epoch " + std::to_string(entry.epoch) + ": " + e.what());
    }
    const double value =
        macro_ndcg(validation, scores, static_cast<std::size_t>(cutoff));
    if (!best || value > best->validation_ndcg)
      best = epoch_choice{entry.epoch, entry.test_scores, value};
  }
  return *best;
}

/// Derives or loads the fold assignment for a dataset and checks that every
/// dataset concept is assigned.
inline fold_assignment folds_for(const experiment_config& cfg, const dataset& d) {
  fold_assignment folds;
  if (!cfg.folds_path.empty()) {
    folds = load_folds_file(cfg.folds_path);
  } else if (!cfg.categories_path.empty()) {
    folds = assign_folds(d.concepts(), parse_categories_file(cfg.categories_path),
                         cfg.fold_seed);
  } else {
    folds = assign_folds(d.concepts(), cfg.fold_seed);
  }
  std::set<std::string> assigned;
  for (const auto& fold : folds.folds) assigned.insert(fold.begin(), fold.end());
  for (const auto& concept_key : d.concepts())
    if (!assigned.count(concept_key))
      throw error("concept \"" + concept_key + "\" is not assigned to any fold");
  return folds;
}

struct budget_report {
  std::vector<run_result> runs;
  aggregate_report aggregated;
  std::vector<std::string> missing_cells;
  std::size_t manifests_written = 0;
  bool evaluated = false;  // scores were supplied and the grid was complete
};

/// CSV with columns k, metric, mean, std; one row per (k, cutoff), k rows
/// ascending with "full" last. Values print at full precision so parsing the
/// CSV reproduces them exactly.
inline void write_report_csv(const aggregate_report& report, std::ostream& out) {
  out << "k,metric,mean,std\n";
  for (const auto& [k, per_cutoff] : report)
    for (const auto& [cutoff, stat] : per_cutoff)
      out << detail::budget_label(k) << ",ndcg@" << cutoff << ","
          << detail::format_double(stat.mean) << ","
          << detail::format_double(stat.stddev) << "\n";
}

inline nlohmann::json report_to_json(const aggregate_report& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& [k, per_cutoff] : report)
    for (const auto& [cutoff, stat] : per_cutoff) {
      nlohmann::json row;
      if (k == unbounded_budget)
        row["k"] = "full";
      else
        row["k"] = k;
      row["metric"] = "ndcg@" + std::to_string(cutoff);
      row["mean"] = stat.mean;
      row["std"] = stat.stddev;
      rows.push_back(std::move(row));
    }
  return nlohmann::json{{"rows", rows}};
}

inline aggregate_report report_from_json(const nlohmann::json& obj) {
  aggregate_report report;
  if (!obj.contains("rows")) throw error("report JSON is missing \"rows\"");
  for (const auto& row : obj["rows"]) {
    const long long k = detail::budget_from_json(row.at("k"));
    const std::string metric = row.at("metric").get<std::string>();
    if (metric.rfind("ndcg@", 0) != 0)
      throw error("unknown metric \"" + metric + "\" in report");
    const int cutoff = std::stoi(metric.substr(5));
    report[k][cutoff] =
        metric_stat{row.at("mean").get<double>(), row.at("std").get<double>()};
  }
  return report;
}

inline nlohmann::json runs_to_json(const std::vector<run_result>& runs) {
  nlohmann::json list = nlohmann::json::array();
  for (const run_result& run : runs) {
    nlohmann::json row;
    if (run.k == unbounded_budget)
      row["k"] = "full";
    else
      row["k"] = run.k;
    row["split"] = run.split;
    row["seed"] = run.seed;
    nlohmann::json at;
    for (const auto& [cutoff, value] : run.ndcg_at)
      at[std::to_string(cutoff)] = value;
    row["ndcg"] = at;
    list.push_back(std::move(row));
  }
  return nlohmann::json{{"runs", list}};
}

namespace detail {

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw error("cannot write " + path.string());
  out << content;
}

inline std::string cell_name(long long k, int split, std::uint64_t seed) {
  return "k-" + budget_label(k) + "_split-" + std::to_string(split) + "_seed-" +
         std::to_string(seed);
}

}  // namespace detail

/// Two-phase budget experiment.
///
/// Phase one always runs: for every grid cell (k, split, seed) the selection
/// over the split's three training folds is computed and written under
/// <out>/selections/ for the external trainer; manifests are byte-identical
/// across reruns of the same config. Phase two runs when score files are
/// supplied: per cell the best epoch is chosen on the validation fold and the
/// test-fold metrics are aggregated split-then-seed. An incomplete score grid
/// is reported through `missing_cells`, never by discarding phase one.
inline budget_report run_budget_experiment(const experiment_config& cfg) {
  if (cfg.strategy == experiment_strategy::llm)
    throw error("run_budget_experiment handles the random and top-k strategies");
  const dataset full = parse_dataset_file(cfg.dataset_path);
  const fold_assignment folds = folds_for(cfg, full);
  const cv_plan plan = make_cv_plan(folds);
  const dataset test_subset = full.restrict_to(folds.concepts_of(folds.test_folds));

  std::filesystem::create_directories(cfg.out_dir / "selections");
  detail::write_text_file(cfg.out_dir / "folds.json", to_json(folds).dump(2) + "\n");

  // per-split ranking scores for the top-k strategy
  std::map<int, score_table> ranking;
  if (cfg.strategy == experiment_strategy::top_k) {
    for (const cv_split& entry : plan.entries) {
      auto it = cfg.ranking_scores.find(entry.validation);
      if (it == cfg.ranking_scores.end())
        throw error("top-k strategy needs \"ranking_scores\" for split " +
                    std::to_string(entry.validation));
      ranking[entry.validation] = parse_scores_file(it->second);
    }
  }

  budget_report report;
  for (long long k : cfg.ks) {
    for (std::size_t split = 0; split < plan.entries.size(); ++split) {
      const cv_split& entry = plan.entries[split];
      const dataset train_subset =
          full.restrict_to(folds.concepts_of(entry.train));
      for (std::uint64_t seed : cfg.seeds) {
        const subset_selection selection =
            cfg.strategy == experiment_strategy::random
                ? sample_random_k(train_subset, k, seed)
                : select_top_k(train_subset, ranking.at(entry.validation), k);
        const std::filesystem::path manifest =
            cfg.out_dir / "selections" /
            (detail::cell_name(k, static_cast<int>(split), seed) + ".json");
        detail::write_text_file(manifest, to_json(selection).dump(2) + "\n");
        ++report.manifests_written;
      }
    }
  }

  if (cfg.scores.empty()) return report;  // selection-only phase

  std::map<std::tuple<long long, int, std::uint64_t>, const cell_scores*> by_cell;
  for (const cell_scores& cell : cfg.scores) {
    if (!by_cell.emplace(std::make_tuple(cell.k, cell.split, cell.seed), &cell).second)
      throw error("duplicate score entry for " +
                  detail::cell_name(cell.k, cell.split, cell.seed));
  }

  for (long long k : cfg.ks) {
    for (std::size_t split = 0; split < plan.entries.size(); ++split) {
      for (std::uint64_t seed : cfg.seeds) {
        auto it = by_cell.find(std::make_tuple(k, static_cast<int>(split), seed));
        if (it == by_cell.end()) {
          report.missing_cells.push_back(
              detail::cell_name(k, static_cast<int>(split), seed));
          continue;
        }
        const cv_split& entry = plan.entries[split];
        const dataset validation_subset =
            full.restrict_to(folds.concepts_of({entry.validation}));
        try {
          const epoch_choice choice =
              select_best_epoch(it->second->epochs, validation_subset);
          const score_table test_scores = parse_scores_file(choice.test_scores);
          run_result run;
          run.k = k;
          run.split = static_cast<int>(split);
          run.seed = seed;
          for (int cutoff : cfg.cutoffs)
            run.ndcg_at[cutoff] =
                macro_ndcg(test_subset, test_scores, static_cast<std::size_t>(cutoff));
          report.runs.push_back(std::move(run));
        } catch (const std::exception& e) {
          throw error(detail::cell_name(k, static_cast<int>(split), seed) + ": " +
                      e.what());
        }
      }
    }
  }

  if (report.missing_cells.empty()) {
    report.aggregated = aggregate_runs(report.runs);
    report.evaluated = true;
    std::ostringstream csv;
    write_report_csv(report.aggregated, csv);
    detail::write_text_file(cfg.out_dir / "report.csv", csv.str());
    detail::write_text_file(cfg.out_dir / "report.json",
                            report_to_json(report.aggregated).dump(2) + "\n");
    detail::write_text_file(cfg.out_dir / "runs.json",
                            runs_to_json(report.runs).dump(2) + "\n");
  }
  return report;
}

struct llm_report_row {
  prompt_variant variant = prompt_variant::original;
  std::size_t annotated = 0;
  std::size_t failures = 0;
  double accuracy = 0.0;
  double f1 = 0.0;
  std::map<int, double> ndcg_at;
  bool complete = false;  // metrics valid only when every record annotated
};

inline void write_llm_report_csv(const std::vector<llm_report_row>& rows,
                                 const std::vector<int>& cutoffs, std::ostream& out) {
  out << "variant,accuracy,weighted_f1";
  for (int cutoff : cutoffs) out << ",ndcg@" << cutoff;
  out << ",annotated,failures\n";
  for (const llm_report_row& row : rows) {
    out << variant_name(row.variant) << ",";
    if (row.complete) {
      out << detail::format_double(row.accuracy) << ","
          << detail::format_double(row.f1);
      for (int cutoff : cutoffs)
        out << "," << detail::format_double(row.ndcg_at.at(cutoff));
    } else {
      out << ",";
      for (std::size_t i = 0; i < cutoffs.size(); ++i) out << ",";
    }
    out << "," << row.annotated << "," << row.failures << "\n";
  }
}

/// Automatic-annotation experiment: for each prompt variant, annotate the
/// test-fold sentences through the endpoint, then score the argmax labels
/// (accuracy, weighted F1) and the expected-score ranking (macro NDCG at the
/// configured cutoffs) against the gold labels. Few-shot examples come from
/// the cross-validation folds only.
inline std::vector<llm_report_row> run_llm_experiment(const experiment_config& cfg) {
  if (cfg.llm.endpoint.empty()) throw error("llm experiment needs an endpoint URL");
  if (cfg.llm.model.empty()) throw error("llm experiment needs a model name");
  const dataset full = parse_dataset_file(cfg.dataset_path);
  const fold_assignment folds = folds_for(cfg, full);
  const dataset train_subset = full.restrict_to(folds.concepts_of(folds.cv_folds));
  const dataset test_subset = full.restrict_to(folds.concepts_of(folds.test_folds));
  if (test_subset.empty()) throw error("test folds contain no sentences");
  for (const sentence_record& r : test_subset.records())
    if (!r.gold_label)
      throw error("test record \"" + r.id + "\" has no gold label");

  const few_shot_set few_shot = select_few_shot(train_subset, cfg.llm.few_shot_seed);
  std::shared_ptr<annotation_cache> cache;
  if (!cfg.llm.cache_path.empty())
    cache = std::make_shared<annotation_cache>(cfg.llm.cache_path);

  std::filesystem::create_directories(cfg.out_dir);

  std::vector<llm_report_row> rows;
  for (prompt_variant variant : cfg.llm.variants) {
    const prompt_template tmpl = prompt_template::load(
        variant, cfg.llm.templates_dir / (variant_name(variant) + ".txt"));

    endpoint_config ecfg;
    ecfg.url = cfg.llm.endpoint;
    ecfg.model = cfg.llm.model;
    ecfg.variant = variant;
    ecfg.guided_choice = cfg.llm.guided_choice;
    ecfg.api_key_env = cfg.llm.api_key_env;

    const annotator ann(ecfg, tmpl, few_shot, cache);
    const annotator::batch_outcome outcome =
        ann.annotate_batch(test_subset, cfg.llm.max_in_flight);

    llm_report_row row;
    row.variant = variant;
    row.annotated = outcome.results.size();
    row.failures = outcome.failures.size();

    std::ostringstream annotations;
    emit_annotations(outcome.results, annotations);
    detail::write_text_file(
        cfg.out_dir / ("annotations_" + variant_name(variant) + ".jsonl"),
        annotations.str());
    std::ostringstream scores;
    emit_scores(outcome.scores, scores);
    detail::write_text_file(cfg.out_dir / ("scores_" + variant_name(variant) + ".jsonl"),
                            scores.str());

    if (outcome.failures.empty() && !outcome.results.empty()) {
      std::vector<relevance_label> predicted, gold;
      predicted.reserve(outcome.results.size());
      gold.reserve(outcome.results.size());
      for (std::size_t i = 0; i < outcome.results.size(); ++i) {
        predicted.push_back(outcome.results[i].predicted);
        gold.push_back(*test_subset.records()[i].gold_label);
      }
      row.accuracy = accuracy(predicted, gold);
      row.f1 = weighted_f1(predicted, gold);
      for (int cutoff : cfg.cutoffs)
        row.ndcg_at[cutoff] = macro_ndcg(test_subset, outcome.scores,
                                         static_cast<std::size_t>(cutoff));
      row.complete = true;
    }
    rows.push_back(std::move(row));
  }

  std::ostringstream csv;
  write_llm_report_csv(rows, cfg.cutoffs, csv);
  detail::write_text_file(cfg.out_dir / "llm_report.csv", csv.str());
  return rows;
}

}  // namespace sirank

#endif  // SIRANK_EXPERIMENT_HPP_
