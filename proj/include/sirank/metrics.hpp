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
#ifndef SIRANK_METRICS_HPP_
#define SIRANK_METRICS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "sirank/dataset.hpp"
#include "sirank/error.hpp"
#include "sirank/labels.hpp"

namespace sirank {

/// One concept's sentences in rank order (descending score, ascending-id
/// tie-break) with their gold relevance values.
struct ranked_list {
  std::string concept_name;
  std::vector<std::string> ids;
  std::vector<int> relevances;
};

/// Discounted cumulative gain at cutoff k over 1-based positions:
/// sum of rel_i / log2(i + 1) for i = 1 .. min(k, length).
inline double dcg(std::span<const int> relevances, std::size_t k) {
  const std::size_t limit = std::min(k, relevances.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < limit; ++i)
    sum += static_cast<double>(relevances[i]) /
           std::log2(static_cast<double>(i) + 2.0);
  return sum;
}

struct ndcg_evaluation {
  std::size_t k = 0;
  double dcg = 0.0;
  double ideal_dcg = 0.0;  // the normalizer, DCG of the ideal ordering
  double ndcg = 0.0;
  bool degenerate = false;  // all relevances zero; ndcg fixed at 0
};

/// Normalized DCG at cutoff k. The normalizer is the DCG of the same
/// relevances sorted descending. When every relevance is zero the
/// normalizer vanishes and ndcg is defined as 0.
inline ndcg_evaluation ndcg(std::span<const int> relevances, std::size_t k) {
  ndcg_evaluation eval;
  eval.k = k;
  eval.dcg = dcg(relevances, k);
  std::vector<int> ideal(relevances.begin(), relevances.end());
  std::sort(ideal.begin(), ideal.end(), std::greater<int>());
  eval.ideal_dcg = dcg(ideal, k);
  if (eval.ideal_dcg > 0.0) {
    eval.ndcg = eval.dcg / eval.ideal_dcg;
  } else {
    eval.ndcg = 0.0;
    eval.degenerate = true;
  }
  return eval;
}

inline ndcg_evaluation ndcg(const ranked_list& ranked, std::size_t k) {
  return ndcg(std::span<const int>(ranked.relevances), k);
}

/// Ranks one concept's sentences by the score table. Every record needs a
/// gold label and a score.
inline ranked_list rank_concept(const dataset& d, const score_table& scores,
                                const std::string& concept_key) {
  auto it = d.concept_index().find(concept_key);
  if (it == d.concept_index().end())
    throw error("unknown concept \"" + concept_key + "\"");
  ranked_list ranked;
  ranked.concept_name = concept_key;
  ranked.ids = it->second;
  for (const std::string& id : ranked.ids) {
    if (!d.by_id(id).gold_label)
      throw error("record \"" + id + "\" has no gold label");
    if (!scores.has(id)) throw error("no score for record id \"" + id + "\"");
  }
  std::sort(ranked.ids.begin(), ranked.ids.end(),
            [&scores](const std::string& a, const std::string& b) {
              const double sa = scores.at(a);
              const double sb = scores.at(b);
              if (sa != sb) return sa > sb;
              return a < b;
            });
  ranked.relevances.reserve(ranked.ids.size());
  for (const std::string& id : ranked.ids)
    ranked.relevances.push_back(label_value(*d.by_id(id).gold_label));
  return ranked;
}

/// Unweighted mean of per-concept ndcg@k.
inline double macro_ndcg(const dataset& d, const score_table& scores,
                         std::size_t k, std::span<const std::string> concepts) {
  if (concepts.empty()) throw error("macro_ndcg requires at least one concept");
  double sum = 0.0;
  for (const std::string& concept_key : concepts)
    sum += ndcg(rank_concept(d, scores, concept_key), k).ndcg;
  return sum / static_cast<double>(concepts.size());
}

inline double macro_ndcg(const dataset& d, const score_table& scores, std::size_t k) {
  const std::vector<std::string> concepts = d.concepts();
  return macro_ndcg(d, scores, k, concepts);
}

/// Fraction of predictions exactly matching gold.
inline double accuracy(std::span<const relevance_label> predicted,
                       std::span<const relevance_label> gold) {
  if (predicted.size() != gold.size())
    throw error("accuracy: prediction/gold length mismatch");
  if (predicted.empty()) throw error("accuracy: empty label sequences");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i)
    if (predicted[i] == gold[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

/// Support-weighted mean of per-class F1. A class with no gold occurrences
/// carries zero weight; a class with zero precision+recall contributes 0.
inline double weighted_f1(std::span<const relevance_label> predicted,
                          std::span<const relevance_label> gold) {
  if (predicted.size() != gold.size())
    throw error("weighted_f1: prediction/gold length mismatch");
  if (predicted.empty()) throw error("weighted_f1: empty label sequences");
  double weighted_sum = 0.0;
  for (relevance_label label : all_labels) {
    std::size_t tp = 0, fp = 0, fn = 0, support = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
      if (gold[i] == label) ++support;
      if (predicted[i] == label && gold[i] == label) ++tp;
      if (predicted[i] == label && gold[i] != label) ++fp;
      if (predicted[i] != label && gold[i] == label) ++fn;
    }
    const double precision = (tp + fp) ? static_cast<double>(tp) / (tp + fp) : 0.0;
    const double recall = (tp + fn) ? static_cast<double>(tp) / (tp + fn) : 0.0;
    const double f1 = (precision + recall) > 0.0
                          ? 2.0 * precision * recall / (precision + recall)
                          : 0.0;
    weighted_sum += f1 * static_cast<double>(support);
  }
  return weighted_sum / static_cast<double>(gold.size());
}

/// Per-id arithmetic mean over score tables covering identical id sets —
/// the voting scheme over the cross-validation models.
inline score_table ensemble_average(std::span<const score_table> tables) {
  if (tables.empty()) throw error("ensemble_average requires at least one table");
  score_table result;
  result.provenance = "ensemble(" + std::to_string(tables.size()) + ")";
  const score_table& first = tables.front();
  for (const score_table& table : tables) {
    if (table.entries.size() != first.entries.size())
      throw error("ensemble_average: score tables cover different id sets");
    for (const auto& [id, score] : table.entries) {
      if (!first.has(id))
        throw error("ensemble_average: id \"" + id + "\" missing from first table");
      result.entries[id] += score;
    }
  }
  for (auto& [id, score] : result.entries)
    score /= static_cast<double>(tables.size());
  return result;
}

/// One evaluated grid cell: budget, split, seed and the macro NDCG at each
/// cutoff.
struct run_result {
  long long k = 0;
  int split = 0;
  std::uint64_t seed = 0;
  std::map<int, double> ndcg_at;  // cutoff -> macro ndcg
};

struct metric_stat {
  double mean = 0.0;
  double stddev = 0.0;
};

/// k -> cutoff -> (mean, std). Keys sort k ascending; the unbounded "full"
/// sentinel sorts last.
using aggregate_report = std::map<long long, std::map<int, metric_stat>>;

/// Split-then-seed aggregation: for each (k, cutoff), average the per-split
/// values within each seed, then report the mean and the population standard
/// deviation across the per-seed averages. The runs must form a full grid:
/// one result per (k, split, seed) over the observed splits and seeds.
inline aggregate_report aggregate_runs(std::span<const run_result> runs) {
  if (runs.empty()) return {};

  std::set<int> splits;
  std::set<std::uint64_t> seeds;
  std::set<long long> ks;
  std::set<int> cutoffs;
  for (const run_result& run : runs) {
    splits.insert(run.split);
    seeds.insert(run.seed);
    ks.insert(run.k);
    for (const auto& [cutoff, value] : run.ndcg_at) cutoffs.insert(cutoff);
  }

  // cell lookup + duplicate detection
  std::map<std::tuple<long long, int, std::uint64_t>, const run_result*> cells;
  for (const run_result& run : runs) {
    auto key = std::make_tuple(run.k, run.split, run.seed);
    if (!cells.emplace(key, &run).second) {
      std::ostringstream msg;
      msg << "duplicate run for k=" << run.k << " split=" << run.split
          << " seed=" << run.seed;
      throw error(msg.str());
    }
  }

  std::vector<std::string> missing;
  for (long long k : ks)
    for (int split : splits)
      for (std::uint64_t seed : seeds)
        if (!cells.count(std::make_tuple(k, split, seed))) {
          std::ostringstream msg;
          msg << "k=" << k << " split=" << split << " seed=" << seed;
          missing.push_back(msg.str());
        }
  if (!missing.empty()) {
    std::string what = "incomplete run grid; missing cells:";
    for (const std::string& cell : missing) what += " [" + cell + "]";
    throw error(what);
  }

  aggregate_report report;
  for (long long k : ks) {
    for (int cutoff : cutoffs) {
      std::vector<double> seed_averages;
      seed_averages.reserve(seeds.size());
      for (std::uint64_t seed : seeds) {
        double split_sum = 0.0;
        for (int split : splits) {
          const run_result* run = cells.at(std::make_tuple(k, split, seed));
          auto it = run->ndcg_at.find(cutoff);
          if (it == run->ndcg_at.end()) {
            std::ostringstream msg;
            msg << "run k=" << k << " split=" << split << " seed=" << seed
                << " lacks cutoff " << cutoff;
            throw error(msg.str());
          }
          split_sum += it->second;
        }
        seed_averages.push_back(split_sum / static_cast<double>(splits.size()));
      }
      double mean = 0.0;
      for (double v : seed_averages) mean += v;
      mean /= static_cast<double>(seed_averages.size());
      double variance = 0.0;
      for (double v : seed_averages) variance += (v - mean) * (v - mean);
      variance /= static_cast<double>(seed_averages.size());
      report[k][cutoff] = metric_stat{mean, std::sqrt(variance)};
    }
  }
  return report;
}

}  // namespace sirank

#endif  // SIRANK_METRICS_HPP_
