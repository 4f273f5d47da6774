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
#ifndef SIRANK_SAMPLING_HPP_
#define SIRANK_SAMPLING_HPP_

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sirank/dataset.hpp"
#include "sirank/error.hpp"
#include "sirank/rng.hpp"

namespace sirank {

/// Sentinel budget meaning "take every sentence" (the "full" table row).
inline constexpr long long unbounded_budget = std::numeric_limits<long long>::max();

enum class selection_strategy { random, top_k };

inline std::string strategy_name(selection_strategy s) {
  return s == selection_strategy::random ? "random" : "top-k";
}

inline selection_strategy parse_strategy(const std::string& name) {
  if (name == "random") return selection_strategy::random;
  if (name == "top-k" || name == "top_k") return selection_strategy::top_k;
  throw error("unknown selection strategy \"" + name + "\"");
}

/// Budget-constrained per-concept pick: for every concept j the selection
/// holds exactly min(k, n_j) of its record ids, without duplicates.
struct subset_selection {
  std::map<std::string, std::vector<std::string>> selected;
  long long k = 0;
  selection_strategy strategy = selection_strategy::random;
  std::optional<std::uint64_t> seed;

  std::size_t total_selected() const {
    std::size_t total = 0;
    for (const auto& [key, ids] : selected) total += ids.size();
    return total;
  }
};

namespace detail {

inline std::size_t capped(long long k, std::size_t n) {
  if (k < 0) throw error("budget k must be non-negative");
  return std::min<unsigned long long>(static_cast<unsigned long long>(k), n);
}

}  // namespace detail

/// Uniform random pick of up to k sentences per concept. The draw for each
/// concept uses a SplitMix64 stream seeded from (seed, concept), over the
/// concept's ids in sorted order, so the result depends only on the id set,
/// the budget and the seed.
inline subset_selection sample_random_k(const dataset& d, long long k,
                                        std::uint64_t seed) {
  subset_selection selection;
  selection.k = k;
  selection.strategy = selection_strategy::random;
  selection.seed = seed;
  for (const auto& [concept_key, ids] : d.concept_index()) {
    std::vector<std::string> pool = ids;
    std::sort(pool.begin(), pool.end());
    split_mix64 rng(derive_seed(seed, concept_key));
    shuffle(pool, rng);
    pool.resize(detail::capped(k, pool.size()));
    selection.selected[concept_key] = std::move(pool);
  }
  return selection;
}

/// Top-k pick per concept under a score table: ids sorted by score
/// descending, ties broken by ascending id, truncated to k. The score table
/// must cover every record of every concept.
inline subset_selection select_top_k(const dataset& d, const score_table& scores,
                                     long long k) {
  subset_selection selection;
  selection.k = k;
  selection.strategy = selection_strategy::top_k;
  for (const auto& [concept_key, ids] : d.concept_index()) {
    std::vector<std::string> pool = ids;
    for (const std::string& id : pool)
      if (!scores.has(id))
        throw error("no score for record id \"" + id + "\" (concept \"" +
                    concept_key + "\")");
    std::sort(pool.begin(), pool.end(),
              [&scores](const std::string& a, const std::string& b) {
                const double sa = scores.at(a);
                const double sb = scores.at(b);
                if (sa != sb) return sa > sb;
                return a < b;
              });
    pool.resize(detail::capped(k, pool.size()));
    selection.selected[concept_key] = std::move(pool);
  }
  return selection;
}

/// Total selected sentences sum_j min(k, n_j) for each budget, in input
/// order of ks. Non-decreasing in k, saturating at the dataset size.
inline std::vector<std::pair<long long, std::size_t>> budget_curve(
    const dataset& d, std::span<const long long> ks) {
  if (ks.empty()) throw error("budget_curve requires at least one k");
  std::vector<std::pair<long long, std::size_t>> curve;
  curve.reserve(ks.size());
  for (long long k : ks) {
    std::size_t total = 0;
    for (const auto& [concept_key, ids] : d.concept_index())
      total += detail::capped(k, ids.size());
    curve.emplace_back(k, total);
  }
  return curve;
}

inline nlohmann::json to_json(const subset_selection& selection) {
  nlohmann::json obj;
  for (const auto& [concept_key, ids] : selection.selected) obj[concept_key] = ids;
  if (selection.k == unbounded_budget)
    obj["k"] = "full";
  else
    obj["k"] = selection.k;
  obj["strategy"] = strategy_name(selection.strategy);
  if (selection.seed) obj["seed"] = *selection.seed;
  return obj;
}

}  // namespace sirank

#endif  // SIRANK_SAMPLING_HPP_
