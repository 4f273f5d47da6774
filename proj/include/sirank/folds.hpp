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
#ifndef SIRANK_FOLDS_HPP_
#define SIRANK_FOLDS_HPP_

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "sirank/error.hpp"
#include "sirank/rng.hpp"

namespace sirank {

inline constexpr int fold_count = 6;
inline constexpr int cv_fold_count = 4;
inline constexpr int category_count = 4;

/// Concept -> category id in {0,1,2,3}. Categories are an input to the
/// toolkit; callers without a categorization can place every concept in
/// category 0.
using concept_categories = std::map<std::string, int>;

inline concept_categories uniform_categories(const std::vector<std::string>& concepts) {
  concept_categories cats;
  for (const auto& key : concepts) cats[key] = 0;
  return cats;
}

inline concept_categories parse_categories(const nlohmann::json& obj) {
  if (!obj.is_object()) throw error("category map must be a JSON object");
  concept_categories cats;
  for (const auto& [key, value] : obj.items()) {
    if (!value.is_number_integer())
      throw error("category for concept \"" + key + "\" must be an integer");
    const int cat = value.get<int>();
    if (cat < 0 || cat >= category_count)
      throw error("category for concept \"" + key + "\" out of range [0,3]");
    cats[key] = cat;
  }
  return cats;
}

inline concept_categories parse_categories_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw error("cannot open category file " + path.string());
  nlohmann::json obj = nlohmann::json::parse(in, nullptr, false);
  if (obj.is_discarded()) throw error("malformed JSON in category file " + path.string());
  return parse_categories(obj);
}

/// A partition of the concept set into 6 folds: the first 4 are
/// cross-validation folds, the last 2 are held out for final testing.
struct fold_assignment {
  std::array<std::vector<std::string>, fold_count> folds;
  std::vector<int> cv_folds = {0, 1, 2, 3};
  std::vector<int> test_folds = {4, 5};
  std::uint64_t seed = 0;

  std::vector<std::string> concepts_of(const std::vector<int>& fold_indices) const {
    std::vector<std::string> keys;
    for (int index : fold_indices) {
      if (index < 0 || index >= fold_count)
        throw error("fold index out of range: " + std::to_string(index));
      keys.insert(keys.end(), folds[static_cast<std::size_t>(index)].begin(),
                  folds[static_cast<std::size_t>(index)].end());
    }
    return keys;
  }
};

/// Assigns concepts to the 6 folds with four-category stratification.
///
/// Concepts are canonically sorted, grouped by category, shuffled within each
/// category with a seed derived from (seed, category), and dealt round-robin
/// across the folds. The round-robin cursor carries over from one category to
/// the next, so both the per-category counts and the fold totals differ by at
/// most 1 across folds.
inline fold_assignment assign_folds(const std::vector<std::string>& concepts,
                                    const concept_categories& categories,
                                    std::uint64_t seed) {
  std::vector<std::string> sorted = concepts;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i] == sorted[i - 1])
      throw error("duplicate concept \"" + sorted[i] + "\"");

  std::array<std::vector<std::string>, category_count> groups;
  for (const std::string& key : sorted) {
    auto it = categories.find(key);
    if (it == categories.end())
      throw error("concept \"" + key + "\" has no category");
    if (it->second < 0 || it->second >= category_count)
      throw error("category for concept \"" + key + "\" out of range [0,3]");
    groups[static_cast<std::size_t>(it->second)].push_back(key);
  }

  fold_assignment assignment;
  assignment.seed = seed;
  std::size_t cursor = 0;
  for (int cat = 0; cat < category_count; ++cat) {
    auto& group = groups[static_cast<std::size_t>(cat)];
    split_mix64 rng(derive_seed(seed, "category:" + std::to_string(cat)));
    shuffle(group, rng);
    for (std::string& key : group) {
      assignment.folds[cursor % fold_count].push_back(std::move(key));
      ++cursor;
    }
  }
  return assignment;
}

inline fold_assignment assign_folds(const std::vector<std::string>& concepts,
                                    std::uint64_t seed) {
  return assign_folds(concepts, uniform_categories(concepts), seed);
}

/// One cross-validation training: 3 train folds, 1 validation fold.
struct cv_split {
  std::vector<int> train;
  int validation = 0;
};

/// The 4 leave-one-out entries over the cv folds, ascending by validation
/// fold.
struct cv_plan {
  std::array<cv_split, cv_fold_count> entries;
};

inline cv_plan make_cv_plan(const fold_assignment& assignment) {
  std::vector<int> cv = assignment.cv_folds;
  std::sort(cv.begin(), cv.end());
  if (cv.size() != cv_fold_count) throw error("expected 4 cv folds");
  cv_plan plan;
  for (std::size_t i = 0; i < cv.size(); ++i) {
    cv_split& entry = plan.entries[i];
    entry.validation = cv[i];
    for (int fold : cv)
      if (fold != cv[i]) entry.train.push_back(fold);
  }
  return plan;
}

inline nlohmann::json to_json(const fold_assignment& assignment) {
  nlohmann::json obj;
  for (int i = 0; i < fold_count; ++i)
    obj[std::to_string(i)] = assignment.folds[static_cast<std::size_t>(i)];
  obj["cv"] = assignment.cv_folds;
  obj["test"] = assignment.test_folds;
  obj["seed"] = assignment.seed;
  return obj;
}

inline fold_assignment fold_assignment_from_json(const nlohmann::json& obj) {
  fold_assignment assignment;
  std::set<std::string> seen;
  for (int i = 0; i < fold_count; ++i) {
    const std::string key = std::to_string(i);
    if (!obj.contains(key)) throw error("fold output missing fold " + key);
    assignment.folds[static_cast<std::size_t>(i)] =
        obj[key].get<std::vector<std::string>>();
    for (const auto& c : assignment.folds[static_cast<std::size_t>(i)])
      if (!seen.insert(c).second)
        throw error("concept \"" + c + "\" appears in more than one fold");
  }
  if (obj.contains("cv")) assignment.cv_folds = obj["cv"].get<std::vector<int>>();
  if (obj.contains("test")) assignment.test_folds = obj["test"].get<std::vector<int>>();
  if (obj.contains("seed")) assignment.seed = obj["seed"].get<std::uint64_t>();
  std::set<int> indices(assignment.cv_folds.begin(), assignment.cv_folds.end());
  indices.insert(assignment.test_folds.begin(), assignment.test_folds.end());
  if (indices.size() != fold_count ||
      assignment.cv_folds.size() + assignment.test_folds.size() != fold_count)
    throw error("cv and test folds must be disjoint and cover all 6 indices");
  return assignment;
}

inline fold_assignment load_folds_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw error("cannot open folds file " + path.string());
  nlohmann::json obj = nlohmann::json::parse(in, nullptr, false);
  if (obj.is_discarded()) throw error("malformed JSON in folds file " + path.string());
  return fold_assignment_from_json(obj);
}

}  // namespace sirank

#endif  // SIRANK_FOLDS_HPP_
