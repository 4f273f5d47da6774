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
#ifndef SIRANK_DATASET_HPP_
#define SIRANK_DATASET_HPP_

#include <array>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "sirank/error.hpp"
#include "sirank/labels.hpp"

namespace sirank {

/// One sentence from a court opinion, tied to the legal concept it may
/// explain. `provision` and `gold_label` are optional in raw data; the gold
/// label must be present wherever the record serves as evaluation ground
/// truth.
struct sentence_record {
  std::string id;
  std::string text;
  std::string concept_name;
  std::string provision;
  std::optional<relevance_label> gold_label;

  bool operator==(const sentence_record&) const = default;
};

/// Immutable, validated collection of sentence records indexed by concept.
class dataset {
 public:
  dataset() = default;

  static dataset from_records(std::vector<sentence_record> records) {
    dataset d;
    d.records_ = std::move(records);
    for (std::size_t pos = 0; pos < d.records_.size(); ++pos) {
      const sentence_record& r = d.records_[pos];
      if (r.id.empty()) throw error("record " + std::to_string(pos) + " has empty id");
      if (r.text.empty()) throw error("record \"" + r.id + "\" has empty text");
      if (r.concept_name.empty()) throw error("record \"" + r.id + "\" has empty concept");
      if (!d.id_to_pos_.emplace(r.id, pos).second)
        throw error("duplicate record id \"" + r.id + "\"");
      d.concept_index_[r.concept_name].push_back(r.id);
    }
    return d;
  }

  const std::vector<sentence_record>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  /// Concept -> record ids in input order. Keys are sorted.
  const std::map<std::string, std::vector<std::string>>& concept_index() const {
    return concept_index_;
  }

  std::vector<std::string> concepts() const {
    std::vector<std::string> keys;
    keys.reserve(concept_index_.size());
    for (const auto& [key, ids] : concept_index_) keys.push_back(key);
    return keys;
  }

  /// Per-concept sentence count n_j.
  std::size_t concept_size(const std::string& concept_key) const {
    auto it = concept_index_.find(concept_key);
    return it == concept_index_.end() ? 0 : it->second.size();
  }

  bool has_id(const std::string& id) const { return id_to_pos_.count(id) != 0; }

  const sentence_record& by_id(const std::string& id) const {
    auto it = id_to_pos_.find(id);
    if (it == id_to_pos_.end()) throw error("unknown record id \"" + id + "\"");
    return records_[it->second];
  }

  /// New dataset containing only the records of the given concepts.
  dataset restrict_to(const std::vector<std::string>& concept_keys) const {
    std::map<std::string, bool> keep;
    for (const auto& key : concept_keys) keep[key] = true;
    std::vector<sentence_record> subset;
    for (const auto& r : records_)
      if (keep.count(r.concept_name)) subset.push_back(r);
    return from_records(std::move(subset));
  }

  bool operator==(const dataset& other) const { return records_ == other.records_; }

 private:
  std::vector<sentence_record> records_;
  std::map<std::string, std::vector<std::string>> concept_index_;
  std::unordered_map<std::string, std::size_t> id_to_pos_;
};

/// Per-sentence real-valued relevance predictions, keyed by record id.
struct score_table {
  std::map<std::string, double> entries;
  std::string provenance;

  bool has(const std::string& id) const { return entries.count(id) != 0; }

  double at(const std::string& id) const {
    auto it = entries.find(id);
    if (it == entries.end()) throw error("no score for record id \"" + id + "\"");
    return it->second;
  }
};

namespace detail {

inline std::string line_id(std::size_t line_number) {
  return "line-" + std::to_string(line_number);
}

inline nlohmann::json parse_json_line(const std::string& line, std::size_t line_number) {
  nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
  if (obj.is_discarded())
    throw error("malformed JSON on line " + std::to_string(line_number));
  if (!obj.is_object())
    throw error("line " + std::to_string(line_number) + " is not a JSON object");
  return obj;
}

inline double numeric_value(const nlohmann::json& value, const std::string& id) {
  double score = 0.0;
  if (value.is_number()) {
    score = value.get<double>();
  } else if (value.is_string()) {
    const std::string text = value.get<std::string>();
    char* end = nullptr;
    score = std::strtod(text.c_str(), &end);
    if (end == text.c_str() || (end && *end != '\0'))
      throw error("non-numeric score value \"" + text + "\" for id \"" + id + "\"");
  } else {
    throw error("non-numeric score value for id \"" + id + "\"");
  }
  if (!std::isfinite(score))
    throw error("score for id \"" + id + "\" is not finite");
  return score;
}

}  // namespace detail

/// Reads a line-delimited JSON dataset: one object per sentence with fields
/// "text" and "concept", optional "id", "provision" and "value" (a label
/// string). Records missing an explicit id get "line-<N>". Input order is
/// preserved.
inline dataset parse_dataset(std::istream& in) {
  std::vector<sentence_record> records;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    const nlohmann::json obj = detail::parse_json_line(line, line_number);

    sentence_record r;
    if (obj.contains("id")) {
      if (!obj["id"].is_string())
        throw error("line " + std::to_string(line_number) + ": \"id\" must be a string");
      r.id = obj["id"].get<std::string>();
    } else {
      r.id = detail::line_id(line_number);
    }
    if (!obj.contains("text") || !obj["text"].is_string())
      throw error("line " + std::to_string(line_number) + ": missing \"text\" field");
    if (!obj.contains("concept") || !obj["concept"].is_string())
      throw error("line " + std::to_string(line_number) + ": missing \"concept\" field");
    r.text = obj["text"].get<std::string>();
    r.concept_name = obj["concept"].get<std::string>();
    if (obj.contains("provision") && !obj["provision"].is_null())
      r.provision = obj["provision"].get<std::string>();
    if (obj.contains("value") && !obj["value"].is_null())
      r.gold_label = parse_label(obj["value"].get<std::string>());
    records.push_back(std::move(r));
  }
  return dataset::from_records(std::move(records));
}

inline dataset parse_dataset_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw error("cannot open dataset file " + path.string());
  return parse_dataset(in);
}

/// Emits one JSON object per record with canonical (alphabetical) field
/// ordering. Empty provisions and absent gold labels are omitted, so
/// emit(parse(x)) parses back to an equal dataset.
inline void emit_dataset(const dataset& d, std::ostream& out) {
  for (const sentence_record& r : d.records()) {
    nlohmann::json obj;
    obj["concept"] = r.concept_name;
    obj["id"] = r.id;
    if (!r.provision.empty()) obj["provision"] = r.provision;
    obj["text"] = r.text;
    if (r.gold_label) obj["value"] = std::string(label_name(*r.gold_label));
    out << obj.dump() << '\n';
  }
}

/// Reads a line-delimited JSON score file: objects with "id" (or "line-<N>"
/// fallback) and "value", a JSON number or a numeric string. Scores must be
/// finite.
inline score_table parse_scores(std::istream& in, std::string provenance = {}) {
  score_table table;
  table.provenance = std::move(provenance);
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    const nlohmann::json obj = detail::parse_json_line(line, line_number);
    const std::string id = obj.contains("id") ? obj["id"].get<std::string>()
                                              : detail::line_id(line_number);
    if (!obj.contains("value"))
      throw error("line " + std::to_string(line_number) + ": missing \"value\" field");
    const double score = detail::numeric_value(obj["value"], id);
    if (!table.entries.emplace(id, score).second)
      throw error("duplicate score id \"" + id + "\"");
  }
  return table;
}

inline score_table parse_scores_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw error("cannot open score file " + path.string());
  return parse_scores(in, path.string());
}

inline void emit_scores(const score_table& table, std::ostream& out) {
  for (const auto& [id, score] : table.entries) {
    nlohmann::json obj;
    obj["id"] = id;
    obj["value"] = score;
    out << obj.dump() << '\n';
  }
}

/// Deterministic dataset summary: concept count, total sentences,
/// per-concept n and per-label counts.
struct dataset_summary {
  std::size_t total_sentences = 0;
  std::size_t concept_count = 0;
  std::map<std::string, std::size_t> per_concept;
  std::array<std::size_t, 4> per_label = {0, 0, 0, 0};
  std::size_t unlabeled = 0;
};

inline dataset_summary dataset_stats(const dataset& d) {
  dataset_summary s;
  s.total_sentences = d.size();
  s.concept_count = d.concept_index().size();
  for (const auto& [key, ids] : d.concept_index()) s.per_concept[key] = ids.size();
  for (const sentence_record& r : d.records()) {
    if (r.gold_label)
      ++s.per_label[static_cast<std::size_t>(label_value(*r.gold_label))];
    else
      ++s.unlabeled;
  }
  return s;
}

inline nlohmann::json to_json(const dataset_summary& s) {
  nlohmann::json labels;
  for (relevance_label label : all_labels)
    labels[std::string(label_name(label))] =
        s.per_label[static_cast<std::size_t>(label_value(label))];
  return nlohmann::json{{"concepts", s.concept_count},
                        {"sentences", s.total_sentences},
                        {"per_concept", s.per_concept},
                        {"labels", labels},
                        {"unlabeled", s.unlabeled}};
}

}  // namespace sirank

#endif  // SIRANK_DATASET_HPP_
