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
#ifndef SIRANK_ANNOTATOR_HPP_
#define SIRANK_ANNOTATOR_HPP_

#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "sirank/dataset.hpp"
#include "sirank/error.hpp"
#include "sirank/labels.hpp"
#include "sirank/rng.hpp"

namespace sirank {

enum class prompt_variant { original, improved };

inline std::string variant_name(prompt_variant v) {
  return v == prompt_variant::original ? "original" : "improved";
}

inline prompt_variant parse_variant(const std::string& name) {
  if (name == "original") return prompt_variant::original;
  if (name == "improved") return prompt_variant::improved;
  throw error("unknown prompt variant \"" + name + "\"");
}

/// Guideline text with {concept}, {provision}, {sentence} and {examples}
/// placeholders. The two variants differ only in the certain-value
/// definition section; the texts themselves are external editable files.
struct prompt_template {
  prompt_variant variant = prompt_variant::original;
  std::string text;

  static prompt_template load(prompt_variant v, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw error("cannot open template file " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return prompt_template{v, buffer.str()};
  }
};

/// Exactly four training examples, one per relevance label, indexed by label
/// value.
struct few_shot_set {
  std::array<sentence_record, 4> examples;
  std::uint64_t seed = 0;
};

/// Seeded uniform pick of one gold example per label from the training set.
/// Each label draws from its own SplitMix64 stream, so the pick is
/// deterministic per (train, seed).
inline few_shot_set select_few_shot(const dataset& train, std::uint64_t seed) {
  few_shot_set fs;
  fs.seed = seed;
  for (relevance_label label : all_labels) {
    std::vector<std::string> candidates;
    for (const sentence_record& r : train.records())
      if (r.gold_label == label) candidates.push_back(r.id);
    if (candidates.empty())
      throw error("training set has no example labeled \"" +
                  std::string(label_name(label)) + "\"");
    std::sort(candidates.begin(), candidates.end());
    split_mix64 rng(derive_seed(seed, std::string("few-shot:") +
                                          std::string(label_name(label))));
    const std::string& pick = candidates[rng.below(candidates.size())];
    fs.examples[static_cast<std::size_t>(label_value(label))] = train.by_id(pick);
  }
  return fs;
}

/// Few-shot block in fixed label order: no, potential, certain, high.
inline std::string render_few_shot_block(const few_shot_set& fs) {
  std::string block;
  for (relevance_label label : all_labels) {
    const sentence_record& r = fs.examples[static_cast<std::size_t>(label_value(label))];
    block += "Sentence: " + r.text + "\n";
    block += "Label: " + std::string(label_name(label)) + "\n";
    if (label != relevance_label::high_value) block += "\n";
  }
  return block;
}

/// Renders the template in a single pass. Placeholders are {lower_case}
/// names; an unknown name is an error. Substituted content is never
/// rescanned.
inline std::string build_prompt(const sentence_record& r, std::string_view provision,
                                const prompt_template& tmpl, const few_shot_set& fs) {
  const std::string examples = render_few_shot_block(fs);
  std::string out;
  out.reserve(tmpl.text.size() + r.text.size() + provision.size() + examples.size());
  const std::string& text = tmpl.text;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] != '{') {
      out.push_back(text[i++]);
      continue;
    }
    const std::size_t close = text.find('}', i + 1);
    std::string name =
        close == std::string::npos ? "" : text.substr(i + 1, close - i - 1);
    const bool placeholder_like =
        !name.empty() &&
        name.find_first_not_of("abcdefghijklmnopqrstuvwxyz_") == std::string::npos;
    if (!placeholder_like) {
      out.push_back(text[i++]);  // a literal brace in the guideline text
      continue;
    }
    if (name == "concept") out += r.concept_name;
    else if (name == "provision") out += provision;
    else if (name == "sentence") out += r.text;
    else if (name == "examples") out += examples;
    else throw error("unresolved template placeholder {" + name + "}");
    i = close + 1;
  }
  return out;
}

/// Probabilities over the four labels derived from first-token
/// probabilities. `raw` keeps the pre-renormalization values.
struct label_distribution {
  std::array<double, 4> p = {0, 0, 0, 0};
  std::array<double, 4> raw = {0, 0, 0, 0};
  bool renormalized = false;
};

inline label_distribution distribution_from_raw(const std::array<double, 4>& raw) {
  double total = 0.0;
  for (double v : raw) {
    if (v < 0.0 || !std::isfinite(v)) throw error("invalid raw label probability");
    total += v;
  }
  if (total <= 0.0)
    throw error("unusable response: all four label probabilities are zero");
  label_distribution dist;
  dist.raw = raw;
  for (std::size_t i = 0; i < 4; ++i) dist.p[i] = raw[i] / total;
  dist.renormalized = true;
  return dist;
}

/// Sum over labels of p(label) * label value; always in [0, 3].
inline double expected_score(const label_distribution& dist) {
  double score = 0.0;
  for (relevance_label label : all_labels)
    score += dist.p[static_cast<std::size_t>(label_value(label))] *
             static_cast<double>(label_value(label));
  return score;
}

/// Argmax label; ties resolve toward the higher label value.
inline relevance_label argmax_label(const label_distribution& dist) {
  relevance_label best = relevance_label::no_value;
  for (relevance_label label : all_labels)
    if (dist.p[static_cast<std::size_t>(label_value(label))] >=
        dist.p[static_cast<std::size_t>(label_value(best))])
      best = label;
  return best;
}

struct annotation_result {
  std::string id;
  relevance_label predicted = relevance_label::no_value;
  label_distribution distribution;
  double expected = 0.0;
  prompt_variant variant = prompt_variant::original;
  std::string model;
  bool cached = false;
};

/// Stable serialization: the run-local `cached` flag is deliberately left
/// out so reruns from cache produce byte-identical output files.
inline nlohmann::json to_json(const annotation_result& r) {
  nlohmann::json probs, raw;
  for (relevance_label label : all_labels) {
    const auto i = static_cast<std::size_t>(label_value(label));
    probs[std::string(label_name(label))] = r.distribution.p[i];
    raw[std::string(label_name(label))] = r.distribution.raw[i];
  }
  return nlohmann::json{{"id", r.id},
                        {"predicted", std::string(label_name(r.predicted))},
                        {"p", probs},
                        {"raw", raw},
                        {"expected_score", r.expected},
                        {"variant", variant_name(r.variant)},
                        {"model", r.model}};
}

inline void emit_annotations(const std::vector<annotation_result>& results,
                             std::ostream& out) {
  for (const annotation_result& r : results) out << to_json(r).dump() << '\n';
}

/// Projects the first generated token position onto the four labels.
///
/// Each candidate token at the first position (the sampled token plus its
/// top_logprobs alternatives) is whitespace-trimmed, lowercased and matched
/// as a prefix of exactly one label string; the four labels have pairwise
/// distinct first words, so any committed token is unambiguous. Probabilities
/// of distinct tokens committing to the same label add up.
inline std::array<double, 4> extract_label_probs(const nlohmann::json& response) {
  if (!response.contains("choices") || !response["choices"].is_array() ||
      response["choices"].empty())
    throw error("response has no choices");
  const nlohmann::json& choice = response["choices"][0];
  if (!choice.contains("logprobs") || choice["logprobs"].is_null() ||
      !choice["logprobs"].contains("content") ||
      !choice["logprobs"]["content"].is_array() ||
      choice["logprobs"]["content"].empty())
    throw error("response lacks token probabilities");
  const nlohmann::json& first = choice["logprobs"]["content"][0];

  std::unordered_map<std::string, double> candidates;
  auto add_candidate = [&candidates](const nlohmann::json& entry) {
    if (!entry.contains("token") || !entry.contains("logprob")) return;
    const std::string token = entry["token"].get<std::string>();
    candidates.emplace(token, entry["logprob"].get<double>());
  };
  add_candidate(first);
  if (first.contains("top_logprobs") && first["top_logprobs"].is_array())
    for (const nlohmann::json& entry : first["top_logprobs"]) add_candidate(entry);

  std::array<double, 4> raw = {0, 0, 0, 0};
  for (const auto& [token, logprob] : candidates) {
    const std::string key = detail::lower_trim(token);
    if (key.empty()) continue;
    int matched = -1;
    for (relevance_label label : all_labels) {
      const std::string_view name = label_name(label);
      if (key.size() <= name.size() && name.substr(0, key.size()) == key) {
        if (matched >= 0) {
          matched = -1;  // ambiguous prefix, e.g. empty-ish token
          break;
        }
        matched = label_value(label);
      }
    }
    if (matched >= 0) raw[static_cast<std::size_t>(matched)] += std::exp(logprob);
  }
  return raw;
}

/// Append-only store of raw label probabilities keyed by request hash.
/// Tolerates a torn final line from an interrupted run.
class annotation_cache {
 public:
  explicit annotation_cache(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    std::ifstream in(path_);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
      if (obj.is_discarded() || !obj.contains("key") || !obj.contains("raw")) continue;
      std::array<double, 4> raw{};
      const auto& values = obj["raw"];
      if (!values.is_array() || values.size() != 4) continue;
      for (std::size_t i = 0; i < 4; ++i) raw[i] = values[i].get<double>();
      entries_[obj["key"].get<std::string>()] = raw;
    }
    out_.open(path_, std::ios::app);
    if (!out_) throw error("cannot open cache file " + path_.string());
  }

  std::optional<std::array<double, 4>> lookup(const std::string& key) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  void store(const std::string& key, const std::array<double, 4>& raw) {
    std::lock_guard<std::mutex> lock(mutex_);
    if (entries_.count(key)) return;
    entries_[key] = raw;
    nlohmann::json obj{{"key", key}, {"raw", raw}};
    out_ << obj.dump() << '\n';
    out_.flush();
  }

  std::size_t size() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return entries_.size();
  }

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, std::array<double, 4>> entries_;
  std::ofstream out_;
};

/// Connection and decoding settings for an OpenAI-compatible
/// chat-completions endpoint. The credential is read from the environment
/// variable named by `api_key_env`.
struct endpoint_config {
  std::string url;  // e.g. http://localhost:8000/v1
  std::string model;
  prompt_variant variant = prompt_variant::original;
  bool guided_choice = true;  // ask the server to constrain output to the labels
  int top_logprobs = 20;
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{1000};
  std::string api_key_env = "SIRANK_API_KEY";
};

inline std::string constraint_set_label() {
  std::string joined;
  for (relevance_label label : all_labels) {
    if (!joined.empty()) joined += "|";
    joined += label_name(label);
  }
  return joined;
}

inline std::string cache_key(const std::string& model, const std::string& prompt,
                             const std::string& constraints) {
  const std::string payload = model + "\x1f" + prompt + "\x1f" + constraints;
  std::ostringstream key;
  key << std::hex << fnv1a64(payload) << "-" << std::dec << payload.size();
  return key.str();
}

/// Chat-completions request: temperature 0, single completion, per-token
/// probability reporting. With guided_choice the four label strings are sent
/// as the only allowed completions (the extraction below does not depend on
/// the server honoring it).
inline nlohmann::json build_chat_request(const endpoint_config& cfg,
                                         const std::string& prompt) {
  nlohmann::json body{{"model", cfg.model},
                      {"messages", nlohmann::json::array(
                                       {{{"role", "user"}, {"content", prompt}}})},
                      {"temperature", 0},
                      {"n", 1},
                      {"max_tokens", 2},
                      {"logprobs", true},
                      {"top_logprobs", cfg.top_logprobs}};
  if (cfg.guided_choice) {
    nlohmann::json labels = nlohmann::json::array();
    for (relevance_label label : all_labels)
      labels.push_back(std::string(label_name(label)));
    body["guided_choice"] = labels;
  }
  return body;
}

namespace detail {

struct endpoint_address {
  std::string base;  // scheme://host[:port]
  std::string path_prefix;
};

inline endpoint_address split_endpoint_url(const std::string& url) {
  const std::size_t scheme = url.find("://");
  if (scheme == std::string::npos)
    throw error("endpoint URL must include a scheme: " + url);
  const std::size_t slash = url.find('/', scheme + 3);
  endpoint_address address;
  if (slash == std::string::npos) {
    address.base = url;
  } else {
    address.base = url.substr(0, slash);
    address.path_prefix = url.substr(slash);
    while (!address.path_prefix.empty() && address.path_prefix.back() == '/')
      address.path_prefix.pop_back();
  }
  return address;
}

}  // namespace detail

/// Annotates sentences through the configured endpoint. Every request is a
/// label-constrained, temperature-0 completion; the result is derived from
/// the first generated token's probabilities.
class annotator {
 public:
  annotator(endpoint_config cfg, prompt_template tmpl, few_shot_set few_shot,
            std::shared_ptr<annotation_cache> cache = nullptr)
      : cfg_(std::move(cfg)),
        template_(std::move(tmpl)),
        few_shot_(std::move(few_shot)),
        cache_(std::move(cache)),
        address_(detail::split_endpoint_url(cfg_.url)) {
    if (const char* key = std::getenv(cfg_.api_key_env.c_str())) api_key_ = key;
  }

  const endpoint_config& config() const { return cfg_; }

  annotation_result annotate(const sentence_record& r) const {
    const std::string prompt = build_prompt(r, r.provision, template_, few_shot_);
    const std::string key = cache_key(cfg_.model, prompt, constraint_set_label());

    if (cache_) {
      if (auto raw = cache_->lookup(key)) return assemble(r, *raw, true);
    }
    const std::array<double, 4> raw = request_label_probs(prompt);
    annotation_result result = assemble(r, raw, false);
    if (cache_) cache_->store(key, raw);
    return result;
  }

  struct batch_outcome {
    std::vector<annotation_result> results;  // dataset order, successes only
    std::vector<std::pair<std::string, std::string>> failures;  // id -> message
    score_table scores;  // expected scores of successful annotations
  };

  /// Annotates every record exactly once with at most max_in_flight
  /// concurrent requests. Output order matches dataset order regardless of
  /// completion order; cached records are not re-requested.
  batch_outcome annotate_batch(const dataset& ds, int max_in_flight) const {
    if (max_in_flight < 1) throw error("max_in_flight must be at least 1");
    const std::vector<sentence_record>& records = ds.records();
    std::vector<std::optional<annotation_result>> slots(records.size());
    std::vector<std::optional<std::string>> errors(records.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      for (std::size_t i = next.fetch_add(1); i < records.size();
           i = next.fetch_add(1)) {
        try {
          slots[i] = annotate(records[i]);
        } catch (const std::exception& e) {
          errors[i] = e.what();
        }
      }
    };

    const std::size_t threads =
        std::min<std::size_t>(static_cast<std::size_t>(max_in_flight), records.size());
    if (threads <= 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      pool.reserve(threads);
      for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
      for (std::thread& t : pool) t.join();
    }

    batch_outcome outcome;
    outcome.scores.provenance = cfg_.model + "/" + variant_name(cfg_.variant);
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (slots[i]) {
        outcome.scores.entries[slots[i]->id] = slots[i]->expected;
        outcome.results.push_back(std::move(*slots[i]));
      } else {
        outcome.failures.emplace_back(records[i].id,
                                      errors[i] ? *errors[i] : "unknown failure");
      }
    }
    return outcome;
  }

 private:
  annotation_result assemble(const sentence_record& r, const std::array<double, 4>& raw,
                             bool cached) const {
    annotation_result result;
    result.id = r.id;
    result.distribution = distribution_from_raw(raw);
    result.expected = expected_score(result.distribution);
    result.predicted = argmax_label(result.distribution);
    result.variant = cfg_.variant;
    result.model = cfg_.model;
    result.cached = cached;
    return result;
  }

  std::array<double, 4> request_label_probs(const std::string& prompt) const {
    const nlohmann::json body = build_chat_request(cfg_, prompt);
    const std::string payload = body.dump();
    const std::string path = address_.path_prefix + "/chat/completions";

    std::string last_error;
    auto backoff = cfg_.initial_backoff;
    for (int attempt = 0; attempt < cfg_.max_retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(backoff);
        backoff *= 2;
      }
      httplib::Client client(address_.base);
      client.set_connection_timeout(10, 0);
      client.set_read_timeout(120, 0);
      if (!api_key_.empty()) client.set_bearer_token_auth(api_key_);
      httplib::Result res = client.Post(path, payload, "application/json");
      if (!res) {
        last_error = "transport failure: " + httplib::to_string(res.error());
        continue;  // retryable
      }
      if (res->status >= 500) {
        last_error = "server error " + std::to_string(res->status);
        continue;  // retryable
      }
      if (res->status != 200)
        throw error("endpoint returned status " + std::to_string(res->status) +
                    ": " + res->body);
      nlohmann::json response = nlohmann::json::parse(res->body, nullptr, false);
      if (response.is_discarded()) throw error("endpoint returned malformed JSON");
      return extract_label_probs(response);
    }
    throw error("request failed after " + std::to_string(cfg_.max_retries) +
                " attempts: " + last_error);
  }

  endpoint_config cfg_;
  prompt_template template_;
  few_shot_set few_shot_;
  std::shared_ptr<annotation_cache> cache_;
  detail::endpoint_address address_;
  std::string api_key_;
};

}  // namespace sirank

#endif  // SIRANK_ANNOTATOR_HPP_
