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
#ifndef SIRANK_LABELS_HPP_
#define SIRANK_LABELS_HPP_

#include <array>
#include <cctype>
#include <string>
#include <string_view>

#include "sirank/error.hpp"

namespace sirank {

/// The four relevance judgments a sentence can carry for a legal concept.
/// The enum value doubles as the numeric relevance used in ranking metrics.
enum class relevance_label : int {
  no_value = 0,
  potential_value = 1,
  certain_value = 2,
  high_value = 3,
};

inline constexpr std::array<relevance_label, 4> all_labels = {
    relevance_label::no_value,
    relevance_label::potential_value,
    relevance_label::certain_value,
    relevance_label::high_value,
};

inline constexpr int label_value(relevance_label label) noexcept {
  return static_cast<int>(label);
}

inline relevance_label label_from_value(int value) {
  if (value < 0 || value > 3)
    throw error("relevance value out of range [0,3]: " + std::to_string(value));
  return static_cast<relevance_label>(value);
}

/// Canonical lowercase string form.
inline constexpr std::string_view label_name(relevance_label label) noexcept {
  switch (label) {
    case relevance_label::no_value: return "no value";
    case relevance_label::potential_value: return "potential value";
    case relevance_label::certain_value: return "certain value";
    case relevance_label::high_value: return "high value";
  }
  return "no value";
}

/// First word of each label, the part that disambiguates a generated token.
inline constexpr std::string_view label_first_word(relevance_label label) noexcept {
  switch (label) {
    case relevance_label::no_value: return "no";
    case relevance_label::potential_value: return "potential";
    case relevance_label::certain_value: return "certain";
    case relevance_label::high_value: return "high";
  }
  return "no";
}

namespace detail {

inline std::string lower_trim(std::string_view text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
  std::string out;
  out.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i)
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[i]))));
  return out;
}

}  // namespace detail

/// Parses a label string. Case-insensitive, surrounding whitespace ignored.
/// Accepts both the full form ("high value") and the bare judgment word
/// ("high") that annotated data points carry.
inline relevance_label parse_label(std::string_view text) {
  const std::string key = detail::lower_trim(text);
  for (relevance_label label : all_labels) {
    if (key == label_name(label) || key == label_first_word(label)) return label;
  }
  throw error("unknown relevance label: \"" + std::string(text) + "\"");
}

}  // namespace sirank

#endif  // SIRANK_LABELS_HPP_
