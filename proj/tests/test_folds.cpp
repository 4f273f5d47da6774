#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "sirank/folds.hpp"
#include "sirank/rng.hpp"

using namespace sirank;

namespace {

std::vector<std::string> make_concepts(std::size_t n) {
  std::vector<std::string> keys;
  for (std::size_t i = 0; i < n; ++i) keys.push_back("c" + std::to_string(i));
  return keys;
}

void check_partition(const fold_assignment& a, const std::vector<std::string>& concepts) {
  std::set<std::string> seen;
  std::size_t total = 0;
  for (const auto& fold : a.folds) {
    total += fold.size();
    for (const auto& key : fold) CHECK(seen.insert(key).second);
  }
  CHECK(total == concepts.size());
  for (const auto& key : concepts) CHECK(seen.count(key) == 1);
}

void check_category_balance(const fold_assignment& a, const concept_categories& cats) {
  for (int cat = 0; cat < category_count; ++cat) {
    std::size_t lo = SIZE_MAX, hi = 0;
    for (const auto& fold : a.folds) {
      std::size_t count = 0;
      for (const auto& key : fold)
        if (cats.at(key) == cat) ++count;
      lo = std::min(lo, count);
      hi = std::max(hi, count);
    }
    CHECK(hi - lo <= 1);
  }
}

}  // namespace

TEST_CASE("six concepts in one category land one per fold") {
  auto concepts = make_concepts(6);
  auto a = assign_folds(concepts, 0);
  for (const auto& fold : a.folds) CHECK(fold.size() == 1);
  check_partition(a, concepts);
}

TEST_CASE("12 concepts in 4 balanced categories spread evenly") {
  auto concepts = make_concepts(12);
  concept_categories cats;
  for (std::size_t i = 0; i < concepts.size(); ++i)
    cats[concepts[i]] = static_cast<int>(i % 4);
  auto a = assign_folds(concepts, cats, 1);
  check_partition(a, concepts);
  check_category_balance(a, cats);
  for (const auto& fold : a.folds) CHECK(fold.size() == 2);
}

TEST_CASE("42 concepts split into folds of 7") {
  auto concepts = make_concepts(42);
  split_mix64 rng(17);
  concept_categories cats;
  for (const auto& key : concepts) cats[key] = static_cast<int>(rng.below(4));
  auto a = assign_folds(concepts, cats, 3);
  check_partition(a, concepts);
  check_category_balance(a, cats);
  for (const auto& fold : a.folds) CHECK(fold.size() == 7);
}

TEST_CASE("cv and test folds are fixed and disjoint") {
  auto a = assign_folds(make_concepts(10), 0);
  CHECK(a.cv_folds == std::vector<int>{0, 1, 2, 3});
  CHECK(a.test_folds == std::vector<int>{4, 5});
}

TEST_CASE("assignment is deterministic and input-order independent") {
  auto concepts = make_concepts(23);
  concept_categories cats;
  split_mix64 rng(99);
  for (const auto& key : concepts) cats[key] = static_cast<int>(rng.below(4));

  auto a = assign_folds(concepts, cats, 7);
  auto b = assign_folds(concepts, cats, 7);
  for (int i = 0; i < fold_count; ++i) CHECK(a.folds[i] == b.folds[i]);

  std::reverse(concepts.begin(), concepts.end());
  auto c = assign_folds(concepts, cats, 7);
  for (int i = 0; i < fold_count; ++i)
    CHECK(std::multiset<std::string>(a.folds[i].begin(), a.folds[i].end()) ==
          std::multiset<std::string>(c.folds[i].begin(), c.folds[i].end()));

  auto d = assign_folds(concepts, cats, 8);
  bool any_difference = false;
  for (int i = 0; i < fold_count; ++i)
    if (std::multiset<std::string>(a.folds[i].begin(), a.folds[i].end()) !=
        std::multiset<std::string>(d.folds[i].begin(), d.folds[i].end()))
      any_difference = true;
  CHECK(any_difference);  // different seed reshuffles
}

TEST_CASE("missing category is an error naming the concept") {
  auto concepts = make_concepts(3);
  concept_categories cats;
  cats["c0"] = 0;
  cats["c1"] = 1;
  CHECK_THROWS_WITH(assign_folds(concepts, cats, 0),
                    Catch::Matchers::ContainsSubstring("c2"));
}

TEST_CASE("duplicate concepts are rejected") {
  std::vector<std::string> concepts = {"a", "b", "a"};
  CHECK_THROWS_WITH(assign_folds(concepts, 0),
                    Catch::Matchers::ContainsSubstring("duplicate"));
}

TEST_CASE("cv plan enumerates leave-one-out entries in order") {
  auto a = assign_folds(make_concepts(12), 0);
  auto plan = make_cv_plan(a);
  std::set<int> validated;
  for (std::size_t i = 0; i < plan.entries.size(); ++i) {
    const auto& entry = plan.entries[i];
    CHECK(entry.validation == static_cast<int>(i));
    CHECK(entry.train.size() == 3);
    validated.insert(entry.validation);
    std::set<int> all(entry.train.begin(), entry.train.end());
    all.insert(entry.validation);
    CHECK(all == std::set<int>{0, 1, 2, 3});
  }
  CHECK(validated.size() == 4);
}

TEST_CASE("fold assignment round-trips through JSON") {
  auto concepts = make_concepts(17);
  auto a = assign_folds(concepts, 5);
  auto obj = to_json(a);
  auto b = fold_assignment_from_json(obj);
  for (int i = 0; i < fold_count; ++i) CHECK(a.folds[i] == b.folds[i]);
  CHECK(b.seed == 5);
  CHECK(b.cv_folds == a.cv_folds);
  CHECK(b.test_folds == a.test_folds);
}

TEST_CASE("category map parsing validates the range") {
  auto cats = parse_categories(nlohmann::json{{"a", 0}, {"b", 3}});
  CHECK(cats.at("a") == 0);
  CHECK(cats.at("b") == 3);
  CHECK_THROWS_AS(parse_categories(nlohmann::json{{"a", 4}}), error);
  CHECK_THROWS_AS(parse_categories(nlohmann::json{{"a", -1}}), error);
  CHECK_THROWS_AS(parse_categories(nlohmann::json::array()), error);
}

TEST_CASE("zero concepts give six empty folds") {
  auto a = assign_folds(std::vector<std::string>{}, 0);
  for (const auto& fold : a.folds) CHECK(fold.empty());
  auto plan = make_cv_plan(a);
  CHECK(plan.entries.size() == 4);
}

TEST_CASE("property: random category configurations stay balanced") {
  split_mix64 rng(2024);
  for (int iter = 0; iter < 100; ++iter) {
    const std::size_t n = 1 + rng.below(80);
    auto concepts = make_concepts(n);
    concept_categories cats;
    for (const auto& key : concepts) cats[key] = static_cast<int>(rng.below(4));
    auto a = assign_folds(concepts, cats, rng.next());
    check_partition(a, concepts);
    check_category_balance(a, cats);
  }
}
