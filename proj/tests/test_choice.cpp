#include <algorithm>
#include <numeric>

#include "acrodis/choice.hpp"
#include "acrodis/rng.hpp"
#include "doctest.h"

using namespace acrodis;

namespace {

Dictionary dictionary_with(const std::string& acronym, size_t n_candidates) {
  Dictionary d;
  std::vector<std::string> exps;
  for (size_t i = 0; i < n_candidates; ++i) exps.push_back("expansion " + std::to_string(i));
  d.add_entry(acronym, std::move(exps));
  return d;
}

Sample sample_with_tokens(size_t n_tokens, size_t acronym_index, const std::string& acronym,
                          const std::string& gold = "") {
  Sample s;
  s.id = "s0";
  s.language = "en";
  for (size_t i = 0; i < n_tokens; ++i) s.tokens.push_back("w" + std::to_string(i));
  s.tokens[acronym_index] = acronym;
  s.acronym_index = acronym_index;
  if (!gold.empty()) s.gold_expansion = gold;
  return s;
}

}  // namespace

TEST_CASE("a narrow entry is padded to the option width") {
  const Dictionary dict = dictionary_with("AB", 2);
  const Sample s = sample_with_tokens(5, 2, "AB", "expansion 1");
  const auto instances = build_instances(s, dict, 14, 300);
  REQUIRE(instances.size() == 1);
  const auto& inst = instances[0];
  REQUIRE(inst.options.size() == 14);
  CHECK(inst.real_option_count() == 2);
  for (size_t o = 0; o < 14; ++o) {
    if (o < 2) {
      CHECK(!inst.options[o].is_padding);
      CHECK(inst.options[o].candidate_text == "expansion " + std::to_string(o));
    } else {
      CHECK(inst.options[o].is_padding);
      CHECK(inst.options[o].candidate_text.empty());
    }
  }
  CHECK(inst.gold_index.value() == 1);
  CHECK(inst.chunk_count == 1);
}

TEST_CASE("an entry of exactly K candidates needs no padding") {
  const Dictionary dict = dictionary_with("AB", 14);
  const Sample s = sample_with_tokens(5, 2, "AB");
  const auto instances = build_instances(s, dict, 14, 300);
  REQUIRE(instances.size() == 1);
  CHECK(instances[0].real_option_count() == 14);
}

TEST_CASE("a wide entry is chunked and the gold chunk is unique") {
  const Dictionary dict = dictionary_with("AB", 30);
  // oracle: enumerate candidates and check the partition by brute force
  for (size_t gold = 0; gold < 30; ++gold) {
    const Sample s = sample_with_tokens(6, 1, "AB", "expansion " + std::to_string(gold));
    const auto instances = build_instances(s, dict, 14, 300);
    REQUIRE(instances.size() == 3);
    CHECK(instances[0].real_option_count() == 14);
    CHECK(instances[1].real_option_count() == 14);
    CHECK(instances[2].real_option_count() == 2);

    std::vector<std::string> covered;
    size_t gold_hits = 0;
    for (const auto& inst : instances) {
      CHECK(inst.chunk_count == 3);
      for (size_t o = 0; o < inst.options.size(); ++o) {
        if (!inst.options[o].is_padding) covered.push_back(inst.options[o].candidate_text);
      }
      if (inst.gold_index) {
        ++gold_hits;
        CHECK(!inst.options[*inst.gold_index].is_padding);
        CHECK(inst.options[*inst.gold_index].candidate_text == *s.gold_expansion);
      }
    }
    CHECK(gold_hits == 1);
    CHECK(covered == dict.expansions("AB"));  // coverage, in dictionary order
  }
}

TEST_CASE("context carries sentinel markers around the acronym") {
  const Dictionary dict = dictionary_with("AB", 2);
  const Sample s = sample_with_tokens(4, 1, "AB");
  const auto instances = build_instances(s, dict, 14, 300);
  const auto& ctx = instances[0].options[0].context_tokens;
  const std::vector<std::string> expected = {"w0", kAcronymOpen, "AB", kAcronymClose, "w2", "w3"};
  CHECK(ctx == expected);
}

TEST_CASE("missing dictionary entry names the acronym") {
  const Dictionary dict = dictionary_with("XY", 2);
  const Sample s = sample_with_tokens(3, 0, "AB");
  CHECK_THROWS_WITH_AS(build_instances(s, dict, 14, 300), doctest::Contains("AB"),
                       ValidationError);
}

TEST_CASE("option width below 2 is rejected") {
  const Dictionary dict = dictionary_with("AB", 2);
  const Sample s = sample_with_tokens(3, 0, "AB");
  CHECK_THROWS_AS(build_instances(s, dict, 1, 300), ValidationError);
}

TEST_CASE("truncation keeps the leading window when the acronym fits") {
  std::vector<std::string> tokens;
  for (size_t i = 0; i < 500; ++i) tokens.push_back("t" + std::to_string(i));
  const TruncatedContext out = truncate_context(tokens, 10, 300);
  REQUIRE(out.tokens.size() == 300);
  CHECK(out.tokens.front() == "t0");
  CHECK(out.tokens.back() == "t299");
  CHECK(out.acronym_index == 10);
}

TEST_CASE("truncation is a no-op for short contexts") {
  std::vector<std::string> tokens(50, "x");
  const TruncatedContext out = truncate_context(tokens, 7, 300);
  CHECK(out.tokens == tokens);
  CHECK(out.acronym_index == 7);
}

TEST_CASE("truncation re-centers when the acronym falls past the limit") {
  std::vector<std::string> tokens;
  for (size_t i = 0; i < 700; ++i) tokens.push_back("t" + std::to_string(i));
  const TruncatedContext out = truncate_context(tokens, 400, 300);
  REQUIRE(out.tokens.size() == 300);
  // window [250, 550)
  CHECK(out.tokens.front() == "t250");
  CHECK(out.tokens.back() == "t549");
  // oracle: the acronym token is present in the output
  CHECK(out.tokens[out.acronym_index] == "t400");
}

TEST_CASE("truncation window clamps at the sequence end") {
  std::vector<std::string> tokens;
  for (size_t i = 0; i < 430; ++i) tokens.push_back("t" + std::to_string(i));
  const TruncatedContext out = truncate_context(tokens, 420, 300);
  REQUIRE(out.tokens.size() == 300);
  CHECK(out.tokens.front() == "t130");
  CHECK(out.tokens[out.acronym_index] == "t420");
}

TEST_CASE("truncation is idempotent") {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const size_t n = 1 + rng.below(80);
    const size_t limit = 1 + rng.below(40);
    std::vector<std::string> tokens;
    for (size_t i = 0; i < n; ++i) tokens.push_back("t" + std::to_string(i));
    const size_t acr = rng.below(n);
    const TruncatedContext once = truncate_context(tokens, acr, limit);
    const TruncatedContext twice = truncate_context(once.tokens, once.acronym_index, limit);
    CHECK(once.tokens == twice.tokens);
    CHECK(once.acronym_index == twice.acronym_index);
    CHECK(once.tokens[once.acronym_index] == tokens[acr]);
  }
}

TEST_CASE("candidate order shuffling still covers every candidate exactly once") {
  const Dictionary dict = dictionary_with("AB", 9);
  const Sample s = sample_with_tokens(5, 1, "AB", "expansion 4");
  ChoiceBuilderConfig cfg;
  cfg.option_width = 4;
  cfg.max_context_tokens = 300;
  cfg.shuffle_candidates = true;
  cfg.shuffle_seed = 3;
  const auto instances = build_instances(s, dict, cfg);
  std::vector<std::string> covered;
  size_t gold_hits = 0;
  for (const auto& inst : instances) {
    for (const auto& o : inst.options) {
      if (!o.is_padding) covered.push_back(o.candidate_text);
    }
    if (inst.gold_index) {
      ++gold_hits;
      CHECK(inst.options[*inst.gold_index].candidate_text == "expansion 4");
    }
  }
  CHECK(gold_hits == 1);
  std::sort(covered.begin(), covered.end());
  auto expected = dict.expansions("AB");
  std::sort(expected.begin(), expected.end());
  CHECK(covered == expected);

  // same seed reproduces the order
  const auto again = build_instances(s, dict, cfg);
  for (size_t i = 0; i < instances.size(); ++i) {
    for (size_t o = 0; o < instances[i].options.size(); ++o) {
      CHECK(again[i].options[o].candidate_text == instances[i].options[o].candidate_text);
    }
  }
}
