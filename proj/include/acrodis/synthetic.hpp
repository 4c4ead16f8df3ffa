#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "acrodis/data.hpp"

namespace acrodis {

// Rigged multilingual benchmark for debiasing experiments. Every sample's
// context contains the family marker of its gold expansion (the real
// signal, present in every split). A shared surface cue token sits at
// position 0: in each language's train split it predicts the gold family
// through a language-specific permutation with probability cue_strength,
// while dev/test draw it uniformly. Mixing languages cancels the
// per-language permutations, so the cue carries no information in a mixed
// corpus.
struct SyntheticSpec {
  size_t n_languages = 3;
  size_t train_per_language = 200;
  size_t dev_per_language = 50;
  size_t test_per_language = 50;
  size_t acronyms_per_language = 5;
  size_t candidates_per_acronym = 3;
  size_t noise_vocab_size = 40;
  size_t context_length = 12;
  double cue_strength = 0.9;
  uint64_t seed = 0;

  void validate() const;
};

struct SyntheticLanguage {
  LanguageTag language;
  Corpus train;
  Corpus dev;
  Corpus test;
  Dictionary dictionary;
};

struct SyntheticData {
  std::vector<SyntheticLanguage> languages;

  DictionarySet dictionaries() const;
  std::map<LanguageTag, Corpus> train_corpora() const;
  std::map<LanguageTag, Corpus> dev_corpora() const;
  std::map<LanguageTag, Corpus> test_corpora() const;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

// Writes out_dir/<language>/{train,dev,test,dictionary}.json.
void write_synthetic(const SyntheticData& data, const std::string& out_dir);

}  // namespace acrodis
