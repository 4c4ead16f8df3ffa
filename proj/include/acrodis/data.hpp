#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace acrodis {

// Raised for schema/invariant violations in corpora, dictionaries,
// predictions and configs. Messages name the offending record and rule.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using LanguageTag = std::string;

// One sentence with a marked acronym occurrence. Tokens are NFC-normalized
// at load time so diacritic variants compare equal.
struct Sample {
  std::string id;
  std::vector<std::string> tokens;
  size_t acronym_index = 0;
  LanguageTag language;
  std::optional<std::string> gold_expansion;

  const std::string& acronym() const { return tokens[acronym_index]; }
};

// Acronym -> ordered candidate expansions. Entry order and expansion order
// are preserved from the source file so candidate indices are reproducible.
class Dictionary {
 public:
  void add_entry(const std::string& acronym, std::vector<std::string> expansions);

  bool contains(const std::string& acronym) const;
  // throws ValidationError when absent
  const std::vector<std::string>& expansions(const std::string& acronym) const;
  const std::vector<std::string>* find(const std::string& acronym) const;

  size_t size() const { return entries_.size(); }
  const std::vector<std::pair<std::string, std::vector<std::string>>>& entries() const {
    return entries_;
  }

 private:
  std::vector<std::pair<std::string, std::vector<std::string>>> entries_;
  std::unordered_map<std::string, size_t> index_;
};

// Per-language dictionaries; splits are never merged, lookups go through the
// sample's language tag.
class DictionarySet {
 public:
  DictionarySet() = default;
  explicit DictionarySet(std::map<LanguageTag, Dictionary> dicts) : dicts_(std::move(dicts)) {}

  void add(const LanguageTag& language, Dictionary dict) { dicts_[language] = std::move(dict); }
  const Dictionary& for_language(const LanguageTag& language) const;
  const Dictionary& for_sample(const Sample& sample) const { return for_language(sample.language); }
  bool has(const LanguageTag& language) const { return dicts_.count(language) > 0; }

 private:
  std::map<LanguageTag, Dictionary> dicts_;
};

struct Corpus {
  std::vector<Sample> samples;
  LanguageTag language;  // "mixed" for mixed corpora
  std::vector<std::pair<LanguageTag, size_t>> provenance;

  size_t size() const { return samples.size(); }
};

struct CorpusStats {
  std::map<LanguageTag, size_t> per_language;
  size_t distinct_acronyms = 0;
};

// Corpus files are JSON arrays of {"id", "tokens", "acronym", "label"}.
Corpus load_corpus(const std::string& path, const LanguageTag& language,
                   const Dictionary& dictionary);
Corpus parse_corpus(const std::string& json_text, const LanguageTag& language,
                    const Dictionary& dictionary);

// Lenient variant for scoring: labels required, dictionary membership not
// checked (the gold file may ship without its dictionary).
Corpus load_gold_corpus(const std::string& path, const LanguageTag& language);

std::string serialize_corpus(const Corpus& corpus);
void save_corpus(const Corpus& corpus, const std::string& path);

// Dictionary files are one JSON object {acronym: [expansions]}.
Dictionary load_dictionary(const std::string& path);
Dictionary parse_dictionary(const std::string& json_text);
std::string serialize_dictionary(const Dictionary& dictionary);
void save_dictionary(const Dictionary& dictionary, const std::string& path);

// Seeded uniform shuffle of all input samples into one corpus with language
// "mixed". Sample ids are prefixed with "<language>:" to stay traceable.
Corpus mix_corpora(const std::vector<Corpus>& corpora, uint64_t seed);

CorpusStats corpus_stats(const Corpus& corpus);

}  // namespace acrodis
