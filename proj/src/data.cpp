#include "acrodis/data.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "acrodis/rng.hpp"
#include "acrodis/text.hpp"
#include "json.hpp"

namespace acrodis {

using ordered_json = nlohmann::ordered_json;

void Dictionary::add_entry(const std::string& acronym, std::vector<std::string> expansions) {
  if (expansions.empty()) {
    throw ValidationError("dictionary entry '" + acronym + "' has an empty expansion list");
  }
  std::unordered_set<std::string> seen;
  for (const auto& e : expansions) {
    if (!seen.insert(e).second) {
      throw ValidationError("dictionary entry '" + acronym + "' has duplicate expansion '" + e + "'");
    }
  }
  if (index_.count(acronym)) {
    throw ValidationError("dictionary has duplicate entry '" + acronym + "'");
  }
  index_[acronym] = entries_.size();
  entries_.emplace_back(acronym, std::move(expansions));
}

bool Dictionary::contains(const std::string& acronym) const { return index_.count(acronym) > 0; }

const std::vector<std::string>* Dictionary::find(const std::string& acronym) const {
  auto it = index_.find(acronym);
  if (it == index_.end()) return nullptr;
  return &entries_[it->second].second;
}

const std::vector<std::string>& Dictionary::expansions(const std::string& acronym) const {
  const auto* e = find(acronym);
  if (!e) throw ValidationError("acronym '" + acronym + "' not found in dictionary");
  return *e;
}

const Dictionary& DictionarySet::for_language(const LanguageTag& language) const {
  auto it = dicts_.find(language);
  if (it == dicts_.end()) {
    throw ValidationError("no dictionary registered for language '" + language + "'");
  }
  return it->second;
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write file: " + path);
  out << content;
}

ordered_json parse_json(const std::string& text, const std::string& what) {
  try {
    return ordered_json::parse(text);
  } catch (const std::exception& e) {
    // nlohmann reports the byte offset of the failure
    throw ValidationError(what + ": " + e.what());
  }
}

Sample parse_sample(const ordered_json& rec, size_t record_index, const LanguageTag& language,
                    const Dictionary* dictionary) {
  auto fail = [&](const std::string& rule) -> ValidationError {
    std::string id = rec.is_object() && rec.contains("id") && rec["id"].is_string()
                         ? rec["id"].get<std::string>()
                         : ("#" + std::to_string(record_index));
    return ValidationError("sample " + id + " (record " + std::to_string(record_index) + "): " + rule);
  };

  if (!rec.is_object()) throw fail("record is not an object");
  if (!rec.contains("id") || !rec["id"].is_string()) throw fail("missing string field 'id'");
  if (!rec.contains("tokens") || !rec["tokens"].is_array()) throw fail("missing array field 'tokens'");
  if (!rec.contains("acronym") || !rec["acronym"].is_number_integer())
    throw fail("missing integer field 'acronym'");

  Sample s;
  s.id = rec["id"].get<std::string>();
  s.language = language;
  for (const auto& t : rec["tokens"]) {
    if (!t.is_string()) throw fail("'tokens' must contain only strings");
    s.tokens.push_back(text::nfc(t.get<std::string>()));
  }
  if (s.tokens.empty()) throw fail("tokens must be non-empty");

  const int64_t idx = rec["acronym"].get<int64_t>();
  if (idx < 0 || static_cast<size_t>(idx) >= s.tokens.size()) {
    throw fail("acronym index " + std::to_string(idx) + " out of range [0, " +
               std::to_string(s.tokens.size()) + ")");
  }
  s.acronym_index = static_cast<size_t>(idx);

  if (rec.contains("label") && !rec["label"].is_null()) {
    if (!rec["label"].is_string()) throw fail("'label' must be a string or null");
    s.gold_expansion = text::nfc(rec["label"].get<std::string>());
    if (dictionary) {
      const auto* exps = dictionary->find(s.acronym());
      if (!exps) throw fail("acronym '" + s.acronym() + "' not found in dictionary");
      if (std::find(exps->begin(), exps->end(), *s.gold_expansion) == exps->end()) {
        throw fail("gold expansion '" + *s.gold_expansion + "' is not a candidate of '" +
                   s.acronym() + "'");
      }
    }
  }
  return s;
}

Corpus parse_corpus_impl(const std::string& json_text, const LanguageTag& language,
                         const Dictionary* dictionary, bool require_labels) {
  ordered_json j = parse_json(json_text, "corpus");
  if (!j.is_array()) throw ValidationError("corpus: top-level JSON value must be an array");

  Corpus corpus;
  corpus.language = language;
  std::unordered_set<std::string> ids;
  size_t record_index = 0;
  for (const auto& rec : j) {
    Sample s = parse_sample(rec, record_index, language, dictionary);
    if (require_labels && !s.gold_expansion) {
      throw ValidationError("sample " + s.id + " (record " + std::to_string(record_index) +
                            "): gold label required");
    }
    if (!ids.insert(s.id).second) {
      throw ValidationError("sample " + s.id + " (record " + std::to_string(record_index) +
                            "): duplicate id");
    }
    corpus.samples.push_back(std::move(s));
    ++record_index;
  }
  corpus.provenance = {{language, corpus.samples.size()}};
  return corpus;
}

}  // namespace

Corpus parse_corpus(const std::string& json_text, const LanguageTag& language,
                    const Dictionary& dictionary) {
  return parse_corpus_impl(json_text, language, &dictionary, false);
}

Corpus load_corpus(const std::string& path, const LanguageTag& language,
                   const Dictionary& dictionary) {
  try {
    return parse_corpus(read_file(path), language, dictionary);
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

Corpus load_gold_corpus(const std::string& path, const LanguageTag& language) {
  try {
    return parse_corpus_impl(read_file(path), language, nullptr, true);
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

std::string serialize_corpus(const Corpus& corpus) {
  ordered_json arr = ordered_json::array();
  for (const auto& s : corpus.samples) {
    ordered_json rec;
    rec["id"] = s.id;
    rec["tokens"] = s.tokens;
    rec["acronym"] = s.acronym_index;
    rec["label"] = s.gold_expansion ? ordered_json(*s.gold_expansion) : ordered_json(nullptr);
    arr.push_back(std::move(rec));
  }
  return arr.dump(2) + "\n";
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  write_file(path, serialize_corpus(corpus));
}

Dictionary parse_dictionary(const std::string& json_text) {
  ordered_json j = parse_json(json_text, "dictionary");
  if (!j.is_object()) throw ValidationError("dictionary: top-level JSON value must be an object");
  Dictionary dict;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it.value().is_array()) {
      throw ValidationError("dictionary entry '" + it.key() + "' must be an array of strings");
    }
    std::vector<std::string> expansions;
    for (const auto& e : it.value()) {
      if (!e.is_string()) {
        throw ValidationError("dictionary entry '" + it.key() + "' must contain only strings");
      }
      expansions.push_back(text::nfc(e.get<std::string>()));
    }
    dict.add_entry(text::nfc(it.key()), std::move(expansions));
  }
  return dict;
}

Dictionary load_dictionary(const std::string& path) {
  try {
    return parse_dictionary(read_file(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

std::string serialize_dictionary(const Dictionary& dictionary) {
  ordered_json obj = ordered_json::object();
  for (const auto& [acr, exps] : dictionary.entries()) obj[acr] = exps;
  return obj.dump(2) + "\n";
}

void save_dictionary(const Dictionary& dictionary, const std::string& path) {
  write_file(path, serialize_dictionary(dictionary));
}

Corpus mix_corpora(const std::vector<Corpus>& corpora, uint64_t seed) {
  if (corpora.empty()) throw ValidationError("mix_corpora: no input corpora");

  Corpus mixed;
  mixed.language = "mixed";
  std::unordered_set<std::string> ids;
  for (const auto& c : corpora) {
    for (const auto& s : c.samples) {
      Sample copy = s;
      copy.id = c.language + ":" + s.id;
      if (!ids.insert(copy.id).second) {
        throw ValidationError("mix_corpora: id collision after prefixing: " + copy.id);
      }
      mixed.samples.push_back(std::move(copy));
    }
    mixed.provenance.emplace_back(c.language, c.samples.size());
  }
  Rng rng(mix_keys(seed, 0x6d69785fULL));  // "mix_"
  fisher_yates(mixed.samples, rng);
  return mixed;
}

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats stats;
  std::unordered_set<std::string> acronyms;
  for (const auto& s : corpus.samples) {
    ++stats.per_language[s.language];
    acronyms.insert(s.acronym());
  }
  stats.distinct_acronyms = acronyms.size();
  return stats;
}

}  // namespace acrodis
