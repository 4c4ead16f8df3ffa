#include "acrodis/synthetic.hpp"

#include <filesystem>

#include "acrodis/rng.hpp"
#include "acrodis/text.hpp"

namespace acrodis {

void SyntheticSpec::validate() const {
  if (n_languages < 1) throw ValidationError("synthetic: n_languages must be >= 1");
  if (acronyms_per_language < 1) throw ValidationError("synthetic: need at least one acronym");
  if (candidates_per_acronym < 2) {
    throw ValidationError("synthetic: candidates_per_acronym must be >= 2");
  }
  if (noise_vocab_size < 1) throw ValidationError("synthetic: noise_vocab_size must be >= 1");
  if (context_length < 4) {
    throw ValidationError("synthetic: context_length must be >= 4 (cue, acronym, family, noise)");
  }
  if (!(cue_strength >= 0.0 && cue_strength <= 1.0)) {
    throw ValidationError("synthetic: cue_strength must be in [0, 1]");
  }
}

namespace {

std::string language_name(size_t l) { return "syn" + std::to_string(l); }

std::string acronym_token(size_t l, size_t a) {
  return "zz" + std::to_string(l) + "x" + std::to_string(a);
}

std::string expansion_text(size_t l, size_t a, size_t k) {
  return "ex" + std::to_string(l) + "x" + std::to_string(a) + "x" + std::to_string(k) + " fam" +
         std::to_string(k);
}

Corpus make_split(const SyntheticSpec& spec, size_t lang_index, const std::string& split,
                  size_t count, bool cue_correlated) {
  const size_t C = spec.candidates_per_acronym;
  Corpus corpus;
  corpus.language = language_name(lang_index);

  Rng rng(mix_keys(spec.seed, text::fnv1a(corpus.language), text::fnv1a(split)));
  for (size_t i = 0; i < count; ++i) {
    const size_t a = rng.below(spec.acronyms_per_language);
    const size_t k = rng.below(C);

    size_t cue = rng.below(C);
    if (cue_correlated && rng.uniform() < spec.cue_strength) {
      cue = (k + lang_index) % C;  // per-language rotation; cancels in a mix
    }

    std::vector<std::string> body;
    body.push_back(acronym_token(lang_index, a));
    body.push_back("fam" + std::to_string(k));
    for (size_t t = 0; t + 4 < spec.context_length; ++t) {
      body.push_back("n" + std::to_string(lang_index) + "w" +
                     std::to_string(rng.below(spec.noise_vocab_size)));
    }
    fisher_yates(body, rng);

    Sample s;
    s.id = split + "-" + std::to_string(i);
    s.language = corpus.language;
    // the cue is doubled so it outweighs any single token in the pooled
    // representation; the family marker floats alone among the noise
    s.tokens.push_back("cue" + std::to_string(cue));
    s.tokens.push_back("cue" + std::to_string(cue));
    s.tokens.insert(s.tokens.end(), body.begin(), body.end());
    for (size_t t = 0; t < s.tokens.size(); ++t) {
      if (s.tokens[t] == acronym_token(lang_index, a)) {
        s.acronym_index = t;
        break;
      }
    }
    s.gold_expansion = expansion_text(lang_index, a, k);
    corpus.samples.push_back(std::move(s));
  }
  corpus.provenance = {{corpus.language, corpus.samples.size()}};
  return corpus;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticData data;
  for (size_t l = 0; l < spec.n_languages; ++l) {
    SyntheticLanguage lang;
    lang.language = language_name(l);
    for (size_t a = 0; a < spec.acronyms_per_language; ++a) {
      std::vector<std::string> expansions;
      for (size_t k = 0; k < spec.candidates_per_acronym; ++k) {
        expansions.push_back(expansion_text(l, a, k));
      }
      lang.dictionary.add_entry(acronym_token(l, a), std::move(expansions));
    }
    lang.train = make_split(spec, l, "train", spec.train_per_language, true);
    lang.dev = make_split(spec, l, "dev", spec.dev_per_language, false);
    lang.test = make_split(spec, l, "test", spec.test_per_language, false);
    data.languages.push_back(std::move(lang));
  }
  return data;
}

DictionarySet SyntheticData::dictionaries() const {
  DictionarySet set;
  for (const auto& lang : languages) set.add(lang.language, lang.dictionary);
  return set;
}

std::map<LanguageTag, Corpus> SyntheticData::train_corpora() const {
  std::map<LanguageTag, Corpus> out;
  for (const auto& lang : languages) out[lang.language] = lang.train;
  return out;
}

std::map<LanguageTag, Corpus> SyntheticData::dev_corpora() const {
  std::map<LanguageTag, Corpus> out;
  for (const auto& lang : languages) out[lang.language] = lang.dev;
  return out;
}

std::map<LanguageTag, Corpus> SyntheticData::test_corpora() const {
  std::map<LanguageTag, Corpus> out;
  for (const auto& lang : languages) out[lang.language] = lang.test;
  return out;
}

void write_synthetic(const SyntheticData& data, const std::string& out_dir) {
  namespace fs = std::filesystem;
  for (const auto& lang : data.languages) {
    const fs::path dir = fs::path(out_dir) / lang.language;
    fs::create_directories(dir);
    save_corpus(lang.train, (dir / "train.json").string());
    save_corpus(lang.dev, (dir / "dev.json").string());
    save_corpus(lang.test, (dir / "test.json").string());
    save_dictionary(lang.dictionary, (dir / "dictionary.json").string());
  }
}

}  // namespace acrodis
