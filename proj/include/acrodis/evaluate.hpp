#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "acrodis/data.hpp"
#include "acrodis/encoder.hpp"

namespace acrodis {

struct Prediction {
  std::string sample_id;
  std::string predicted_expansion;
  double score = 0.0;  // winning probability, renormalized within its chunk
};

struct ClassCounts {
  size_t tp = 0;
  size_t fp = 0;
  size_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Per-expansion-class counts plus macro aggregates. macro_f1 is the
// unweighted mean of per-class F1; headline_f1 is the harmonic mean of
// macro precision and macro recall, the figure reported in summaries.
struct MetricsReport {
  std::map<std::string, ClassCounts> per_class;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double headline_f1 = 0.0;
  size_t n_classes = 0;
};

// 2pr/(p+r), 0 when p + r = 0.
double harmonic_f1(double precision, double recall);

// Scores every chunk of the sample in eval mode and picks the winner across
// all real candidates by raw logit (per-option scores are chunk-independent,
// so this equals independently scoring each candidate). Ties break toward
// the lowest candidate index. The reported score is the winner's probability
// renormalized within its chunk.
Prediction predict(const EncoderBackend& model, const Sample& sample,
                   const Dictionary& dictionary, size_t option_width, size_t max_tokens);

std::vector<Prediction> predict_corpus(const EncoderBackend& model, const Corpus& corpus,
                                       const DictionarySet& dictionaries, size_t option_width,
                                       size_t max_tokens);

// Probabilities over the full candidate list of one sample: a single softmax
// over all per-candidate logits, so the argmax matches predict() exactly.
// This is the exchange format for model fusion.
struct CandidateDistribution {
  std::string sample_id;
  std::vector<std::string> candidates;  // dictionary order
  std::vector<double> probs;
};

CandidateDistribution predict_distribution(const EncoderBackend& model, const Sample& sample,
                                           const Dictionary& dictionary, size_t option_width,
                                           size_t max_tokens);

// Weighted arithmetic mean of per-option probabilities, renormalized.
// Default weights are equal. Masks must match across models.
OptionDistribution fuse(const std::vector<OptionDistribution>& distributions,
                        const std::vector<double>& weights = {});

// Per-class precision/recall/F1 over the union of gold and predicted
// expansion classes. Requires exactly one prediction per gold sample.
MetricsReport score(const std::vector<Prediction>& predictions, const Corpus& gold);

// Prediction files: JSON array of {"id", "prediction"}.
std::vector<Prediction> load_predictions(const std::string& path);
void save_predictions(const std::vector<Prediction>& predictions, const std::string& path);

std::string metrics_to_json(const MetricsReport& report);
// One line, tab-separated: precision, recall, headline macro F1.
std::string metrics_tsv_line(const MetricsReport& report);

}  // namespace acrodis
