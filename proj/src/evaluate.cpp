#include "acrodis/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "acrodis/choice.hpp"
#include "json.hpp"

namespace acrodis {

using ordered_json = nlohmann::ordered_json;

double harmonic_f1(double precision, double recall) {
  const double s = precision + recall;
  if (s <= 0.0) return 0.0;
  return 2.0 * precision * recall / s;
}

Prediction predict(const EncoderBackend& model, const Sample& sample,
                   const Dictionary& dictionary, size_t option_width, size_t max_tokens) {
  const auto instances = build_instances(sample, dictionary, option_width, max_tokens);

  Prediction best;
  best.sample_id = sample.id;
  double best_logit = 0.0;
  bool found = false;
  for (const auto& inst : instances) {
    const OptionLogits logits = model.score_options(inst, ScoreMode::kEval, 0);
    const OptionDistribution dist = softmax_over_options(logits);
    for (size_t o = 0; o < inst.options.size(); ++o) {
      if (inst.options[o].is_padding) continue;
      if (!found || logits.values[o] > best_logit) {
        found = true;
        best_logit = logits.values[o];
        best.predicted_expansion = inst.options[o].candidate_text;
        best.score = dist.probs[o];
      }
    }
  }
  if (!found) {
    throw ValidationError("predict: sample " + sample.id + " produced no scorable candidate");
  }
  return best;
}

std::vector<Prediction> predict_corpus(const EncoderBackend& model, const Corpus& corpus,
                                       const DictionarySet& dictionaries, size_t option_width,
                                       size_t max_tokens) {
  std::vector<Prediction> out;
  out.reserve(corpus.samples.size());
  for (const auto& sample : corpus.samples) {
    out.push_back(predict(model, sample, dictionaries.for_sample(sample), option_width, max_tokens));
  }
  return out;
}

CandidateDistribution predict_distribution(const EncoderBackend& model, const Sample& sample,
                                           const Dictionary& dictionary, size_t option_width,
                                           size_t max_tokens) {
  const auto instances = build_instances(sample, dictionary, option_width, max_tokens);
  CandidateDistribution out;
  out.sample_id = sample.id;
  std::vector<double> all_logits;
  for (const auto& inst : instances) {
    const OptionLogits logits = model.score_options(inst, ScoreMode::kEval, 0);
    for (size_t o = 0; o < inst.options.size(); ++o) {
      if (inst.options[o].is_padding) continue;
      out.candidates.push_back(inst.options[o].candidate_text);
      all_logits.push_back(logits.values[o]);
    }
  }
  if (all_logits.empty()) {
    throw ValidationError("predict: sample " + sample.id + " produced no scorable candidate");
  }
  const double mx = *std::max_element(all_logits.begin(), all_logits.end());
  double z = 0.0;
  out.probs.resize(all_logits.size());
  for (size_t i = 0; i < all_logits.size(); ++i) {
    out.probs[i] = std::exp(all_logits[i] - mx);
    z += out.probs[i];
  }
  for (auto& p : out.probs) p /= z;
  return out;
}

OptionDistribution fuse(const std::vector<OptionDistribution>& distributions,
                        const std::vector<double>& weights) {
  if (distributions.empty()) throw std::runtime_error("fuse: no distributions given");
  const size_t K = distributions.front().probs.size();
  for (const auto& d : distributions) {
    if (d.probs.size() != K || d.padding_mask != distributions.front().padding_mask) {
      throw std::runtime_error("fuse: distributions have mismatched option masks");
    }
  }
  std::vector<double> w = weights;
  if (w.empty()) {
    w.assign(distributions.size(), 1.0);
  } else if (w.size() != distributions.size()) {
    throw std::runtime_error("fuse: weight count does not match model count");
  }
  double wsum = 0.0;
  for (double x : w) {
    if (x < 0.0) throw std::runtime_error("fuse: weights must be non-negative");
    wsum += x;
  }
  if (wsum <= 0.0) throw std::runtime_error("fuse: weights must sum to a positive value");

  OptionDistribution out;
  out.padding_mask = distributions.front().padding_mask;
  out.probs.assign(K, 0.0);
  for (size_t m = 0; m < distributions.size(); ++m) {
    for (size_t k = 0; k < K; ++k) out.probs[k] += w[m] * distributions[m].probs[k];
  }
  double z = 0.0;
  for (size_t k = 0; k < K; ++k) {
    if (out.padding_mask[k]) {
      out.probs[k] = 0.0;
    } else {
      z += out.probs[k];
    }
  }
  if (z <= 0.0) throw std::runtime_error("fuse: fused mass is zero");
  for (size_t k = 0; k < K; ++k) out.probs[k] /= z;
  return out;
}

MetricsReport score(const std::vector<Prediction>& predictions, const Corpus& gold) {
  std::unordered_map<std::string, const Prediction*> by_id;
  std::vector<std::string> duplicates;
  for (const auto& p : predictions) {
    if (!by_id.emplace(p.sample_id, &p).second) duplicates.push_back(p.sample_id);
  }
  std::vector<std::string> missing;
  std::unordered_set<std::string> gold_ids;
  for (const auto& s : gold.samples) {
    gold_ids.insert(s.id);
    if (!by_id.count(s.id)) missing.push_back(s.id);
  }
  std::vector<std::string> extra;
  for (const auto& p : predictions) {
    if (!gold_ids.count(p.sample_id)) extra.push_back(p.sample_id);
  }
  if (!duplicates.empty() || !missing.empty() || !extra.empty()) {
    std::ostringstream msg;
    msg << "score: prediction ids do not align with gold ids";
    auto list = [&msg](const char* what, const std::vector<std::string>& ids) {
      if (ids.empty()) return;
      msg << "; " << what << ":";
      size_t shown = 0;
      for (const auto& id : ids) {
        if (shown++ == 10) {
          msg << " ... (" << ids.size() << " total)";
          break;
        }
        msg << " " << id;
      }
    };
    list("duplicate", duplicates);
    list("missing", missing);
    list("extra", extra);
    throw ValidationError(msg.str());
  }

  MetricsReport report;
  for (const auto& s : gold.samples) {
    if (!s.gold_expansion) {
      throw ValidationError("score: gold sample " + s.id + " has no label");
    }
    const auto& pred = by_id.at(s.id)->predicted_expansion;
    const auto& truth = *s.gold_expansion;
    if (pred == truth) {
      report.per_class[truth].tp += 1;
    } else {
      report.per_class[pred].fp += 1;
      report.per_class[truth].fn += 1;
    }
  }

  report.n_classes = report.per_class.size();
  for (auto& [cls, c] : report.per_class) {
    c.precision = c.tp + c.fp == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    c.recall = c.tp + c.fn == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    c.f1 = harmonic_f1(c.precision, c.recall);
    report.macro_precision += c.precision;
    report.macro_recall += c.recall;
    report.macro_f1 += c.f1;
  }
  if (report.n_classes > 0) {
    report.macro_precision /= static_cast<double>(report.n_classes);
    report.macro_recall /= static_cast<double>(report.n_classes);
    report.macro_f1 /= static_cast<double>(report.n_classes);
  }
  report.headline_f1 = harmonic_f1(report.macro_precision, report.macro_recall);
  return report;
}

std::vector<Prediction> load_predictions(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open predictions file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  ordered_json j = ordered_json::parse(ss.str(), nullptr, false);
  if (j.is_discarded() || !j.is_array()) {
    throw ValidationError(path + ": predictions must be a JSON array");
  }
  std::vector<Prediction> out;
  size_t idx = 0;
  for (const auto& rec : j) {
    if (!rec.is_object() || !rec.contains("id") || !rec.contains("prediction") ||
        !rec["id"].is_string() || !rec["prediction"].is_string()) {
      throw ValidationError(path + ": record " + std::to_string(idx) +
                            " must be {\"id\": str, \"prediction\": str}");
    }
    Prediction p;
    p.sample_id = rec["id"].get<std::string>();
    p.predicted_expansion = rec["prediction"].get<std::string>();
    if (rec.contains("score") && rec["score"].is_number()) p.score = rec["score"].get<double>();
    out.push_back(std::move(p));
    ++idx;
  }
  return out;
}

void save_predictions(const std::vector<Prediction>& predictions, const std::string& path) {
  ordered_json arr = ordered_json::array();
  for (const auto& p : predictions) {
    ordered_json rec;
    rec["id"] = p.sample_id;
    rec["prediction"] = p.predicted_expansion;
    rec["score"] = p.score;
    arr.push_back(std::move(rec));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write predictions file: " + path);
  out << arr.dump(2) << "\n";
}

std::string metrics_to_json(const MetricsReport& report) {
  ordered_json j;
  j["n_classes"] = report.n_classes;
  j["macro_precision"] = report.macro_precision;
  j["macro_recall"] = report.macro_recall;
  j["macro_f1"] = report.macro_f1;
  j["headline_f1"] = report.headline_f1;
  ordered_json per = ordered_json::object();
  for (const auto& [cls, c] : report.per_class) {
    ordered_json e;
    e["tp"] = c.tp;
    e["fp"] = c.fp;
    e["fn"] = c.fn;
    e["precision"] = c.precision;
    e["recall"] = c.recall;
    e["f1"] = c.f1;
    per[cls] = std::move(e);
  }
  j["per_class"] = std::move(per);
  return j.dump(2) + "\n";
}

std::string metrics_tsv_line(const MetricsReport& report) {
  std::ostringstream ss;
  ss.precision(4);
  ss << std::fixed << report.macro_precision << "\t" << report.macro_recall << "\t"
     << report.headline_f1;
  return ss.str();
}

}  // namespace acrodis
