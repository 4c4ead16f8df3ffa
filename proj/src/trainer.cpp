#include "acrodis/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "acrodis/choice.hpp"
#include "acrodis/evaluate.hpp"
#include "acrodis/rng.hpp"
#include "acrodis/text.hpp"
#include "json.hpp"

namespace acrodis {

namespace {

constexpr uint64_t kEpochKey = 0x65706f6368ULL;  // shuffle stream
constexpr uint64_t kStepKey = 0x73746570ULL;     // child-tuning masks
constexpr uint64_t kDropKey = 0x64726f70ULL;     // dropout streams
constexpr double kClipNorm = 1.0;

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw std::runtime_error("train config: epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw std::runtime_error("train config: learning_rate must be > 0");
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) {
    throw std::runtime_error("train config: warmup_fraction must be in [0, 1)");
  }
  if (!(weight_decay >= 0.0)) throw std::runtime_error("train config: weight_decay must be >= 0");
  if (batch_size_instances < 1) {
    throw std::runtime_error("train config: batch_size_instances must be >= 1");
  }
  if (option_width < 2) throw std::runtime_error("train config: option_width must be >= 2");
  if (max_tokens < 1) throw std::runtime_error("train config: max_tokens must be >= 1");
  if (child_tuning.enabled && !(child_tuning.p_f > 0.0 && child_tuning.p_f <= 1.0)) {
    throw std::runtime_error("train config: child-tuning p_f must be in (0, 1]");
  }
  loss.validate();
}

void CurriculumPlan::validate() const {
  if (stage1_languages.empty()) {
    throw std::runtime_error("curriculum: stage1_languages must be non-empty");
  }
  if (stage2_language.empty()) {
    throw std::runtime_error("curriculum: stage2_language must be set");
  }
  stage1_config.validate();
  stage2_config.validate();
}

double lr_at(size_t step, size_t total_steps, const TrainConfig& config) {
  if (total_steps == 0) return 0.0;
  if (step > total_steps) throw std::runtime_error("lr_at: step beyond total_steps");
  const double total = static_cast<double>(total_steps);
  const double warmup = config.warmup_fraction * total;
  const double s = static_cast<double>(step);
  if (s < warmup) return config.learning_rate * s / warmup;
  if (total <= warmup) return 0.0;
  return config.learning_rate * (total - s) / (total - warmup);
}

void child_tuning_step(GradientSet& gradients, double p_f, uint64_t step_seed) {
  if (!(p_f > 0.0 && p_f <= 1.0)) {
    throw std::runtime_error("child_tuning_step: p_f must be in (0, 1]");
  }
  if (p_f == 1.0) return;
  const double scale = 1.0 / p_f;
  for (auto& t : gradients.tensors()) {
    const uint64_t tensor_key = mix_keys(step_seed, text::fnv1a(t.name));
    for (size_t i = 0; i < t.data.size(); ++i) {
      const uint64_t h = mix_keys(tensor_key, i);
      const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
      t.data[i] = u < p_f ? t.data[i] * scale : 0.0;
    }
  }
}

double clip_global_norm(GradientSet& gradients, double max_norm) {
  double sq = 0.0;
  for (const auto& t : gradients.tensors()) {
    for (double x : t.data) sq += x * x;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (auto& t : gradients.tensors()) {
      for (auto& x : t.data) x *= scale;
    }
  }
  return norm;
}

AdamW::AdamW(const ParameterSet& params, double beta1, double beta2, double eps)
    : m_(params.zeros_like()), v_(params.zeros_like()), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamW::step(ParameterSet& params, const GradientSet& gradients, double lr,
                 double weight_decay) {
  if (!params.same_layout(m_) || !gradients.same_layout(m_)) {
    throw std::runtime_error("adamw: parameter/gradient layout mismatch");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t ti = 0; ti < params.tensors().size(); ++ti) {
    auto& p = params.tensors()[ti].data;
    const auto& g = gradients.tensors()[ti].data;
    auto& m = m_.tensors()[ti].data;
    auto& v = v_.tensors()[ti].data;
    for (size_t i = 0; i < p.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= lr * (mhat / (std::sqrt(vhat) + eps_) + weight_decay * p[i]);
    }
  }
}

namespace {

std::vector<ChoiceInstance> build_training_instances(const Corpus& corpus,
                                                     const DictionarySet& dictionaries,
                                                     const TrainConfig& config) {
  std::vector<ChoiceInstance> instances;
  instances.reserve(corpus.samples.size());
  for (const auto& sample : corpus.samples) {
    if (!sample.gold_expansion) {
      throw std::runtime_error("train_stage: sample " + sample.id + " has no gold label");
    }
    auto chunks = build_instances(sample, dictionaries.for_sample(sample), config.option_width,
                                  config.max_tokens);
    for (auto& inst : chunks) {
      // only the chunk holding the gold candidate carries a training signal
      if (inst.gold_index) instances.push_back(std::move(inst));
    }
  }
  return instances;
}

}  // namespace

StageResult train_stage(const Corpus& corpus, const DictionarySet& dictionaries,
                        EncoderBackend& model, const TrainConfig& config,
                        const std::string& stage_tag, const Corpus* dev_corpus) {
  config.validate();
  if (corpus.samples.empty()) throw std::runtime_error("train_stage: corpus is empty");

  const std::vector<ChoiceInstance> instances =
      build_training_instances(corpus, dictionaries, config);
  const size_t n = instances.size();
  const size_t steps_per_epoch = (n + config.batch_size_instances - 1) / config.batch_size_instances;
  const size_t total_steps = config.epochs * steps_per_epoch;

  StageResult result;
  ParameterSet best_params;
  double best_dev = -1.0;
  size_t global_step = 0;
  AdamW optimizer(model.parameters());  // moments are not carried across stages

  for (size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(mix_keys(config.seed, kEpochKey, epoch));
    fisher_yates(order, shuffle_rng);

    double epoch_loss = 0.0;
    double lr = 0.0;
    for (size_t b = 0; b < n; b += config.batch_size_instances) {
      const size_t batch_end = std::min(n, b + config.batch_size_instances);
      const double inv_batch = 1.0 / static_cast<double>(batch_end - b);

      GradientSet grads = model.parameters().zeros_like();
      double batch_loss = 0.0;
      for (size_t i = b; i < batch_end; ++i) {
        const auto& inst = instances[order[i]];
        const uint64_t dropout_seed = mix_keys(config.seed, kDropKey, global_step, i - b);
        ForwardBackwardResult fb =
            model.forward_backward(inst, config.loss, ScoreMode::kTrain, dropout_seed);
        batch_loss += fb.loss;
        for (size_t ti = 0; ti < grads.tensors().size(); ++ti) {
          auto& acc = grads.tensors()[ti].data;
          const auto& g = fb.gradients.tensors()[ti].data;
          for (size_t j = 0; j < acc.size(); ++j) acc[j] += g[j] * inv_batch;
        }
      }
      batch_loss *= inv_batch;
      if (!std::isfinite(batch_loss)) {
        throw std::runtime_error("train_stage: non-finite loss at step " +
                                 std::to_string(global_step) + " (epoch " +
                                 std::to_string(epoch) + ")");
      }
      epoch_loss += batch_loss * static_cast<double>(batch_end - b);

      clip_global_norm(grads, kClipNorm);
      if (config.child_tuning.enabled) {
        child_tuning_step(grads, config.child_tuning.p_f,
                          mix_keys(config.seed, kStepKey, global_step));
      }
      lr = lr_at(global_step, total_steps, config);
      optimizer.step(model.parameters(), grads, lr, config.weight_decay);
      ++global_step;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.mean_loss = epoch_loss / static_cast<double>(n);
    record.lr_final = lr;
    if (dev_corpus) {
      const auto preds = predict_corpus(model, *dev_corpus, dictionaries, config.option_width,
                                        config.max_tokens);
      const MetricsReport metrics = score(preds, *dev_corpus);
      record.dev_macro_f1 = metrics.macro_f1;
      if (metrics.macro_f1 > best_dev) {
        best_dev = metrics.macro_f1;
        best_params = model.parameters();
        result.selected_epoch = epoch;
      }
    }
    result.log.push_back(record);
  }

  result.checkpoint.config = model.config();
  result.checkpoint.stage = stage_tag;
  result.checkpoint.seed = config.seed;
  result.checkpoint.rng_state = mix_keys(config.seed, kEpochKey, config.epochs);
  if (dev_corpus && best_dev >= 0.0) {
    result.checkpoint.params = std::move(best_params);
  } else {
    result.checkpoint.params = model.parameters();
    result.selected_epoch = config.epochs - 1;
  }
  return result;
}

CurriculumResult run_curriculum(const std::map<LanguageTag, Corpus>& train_corpora,
                                const DictionarySet& dictionaries, const CurriculumPlan& plan,
                                const EncoderConfig& encoder_config,
                                const std::map<LanguageTag, Corpus>* dev_corpora) {
  plan.validate();
  for (const auto& lang : plan.stage1_languages) {
    if (!train_corpora.count(lang)) {
      throw std::runtime_error("curriculum: no training corpus for stage-1 language '" + lang + "'");
    }
  }
  if (!train_corpora.count(plan.stage2_language)) {
    throw std::runtime_error("curriculum: no training corpus for stage-2 language '" +
                             plan.stage2_language + "'");
  }

  std::vector<Corpus> stage1_inputs;
  for (const auto& lang : plan.stage1_languages) stage1_inputs.push_back(train_corpora.at(lang));
  const Corpus mixed = mix_corpora(stage1_inputs, plan.stage1_config.seed);

  const Corpus* target_dev = nullptr;
  if (dev_corpora) {
    auto it = dev_corpora->find(plan.stage2_language);
    if (it != dev_corpora->end()) target_dev = &it->second;
  }

  CurriculumResult result;
  ReferenceEncoder model(encoder_config);
  result.stage1 = train_stage(mixed, dictionaries, model, plan.stage1_config, "stage1", target_dev);

  auto stage2_model = encoder_from_checkpoint(result.stage1.checkpoint);
  result.stage2 = train_stage(train_corpora.at(plan.stage2_language), dictionaries, *stage2_model,
                              plan.stage2_config, "stage2", target_dev);
  return result;
}

std::string training_log_lines(const std::vector<EpochRecord>& log) {
  std::ostringstream out;
  for (const auto& r : log) {
    nlohmann::ordered_json j;
    j["epoch"] = r.epoch;
    j["mean_loss"] = r.mean_loss;
    j["dev_macro_f1"] = r.dev_macro_f1 ? nlohmann::ordered_json(*r.dev_macro_f1)
                                       : nlohmann::ordered_json(nullptr);
    j["lr_final"] = r.lr_final;
    out << j.dump() << "\n";
  }
  return out.str();
}

}  // namespace acrodis
