#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "acrodis/checkpoint.hpp"
#include "acrodis/data.hpp"
#include "acrodis/encoder.hpp"
#include "acrodis/losses.hpp"

namespace acrodis {

struct ChildTuningConfig {
  bool enabled = false;
  double p_f = 0.3;  // keep probability of the task-free Bernoulli mask
};

struct TrainConfig {
  size_t epochs = 16;
  double learning_rate = 1e-5;
  double warmup_fraction = 0.1;
  double weight_decay = 1e-5;
  size_t batch_size_instances = 1;
  size_t option_width = 14;
  size_t max_tokens = 300;
  ChildTuningConfig child_tuning;
  LossConfig loss;
  uint64_t seed = 0;

  void validate() const;
};

// Two-stage curriculum: a multilingual mixed stage followed by a monolingual
// fine-tuning stage on the target language.
struct CurriculumPlan {
  std::vector<LanguageTag> stage1_languages;
  LanguageTag stage2_language;
  TrainConfig stage1_config;
  TrainConfig stage2_config;

  void validate() const;
};

// Linear ramp from 0 to learning_rate over warmup_fraction * total_steps,
// then linear decay to 0 at total_steps.
double lr_at(size_t step, size_t total_steps, const TrainConfig& config);

// Task-free Child-Tuning: each gradient entry is independently kept with
// probability p_f and rescaled by 1/p_f, otherwise zeroed. The mask is a
// pure function of (step_seed, tensor name, entry index). p_f = 1 is an
// exact no-op.
void child_tuning_step(GradientSet& gradients, double p_f, uint64_t step_seed);

// Scales gradients so their global L2 norm is at most max_norm.
double clip_global_norm(GradientSet& gradients, double max_norm);

// Decoupled weight-decay adaptive optimizer.
class AdamW {
 public:
  explicit AdamW(const ParameterSet& params, double beta1 = 0.9, double beta2 = 0.999,
                 double eps = 1e-8);

  void step(ParameterSet& params, const GradientSet& gradients, double lr, double weight_decay);
  size_t steps_taken() const { return t_; }

 private:
  ParameterSet m_;
  ParameterSet v_;
  double beta1_, beta2_, eps_;
  size_t t_ = 0;
};

struct EpochRecord {
  size_t epoch = 0;
  double mean_loss = 0.0;
  std::optional<double> dev_macro_f1;
  double lr_final = 0.0;
};

struct StageResult {
  Checkpoint checkpoint;  // best dev Macro-F1 epoch when dev is given, else final
  std::vector<EpochRecord> log;
  size_t selected_epoch = 0;
};

// One optimization stage over a labeled corpus. Mutates the model in place;
// the returned checkpoint holds the selected parameters. Deterministic given
// (config.seed, data, config).
StageResult train_stage(const Corpus& corpus, const DictionarySet& dictionaries,
                        EncoderBackend& model, const TrainConfig& config,
                        const std::string& stage_tag, const Corpus* dev_corpus = nullptr);

struct CurriculumResult {
  StageResult stage1;
  StageResult stage2;
};

// Stage 1 trains on the seeded mix of all stage-1 languages; stage 2
// continues from the stage-1 selected checkpoint on the target language.
CurriculumResult run_curriculum(const std::map<LanguageTag, Corpus>& train_corpora,
                                const DictionarySet& dictionaries, const CurriculumPlan& plan,
                                const EncoderConfig& encoder_config,
                                const std::map<LanguageTag, Corpus>* dev_corpora = nullptr);

std::string training_log_lines(const std::vector<EpochRecord>& log);

}  // namespace acrodis
