#include <cmath>

#include "acrodis/evaluate.hpp"
#include "acrodis/rng.hpp"
#include "acrodis/synthetic.hpp"
#include "acrodis/trainer.hpp"
#include "doctest.h"

using namespace acrodis;

namespace {

EncoderConfig tiny_encoder(uint64_t seed = 1) {
  EncoderConfig c;
  c.vocab_hash_size = 512;
  c.embedding_dim = 16;
  c.num_layers = 1;
  c.num_heads = 4;
  c.dropout_rate = 0.1;
  c.max_positions = 32;
  c.seed = seed;
  return c;
}

TrainConfig tiny_train(uint64_t seed = 1) {
  TrainConfig c;
  c.epochs = 2;
  c.learning_rate = 3e-3;
  c.warmup_fraction = 0.1;
  c.weight_decay = 1e-5;
  c.option_width = 4;
  c.max_tokens = 24;
  c.seed = seed;
  return c;
}

SyntheticSpec tiny_spec(uint64_t seed = 2) {
  SyntheticSpec s;
  s.n_languages = 1;
  s.train_per_language = 30;
  s.dev_per_language = 12;
  s.test_per_language = 12;
  s.acronyms_per_language = 3;
  s.candidates_per_acronym = 3;
  s.noise_vocab_size = 15;
  s.context_length = 8;
  s.cue_strength = 0.0;
  s.seed = seed;
  return s;
}

bool params_equal(const ParameterSet& a, const ParameterSet& b) {
  if (a.tensors().size() != b.tensors().size()) return false;
  for (size_t i = 0; i < a.tensors().size(); ++i) {
    if (a.tensors()[i].data != b.tensors()[i].data) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("learning-rate schedule closed forms") {
  TrainConfig cfg = tiny_train();
  cfg.learning_rate = 1e-5;
  cfg.warmup_fraction = 0.1;
  const size_t total = 1000;

  CHECK(lr_at(0, total, cfg) == 0.0);
  CHECK(lr_at(100, total, cfg) == doctest::Approx(1e-5).epsilon(1e-12));  // warmup peak
  // closed form at the midpoint of training: lr * (1 - 0.5) / (1 - 0.1)
  CHECK(lr_at(500, total, cfg) == doctest::Approx(1e-5 * 0.5 / 0.9).epsilon(1e-12));
  CHECK(lr_at(500, total, cfg) == doctest::Approx(5.5555e-6).epsilon(1e-4));
  CHECK(lr_at(total, total, cfg) == 0.0);
}

TEST_CASE("learning-rate schedule is continuous with a single peak") {
  TrainConfig cfg = tiny_train();
  cfg.learning_rate = 1.0;
  cfg.warmup_fraction = 0.25;
  const size_t total = 400;
  const double max_jump = 1.0 / (0.25 * total) + 1e-9;
  size_t peaks = 0;
  for (size_t s = 0; s + 1 <= total; ++s) {
    const double here = lr_at(s, total, cfg);
    const double next = lr_at(s + 1, total, cfg);
    CHECK(std::abs(next - here) <= max_jump);
    if (s > 0 && here > lr_at(s - 1, total, cfg) && here >= next) ++peaks;
  }
  CHECK(peaks == 1);
}

TEST_CASE("child tuning with full keep probability is the identity") {
  const ReferenceEncoder enc(tiny_encoder());
  GradientSet grads = enc.parameters().zeros_like();
  Rng rng(3);
  for (auto& t : grads.tensors()) {
    for (auto& x : t.data) x = rng.normal();
  }
  GradientSet masked = grads;
  child_tuning_step(masked, 1.0, 777);
  CHECK(params_equal(masked, grads));
}

TEST_CASE("child tuning masks are unbiased and sparse at the configured rate") {
  // Monte-Carlo expectation oracle over repeated masked steps
  GradientSet grads;
  auto& t = grads.add("w", {200});
  const double g = 0.8;
  std::fill(t.data.begin(), t.data.end(), g);

  const double p_f = 0.3;
  double sum = 0.0;
  size_t zeros = 0;
  const size_t steps = 10000;
  for (size_t step = 0; step < steps; ++step) {
    GradientSet masked = grads;
    child_tuning_step(masked, p_f, step);
    for (double x : masked.at("w").data) {
      sum += x;
      if (x == 0.0) ++zeros;
    }
  }
  const double mean = sum / (steps * 200.0);
  CHECK(std::abs(mean - g) / g < 0.02);
  const double zero_fraction = double(zeros) / (steps * 200.0);
  CHECK(std::abs(zero_fraction - (1.0 - p_f)) < 0.01);

  CHECK_THROWS(child_tuning_step(grads, 0.0, 1));
  CHECK_THROWS(child_tuning_step(grads, 1.5, 1));
}

TEST_CASE("clip_global_norm scales gradients to the ceiling") {
  GradientSet grads;
  grads.add("a", {3}).data = {3.0, 4.0, 0.0};
  const double norm = clip_global_norm(grads, 1.0);
  CHECK(norm == doctest::Approx(5.0));
  CHECK(grads.at("a").data[0] == doctest::Approx(0.6));
  CHECK(grads.at("a").data[1] == doctest::Approx(0.8));

  GradientSet small;
  small.add("a", {2}).data = {0.3, 0.4};
  clip_global_norm(small, 1.0);
  CHECK(small.at("a").data[0] == doctest::Approx(0.3));  // untouched below the ceiling
}

TEST_CASE("train config validation") {
  TrainConfig c = tiny_train();
  c.epochs = 0;
  CHECK_THROWS(c.validate());
  c = tiny_train();
  c.learning_rate = 0.0;
  CHECK_THROWS(c.validate());
  c = tiny_train();
  c.child_tuning.enabled = true;
  c.child_tuning.p_f = 0.0;
  CHECK_THROWS(c.validate());
  c = tiny_train();
  c.warmup_fraction = 1.0;
  CHECK_THROWS(c.validate());
}

TEST_CASE("training rejects unlabeled samples and empty corpora") {
  const SyntheticData data = generate_synthetic(tiny_spec());
  const DictionarySet dicts = data.dictionaries();

  ReferenceEncoder model(tiny_encoder());
  Corpus empty;
  empty.language = data.languages[0].language;
  CHECK_THROWS(train_stage(empty, dicts, model, tiny_train(), "stage2"));

  Corpus unlabeled = data.languages[0].train;
  unlabeled.samples[3].gold_expansion.reset();
  CHECK_THROWS_WITH_AS(train_stage(unlabeled, dicts, model, tiny_train(), "stage2"),
                       doctest::Contains(unlabeled.samples[3].id.c_str()), std::runtime_error);
}

TEST_CASE("identical seed and data give bit-identical training runs") {
  const SyntheticData data = generate_synthetic(tiny_spec());
  const DictionarySet dicts = data.dictionaries();
  const Corpus& train = data.languages[0].train;

  TrainConfig cfg = tiny_train(9);
  cfg.loss.rdrop_enabled = true;  // exercise the double forward pass
  cfg.child_tuning.enabled = true;
  cfg.child_tuning.p_f = 0.5;

  ReferenceEncoder model_a(tiny_encoder(4));
  const StageResult a = train_stage(train, dicts, model_a, cfg, "stage2", &data.languages[0].dev);
  ReferenceEncoder model_b(tiny_encoder(4));
  const StageResult b = train_stage(train, dicts, model_b, cfg, "stage2", &data.languages[0].dev);

  CHECK(params_equal(a.checkpoint.params, b.checkpoint.params));
  REQUIRE(a.log.size() == b.log.size());
  for (size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].mean_loss == b.log[i].mean_loss);
    CHECK(a.log[i].dev_macro_f1 == b.log[i].dev_macro_f1);
  }
}

TEST_CASE("child tuning at p_f = 1 is step-for-step identical to disabled") {
  const SyntheticData data = generate_synthetic(tiny_spec());
  const DictionarySet dicts = data.dictionaries();
  const Corpus& train = data.languages[0].train;

  TrainConfig with = tiny_train(5);
  with.child_tuning.enabled = true;
  with.child_tuning.p_f = 1.0;
  TrainConfig without = tiny_train(5);
  without.child_tuning.enabled = false;

  ReferenceEncoder model_a(tiny_encoder(6));
  const StageResult a = train_stage(train, dicts, model_a, with, "stage2");
  ReferenceEncoder model_b(tiny_encoder(6));
  const StageResult b = train_stage(train, dicts, model_b, without, "stage2");
  CHECK(params_equal(a.checkpoint.params, b.checkpoint.params));
}

TEST_CASE("training reduces the loss on separable data in most seeds") {
  // training-progress oracle: synthetic data with no cue noise is separable
  SyntheticSpec spec = tiny_spec(77);
  spec.train_per_language = 50;
  const SyntheticData data = generate_synthetic(spec);
  const DictionarySet dicts = data.dictionaries();

  int improved = 0;
  for (uint64_t seed = 0; seed < 5; ++seed) {
    TrainConfig cfg = tiny_train(seed);
    cfg.epochs = 2;
    ReferenceEncoder model(tiny_encoder(seed + 100));
    const StageResult r = train_stage(data.languages[0].train, dicts, model, cfg, "stage2");
    if (r.log.back().mean_loss < r.log.front().mean_loss) ++improved;
  }
  CHECK(improved >= 4);
}

TEST_CASE("curriculum lineage: stage 2 resumes exactly from the stage-1 checkpoint") {
  SyntheticSpec spec = tiny_spec(13);
  spec.n_languages = 2;
  const SyntheticData data = generate_synthetic(spec);
  const DictionarySet dicts = data.dictionaries();

  CurriculumPlan plan;
  plan.stage1_languages = {data.languages[0].language, data.languages[1].language};
  plan.stage2_language = data.languages[0].language;
  plan.stage1_config = tiny_train(21);
  plan.stage1_config.epochs = 1;
  plan.stage2_config = tiny_train(22);
  plan.stage2_config.epochs = 1;

  const CurriculumResult cur =
      run_curriculum(data.train_corpora(), dicts, plan, tiny_encoder(30), nullptr);
  CHECK(cur.stage1.checkpoint.stage == "stage1");
  CHECK(cur.stage2.checkpoint.stage == "stage2");

  // replay stage 2 from the persisted stage-1 checkpoint; bit-identical result
  auto resumed = encoder_from_checkpoint(cur.stage1.checkpoint);
  CHECK(params_equal(resumed->parameters(), cur.stage1.checkpoint.params));
  const StageResult replay = train_stage(data.train_corpora().at(plan.stage2_language), dicts,
                                         *resumed, plan.stage2_config, "stage2");
  CHECK(params_equal(replay.checkpoint.params, cur.stage2.checkpoint.params));
}

TEST_CASE("curriculum with a single language degenerates to two sequential stages") {
  const SyntheticData data = generate_synthetic(tiny_spec(14));
  const DictionarySet dicts = data.dictionaries();
  const LanguageTag lang = data.languages[0].language;

  CurriculumPlan plan;
  plan.stage1_languages = {lang};
  plan.stage2_language = lang;
  plan.stage1_config = tiny_train(31);
  plan.stage1_config.epochs = 1;
  plan.stage2_config = tiny_train(32);
  plan.stage2_config.epochs = 1;

  const CurriculumResult cur =
      run_curriculum(data.train_corpora(), dicts, plan, tiny_encoder(40), nullptr);
  CHECK(cur.stage2.log.size() == 1);

  CurriculumPlan missing = plan;
  missing.stage2_language = "nope";
  CHECK_THROWS(run_curriculum(data.train_corpora(), dicts, missing, tiny_encoder(40), nullptr));
}

TEST_CASE("dev-based selection picks the best epoch") {
  const SyntheticData data = generate_synthetic(tiny_spec(15));
  const DictionarySet dicts = data.dictionaries();

  TrainConfig cfg = tiny_train(8);
  cfg.epochs = 3;
  ReferenceEncoder model(tiny_encoder(50));
  const StageResult r =
      train_stage(data.languages[0].train, dicts, model, cfg, "stage2", &data.languages[0].dev);
  REQUIRE(r.log.size() == 3);
  double best = -1.0;
  size_t best_epoch = 0;
  for (const auto& rec : r.log) {
    REQUIRE(rec.dev_macro_f1.has_value());
    if (*rec.dev_macro_f1 > best) {
      best = *rec.dev_macro_f1;
      best_epoch = rec.epoch;
    }
  }
  CHECK(r.selected_epoch == best_epoch);
}

TEST_CASE("training log lines are one JSON record per epoch") {
  std::vector<EpochRecord> log(2);
  log[0].epoch = 0;
  log[0].mean_loss = 1.5;
  log[0].lr_final = 1e-3;
  log[1].epoch = 1;
  log[1].mean_loss = 1.2;
  log[1].dev_macro_f1 = 0.5;
  log[1].lr_final = 5e-4;
  const std::string lines = training_log_lines(log);
  CHECK(lines ==
        "{\"epoch\":0,\"mean_loss\":1.5,\"dev_macro_f1\":null,\"lr_final\":0.001}\n"
        "{\"epoch\":1,\"mean_loss\":1.2,\"dev_macro_f1\":0.5,\"lr_final\":0.0005}\n");
}
