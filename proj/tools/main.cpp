// acrodis — training and evaluation toolkit for dictionary-based acronym
// disambiguation. Subcommands: train, predict, score, fuse, make-synthetic.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "acrodis/checkpoint.hpp"
#include "acrodis/choice.hpp"
#include "acrodis/config.hpp"
#include "acrodis/data.hpp"
#include "acrodis/evaluate.hpp"
#include "acrodis/synthetic.hpp"
#include "acrodis/trainer.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using acrodis::ValidationError;
using ordered_json = nlohmann::ordered_json;

namespace {

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

// Guards an output directory against concurrent writers.
class DirLock {
 public:
  explicit DirLock(const fs::path& dir) : lock_(dir / ".lock") {
    if (fs::exists(lock_)) {
      throw std::runtime_error("output directory is locked (another run in progress?): " +
                               lock_.string());
    }
    std::ofstream out(lock_);
    out << "locked\n";
  }
  ~DirLock() {
    std::error_code ec;
    fs::remove(lock_, ec);
  }

 private:
  fs::path lock_;
};

int cmd_train(const std::string& config_path, std::optional<uint64_t> seed_override,
              std::optional<std::string> out_override) {
  const acrodis::RunConfig cfg =
      acrodis::load_run_config(config_path, seed_override, out_override);
  cfg.validate_paths();

  fs::create_directories(cfg.output_dir);
  DirLock lock(cfg.output_dir);

  // load dictionaries and corpora for every language the plan touches
  acrodis::DictionarySet dictionaries;
  std::map<acrodis::LanguageTag, acrodis::Corpus> train_corpora;
  std::map<acrodis::LanguageTag, acrodis::Corpus> dev_corpora;
  for (const auto& [lang, paths] : cfg.languages) {
    const acrodis::Dictionary dict = acrodis::load_dictionary(paths.dictionary);
    train_corpora[lang] = acrodis::load_corpus(paths.train, lang, dict);
    if (!paths.dev.empty()) {
      dev_corpora[lang] = acrodis::load_corpus(paths.dev, lang, dict);
    }
    dictionaries.add(lang, dict);
  }

  const fs::path out_dir(cfg.output_dir);
  ordered_json manifest;
  manifest["config_hash"] = cfg.config_hash;
  manifest["seed"] = cfg.seed;

  if (cfg.has_stage1) {
    std::cerr << "training stage 1 on {";
    for (size_t i = 0; i < cfg.plan.stage1_languages.size(); ++i) {
      std::cerr << (i ? ", " : "") << cfg.plan.stage1_languages[i];
    }
    std::cerr << "} then stage 2 on " << cfg.plan.stage2_language << "\n";
    const acrodis::CurriculumResult result = acrodis::run_curriculum(
        train_corpora, dictionaries, cfg.plan, cfg.encoder, &dev_corpora);
    acrodis::save_checkpoint(result.stage1.checkpoint, (out_dir / "stage1.ckpt").string());
    acrodis::save_checkpoint(result.stage2.checkpoint, (out_dir / "stage2.ckpt").string());
    write_text(out_dir / "stage1_log.jsonl", acrodis::training_log_lines(result.stage1.log));
    write_text(out_dir / "stage2_log.jsonl", acrodis::training_log_lines(result.stage2.log));
    for (const auto& [tag, stage] :
         {std::pair<std::string, const acrodis::StageResult&>{"stage1", result.stage1},
          {"stage2", result.stage2}}) {
      ordered_json s;
      s["selected_epoch"] = stage.selected_epoch;
      s["final_mean_loss"] = stage.log.back().mean_loss;
      if (stage.log.back().dev_macro_f1) s["dev_macro_f1"] = *stage.log.back().dev_macro_f1;
      manifest[tag] = std::move(s);
    }
  } else {
    std::cerr << "training single stage on " << cfg.plan.stage2_language << "\n";
    const auto& lang = cfg.plan.stage2_language;
    acrodis::ReferenceEncoder model(cfg.encoder);
    const acrodis::Corpus* dev =
        dev_corpora.count(lang) ? &dev_corpora.at(lang) : nullptr;
    const acrodis::StageResult result = acrodis::train_stage(
        train_corpora.at(lang), dictionaries, model, cfg.plan.stage2_config, "stage2", dev);
    acrodis::save_checkpoint(result.checkpoint, (out_dir / "stage2.ckpt").string());
    write_text(out_dir / "stage2_log.jsonl", acrodis::training_log_lines(result.log));
    ordered_json s;
    s["selected_epoch"] = result.selected_epoch;
    s["final_mean_loss"] = result.log.back().mean_loss;
    if (result.log.back().dev_macro_f1) s["dev_macro_f1"] = *result.log.back().dev_macro_f1;
    manifest["stage2"] = std::move(s);
  }

  write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
  std::cerr << "wrote checkpoints and manifest to " << cfg.output_dir << "\n";
  return 0;
}

int cmd_predict(const std::string& checkpoint_path, const std::string& corpus_path,
                const std::string& dictionary_path, const std::string& language,
                const std::string& out_path, const std::string& distributions_path,
                size_t option_width, size_t max_tokens, bool skip_missing) {
  const acrodis::Checkpoint ck = acrodis::load_checkpoint(checkpoint_path);
  const auto model = acrodis::encoder_from_checkpoint(ck);
  const acrodis::Dictionary dict = acrodis::load_dictionary(dictionary_path);
  const acrodis::Corpus corpus = acrodis::load_corpus(corpus_path, language, dict);

  ordered_json out = ordered_json::array();
  ordered_json dists = ordered_json::array();
  size_t failures = 0;
  for (const auto& sample : corpus.samples) {
    if (!dict.contains(sample.acronym())) {
      ++failures;
      std::cerr << "sample " << sample.id << ": acronym '" << sample.acronym()
                << "' missing from dictionary" << (skip_missing ? " (skipped)" : "") << "\n";
      if (!skip_missing) {
        ordered_json rec;
        rec["id"] = sample.id;
        rec["error"] = "acronym '" + sample.acronym() + "' missing from dictionary";
        out.push_back(std::move(rec));
      }
      continue;
    }
    const acrodis::Prediction p =
        acrodis::predict(*model, sample, dict, option_width, max_tokens);
    ordered_json rec;
    rec["id"] = p.sample_id;
    rec["prediction"] = p.predicted_expansion;
    rec["score"] = p.score;
    out.push_back(std::move(rec));

    if (!distributions_path.empty()) {
      const acrodis::CandidateDistribution cd =
          acrodis::predict_distribution(*model, sample, dict, option_width, max_tokens);
      ordered_json drec;
      drec["id"] = cd.sample_id;
      drec["candidates"] = cd.candidates;
      drec["probs"] = cd.probs;
      dists.push_back(std::move(drec));
    }
  }
  write_text(out_path, out.dump(2) + "\n");
  if (!distributions_path.empty()) write_text(distributions_path, dists.dump(2) + "\n");
  std::cerr << "wrote " << out.size() << " records to " << out_path << "\n";
  return failures > 0 && !skip_missing ? 1 : 0;
}

int cmd_score(const std::string& predictions_path, const std::string& gold_path,
              const std::string& metrics_path) {
  const auto predictions = acrodis::load_predictions(predictions_path);
  const acrodis::Corpus gold = acrodis::load_gold_corpus(gold_path, "gold");
  const acrodis::MetricsReport report = acrodis::score(predictions, gold);
  std::cout << acrodis::metrics_tsv_line(report) << "\n";
  if (!metrics_path.empty()) write_text(metrics_path, acrodis::metrics_to_json(report));
  return 0;
}

struct DistributionDump {
  std::vector<std::string> ids;  // in file order of the first input
  std::map<std::string, std::pair<std::vector<std::string>, std::vector<double>>> by_id;
};

DistributionDump load_distribution_dump(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open distribution file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  ordered_json j = ordered_json::parse(ss.str(), nullptr, false);
  if (j.is_discarded() || !j.is_array()) {
    throw ValidationError(path + ": distribution dump must be a JSON array");
  }
  DistributionDump dump;
  for (const auto& rec : j) {
    if (!rec.contains("id") || !rec.contains("candidates") || !rec.contains("probs")) {
      throw ValidationError(path + ": records need id/candidates/probs");
    }
    const std::string id = rec["id"].get<std::string>();
    auto cands = rec["candidates"].get<std::vector<std::string>>();
    auto probs = rec["probs"].get<std::vector<double>>();
    if (cands.size() != probs.size() || cands.empty()) {
      throw ValidationError(path + ": sample " + id + " has malformed candidates/probs");
    }
    if (!dump.by_id.emplace(id, std::make_pair(std::move(cands), std::move(probs))).second) {
      throw ValidationError(path + ": duplicate sample id " + id);
    }
    dump.ids.push_back(id);
  }
  return dump;
}

int cmd_fuse(const std::vector<std::string>& inputs, const std::vector<double>& weights,
             const std::string& out_path) {
  if (inputs.empty()) throw ValidationError("fuse: at least one input file required");
  if (!weights.empty() && weights.size() != inputs.size()) {
    throw ValidationError("fuse: weight count must match input count");
  }
  std::vector<DistributionDump> dumps;
  for (const auto& path : inputs) dumps.push_back(load_distribution_dump(path));
  for (size_t m = 1; m < dumps.size(); ++m) {
    if (dumps[m].ids != dumps[0].ids) {
      throw ValidationError("fuse: sample ids of " + inputs[m] + " do not match " + inputs[0]);
    }
  }

  ordered_json out = ordered_json::array();
  for (const auto& id : dumps[0].ids) {
    const auto& [candidates, first_probs] = dumps[0].by_id.at(id);
    std::vector<acrodis::OptionDistribution> dists;
    for (size_t m = 0; m < dumps.size(); ++m) {
      const auto& [cands_m, probs_m] = dumps[m].by_id.at(id);
      if (cands_m != candidates) {
        throw ValidationError("fuse: candidate sets disagree for sample " + id + " in " +
                              inputs[m]);
      }
      acrodis::OptionDistribution d;
      d.probs = probs_m;
      d.padding_mask.assign(probs_m.size(), 0);
      dists.push_back(std::move(d));
    }
    const acrodis::OptionDistribution fused = acrodis::fuse(dists, weights);
    size_t best = 0;
    for (size_t k = 1; k < fused.probs.size(); ++k) {
      if (fused.probs[k] > fused.probs[best]) best = k;
    }
    ordered_json rec;
    rec["id"] = id;
    rec["prediction"] = candidates[best];
    rec["score"] = fused.probs[best];
    out.push_back(std::move(rec));
    static_cast<void>(first_probs);
  }
  write_text(out_path, out.dump(2) + "\n");
  std::cerr << "fused " << inputs.size() << " model(s) over " << dumps[0].ids.size()
            << " samples\n";
  return 0;
}

int cmd_make_synthetic(const acrodis::SyntheticSpec& spec, const std::string& out_dir) {
  const acrodis::SyntheticData data = acrodis::generate_synthetic(spec);
  acrodis::write_synthetic(data, out_dir);
  std::cerr << "wrote " << data.languages.size() << " language(s) under " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acronym disambiguation toolkit"};
  app.require_subcommand(1);

  // train
  std::string train_config;
  std::optional<uint64_t> train_seed;
  std::optional<std::string> train_out;
  auto* train = app.add_subcommand("train", "run the training curriculum from a config file");
  train->add_option("--config", train_config, "run config JSON")->required();
  train->add_option("--seed", train_seed, "override the config seed");
  train->add_option("--out", train_out, "override the output directory");

  // predict
  std::string p_ckpt, p_corpus, p_dict, p_lang = "default", p_out, p_dists;
  size_t p_width = 14, p_max_tokens = 300;
  bool p_skip = false;
  auto* predict = app.add_subcommand("predict", "write argmax predictions for a corpus");
  predict->add_option("--checkpoint", p_ckpt)->required();
  predict->add_option("--corpus", p_corpus)->required();
  predict->add_option("--dictionary", p_dict)->required();
  predict->add_option("--language", p_lang, "language tag for the corpus");
  predict->add_option("--out", p_out)->required();
  predict->add_option("--dump-distributions", p_dists,
                      "also write per-candidate probabilities (for fuse)");
  predict->add_option("--option-width", p_width);
  predict->add_option("--max-tokens", p_max_tokens);
  predict->add_flag("--skip-missing", p_skip, "skip samples whose acronym is not in the dictionary");

  // score
  std::string s_preds, s_gold, s_metrics;
  auto* scorecmd = app.add_subcommand("score", "macro precision/recall/F1 of a prediction file");
  scorecmd->add_option("--predictions", s_preds)->required();
  scorecmd->add_option("--gold", s_gold)->required();
  scorecmd->add_option("--out", s_metrics, "metrics report JSON path");

  // fuse
  std::vector<std::string> f_inputs;
  std::vector<double> f_weights;
  std::string f_out;
  auto* fusecmd = app.add_subcommand("fuse", "average per-candidate probabilities across models");
  fusecmd->add_option("--inputs", f_inputs, "distribution dumps from predict")->required();
  fusecmd->add_option("--weights", f_weights, "per-model weights (default equal)");
  fusecmd->add_option("--out", f_out)->required();

  // make-synthetic
  acrodis::SyntheticSpec spec;
  std::string syn_out;
  auto* synth = app.add_subcommand("make-synthetic", "generate the rigged bias benchmark");
  synth->add_option("--out", syn_out)->required();
  synth->add_option("--languages", spec.n_languages);
  synth->add_option("--train-per-language", spec.train_per_language);
  synth->add_option("--dev-per-language", spec.dev_per_language);
  synth->add_option("--test-per-language", spec.test_per_language);
  synth->add_option("--acronyms", spec.acronyms_per_language);
  synth->add_option("--candidates", spec.candidates_per_acronym);
  synth->add_option("--noise-vocab", spec.noise_vocab_size);
  synth->add_option("--context-length", spec.context_length);
  synth->add_option("--cue-strength", spec.cue_strength);
  synth->add_option("--seed", spec.seed);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(train_config, train_seed, train_out);
    if (predict->parsed()) {
      return cmd_predict(p_ckpt, p_corpus, p_dict, p_lang, p_out, p_dists, p_width, p_max_tokens,
                         p_skip);
    }
    if (scorecmd->parsed()) return cmd_score(s_preds, s_gold, s_metrics);
    if (fusecmd->parsed()) return cmd_fuse(f_inputs, f_weights, f_out);
    if (synth->parsed()) return cmd_make_synthetic(spec, syn_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
