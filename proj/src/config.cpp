#include "acrodis/config.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "acrodis/text.hpp"
#include "json.hpp"

namespace acrodis {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

std::string hex64(uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[v & 0xF];
    v >>= 4;
  }
  return out;
}

EncoderConfig parse_encoder(const ordered_json& j, uint64_t default_seed) {
  EncoderConfig c;
  c.seed = default_seed;
  if (j.contains("vocab_hash_size")) c.vocab_hash_size = j["vocab_hash_size"].get<size_t>();
  if (j.contains("embedding_dim")) c.embedding_dim = j["embedding_dim"].get<size_t>();
  if (j.contains("num_layers")) c.num_layers = j["num_layers"].get<size_t>();
  if (j.contains("num_heads")) c.num_heads = j["num_heads"].get<size_t>();
  if (j.contains("dropout_rate")) c.dropout_rate = j["dropout_rate"].get<double>();
  if (j.contains("max_positions")) c.max_positions = j["max_positions"].get<size_t>();
  if (j.contains("seed")) c.seed = j["seed"].get<uint64_t>();
  c.validate();
  return c;
}

LossConfig parse_loss(const ordered_json& j) {
  LossConfig c;
  if (j.contains("kind")) c.kind = loss_kind_from_name(j["kind"].get<std::string>());
  if (j.contains("alpha")) c.alpha = j["alpha"].get<double>();
  if (j.contains("beta")) c.beta = j["beta"].get<double>();
  if (j.contains("delta")) c.delta = j["delta"].get<double>();
  if (j.contains("rdrop_enabled")) c.rdrop_enabled = j["rdrop_enabled"].get<bool>();
  if (j.contains("rdrop_weight")) c.rdrop_weight = j["rdrop_weight"].get<double>();
  c.validate();
  return c;
}

TrainConfig parse_train(const ordered_json& j, uint64_t default_seed) {
  TrainConfig c;
  c.seed = default_seed;
  if (j.contains("epochs")) c.epochs = j["epochs"].get<size_t>();
  if (j.contains("learning_rate")) c.learning_rate = j["learning_rate"].get<double>();
  if (j.contains("warmup_fraction")) c.warmup_fraction = j["warmup_fraction"].get<double>();
  if (j.contains("weight_decay")) c.weight_decay = j["weight_decay"].get<double>();
  if (j.contains("batch_size_instances")) {
    c.batch_size_instances = j["batch_size_instances"].get<size_t>();
  }
  if (j.contains("option_width")) c.option_width = j["option_width"].get<size_t>();
  if (j.contains("max_tokens")) c.max_tokens = j["max_tokens"].get<size_t>();
  if (j.contains("child_tuning")) {
    const auto& ct = j["child_tuning"];
    const std::string mode = ct.contains("mode") ? ct["mode"].get<std::string>() : "off";
    if (mode == "off") {
      c.child_tuning.enabled = false;
    } else if (mode == "task_free") {
      c.child_tuning.enabled = true;
      if (ct.contains("p_f")) c.child_tuning.p_f = ct["p_f"].get<double>();
    } else {
      throw ValidationError("config: child_tuning.mode must be 'off' or 'task_free'");
    }
  }
  if (j.contains("loss")) c.loss = parse_loss(j["loss"]);
  if (j.contains("seed")) c.seed = j["seed"].get<uint64_t>();
  c.validate();
  return c;
}

std::string resolve(const std::string& base_dir, const std::string& path) {
  if (path.empty()) return path;
  fs::path p(path);
  if (p.is_absolute() || base_dir.empty()) return path;
  return (fs::path(base_dir) / p).lexically_normal().string();
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text, const std::string& base_dir,
                           std::optional<uint64_t> seed_override,
                           std::optional<std::string> out_override) {
  ordered_json j = ordered_json::parse(json_text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw ValidationError("config: not a JSON object");
  }

  RunConfig cfg;
  if (j.contains("seed")) cfg.seed = j["seed"].get<uint64_t>();
  if (seed_override) cfg.seed = *seed_override;
  if (j.contains("output_dir")) cfg.output_dir = j["output_dir"].get<std::string>();
  if (out_override) cfg.output_dir = *out_override;
  if (cfg.output_dir.empty()) throw ValidationError("config: output_dir is required");
  cfg.output_dir = resolve(base_dir, cfg.output_dir);
  if (j.contains("backend")) cfg.backend = j["backend"].get<std::string>();
  if (cfg.backend != "reference") {
    throw ValidationError("config: unknown backend '" + cfg.backend +
                          "' (only 'reference' ships with this build)");
  }

  cfg.encoder = parse_encoder(j.contains("encoder") ? j["encoder"] : ordered_json::object(),
                              cfg.seed);

  if (!j.contains("languages") || !j["languages"].is_object() || j["languages"].empty()) {
    throw ValidationError("config: 'languages' must be a non-empty object");
  }
  for (auto it = j["languages"].begin(); it != j["languages"].end(); ++it) {
    const auto& v = it.value();
    LanguagePaths p;
    if (!v.contains("train") || !v.contains("dictionary")) {
      throw ValidationError("config: language '" + it.key() +
                            "' needs 'train' and 'dictionary' paths");
    }
    p.train = resolve(base_dir, v["train"].get<std::string>());
    p.dictionary = resolve(base_dir, v["dictionary"].get<std::string>());
    if (v.contains("dev") && !v["dev"].is_null()) {
      p.dev = resolve(base_dir, v["dev"].get<std::string>());
    }
    cfg.languages[it.key()] = std::move(p);
  }

  if (!j.contains("curriculum") || !j["curriculum"].is_object()) {
    throw ValidationError("config: 'curriculum' section is required");
  }
  const auto& cur = j["curriculum"];
  if (!cur.contains("stage2_language")) {
    throw ValidationError("config: curriculum.stage2_language is required");
  }
  cfg.plan.stage2_language = cur["stage2_language"].get<std::string>();
  cfg.plan.stage2_config =
      parse_train(cur.contains("stage2") ? cur["stage2"] : ordered_json::object(), cfg.seed);

  if (cur.contains("stage1_languages")) {
    cfg.has_stage1 = true;
    for (const auto& lang : cur["stage1_languages"]) {
      cfg.plan.stage1_languages.push_back(lang.get<std::string>());
    }
    if (cfg.plan.stage1_languages.empty()) {
      throw ValidationError("config: curriculum.stage1_languages must be non-empty when present");
    }
    cfg.plan.stage1_config =
        parse_train(cur.contains("stage1") ? cur["stage1"] : ordered_json::object(), cfg.seed);
  } else {
    // degenerate plan: single monolingual stage
    cfg.plan.stage1_languages = {cfg.plan.stage2_language};
    cfg.plan.stage1_config = cfg.plan.stage2_config;
  }
  cfg.plan.validate();

  for (const auto& lang : cfg.plan.stage1_languages) {
    if (!cfg.languages.count(lang)) {
      throw ValidationError("config: stage-1 language '" + lang + "' has no paths entry");
    }
  }
  if (!cfg.languages.count(cfg.plan.stage2_language)) {
    throw ValidationError("config: stage-2 language '" + cfg.plan.stage2_language +
                          "' has no paths entry");
  }

  cfg.config_hash = hex64(text::fnv1a(j.dump()));
  return cfg;
}

RunConfig load_run_config(const std::string& path, std::optional<uint64_t> seed_override,
                          std::optional<std::string> out_override) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("config: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string base_dir = fs::path(path).parent_path().string();
  try {
    return parse_run_config(ss.str(), base_dir, seed_override, out_override);
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

void RunConfig::validate_paths() const {
  for (const auto& [lang, p] : languages) {
    if (!fs::exists(p.train)) {
      throw ValidationError("config: train corpus for '" + lang + "' not found: " + p.train);
    }
    if (!fs::exists(p.dictionary)) {
      throw ValidationError("config: dictionary for '" + lang + "' not found: " + p.dictionary);
    }
    if (!p.dev.empty() && !fs::exists(p.dev)) {
      throw ValidationError("config: dev corpus for '" + lang + "' not found: " + p.dev);
    }
  }
}

}  // namespace acrodis
