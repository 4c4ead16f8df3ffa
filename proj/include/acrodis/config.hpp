#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "acrodis/encoder.hpp"
#include "acrodis/trainer.hpp"

namespace acrodis {

struct LanguagePaths {
  std::string train;
  std::string dev;  // optional, empty when absent
  std::string dictionary;
};

// Declarative run configuration for the CLI. One JSON file drives training:
// corpora and dictionaries per language, encoder geometry, and the
// curriculum (stage 1 optional; without it `train` runs a single monolingual
// stage on the stage-2 language).
struct RunConfig {
  uint64_t seed = 0;
  std::string output_dir;
  std::string backend = "reference";
  EncoderConfig encoder;
  std::map<LanguageTag, LanguagePaths> languages;
  bool has_stage1 = false;
  CurriculumPlan plan;

  // fnv-1a of the canonical re-serialized config, hex — recorded in the
  // run manifest for exact replay
  std::string config_hash;

  void validate_paths() const;
};

// Parses the file; relative data paths are resolved against the config
// file's directory. Optional overrides replace the seed / output_dir.
RunConfig load_run_config(const std::string& path, std::optional<uint64_t> seed_override = {},
                          std::optional<std::string> out_override = {});

RunConfig parse_run_config(const std::string& json_text, const std::string& base_dir,
                           std::optional<uint64_t> seed_override = {},
                           std::optional<std::string> out_override = {});

}  // namespace acrodis
