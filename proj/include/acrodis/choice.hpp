#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "acrodis/data.hpp"

namespace acrodis {

// Sentinel tokens wrapped around the acronym occurrence so the scorer can
// locate it; candidate expansions may share prefixes with the context.
inline constexpr const char* kAcronymOpen = "<acro>";
inline constexpr const char* kAcronymClose = "</acro>";

struct OptionEncoding {
  std::vector<std::string> context_tokens;
  std::string candidate_text;
  bool is_padding = false;
};

// One fixed-width multiple-choice instance. Dictionary entries wider than K
// are split into ceil(n/K) chunks; gold_index is set only in the chunk that
// holds the gold candidate.
struct ChoiceInstance {
  std::string sample_id;
  std::vector<OptionEncoding> options;  // length exactly K
  std::optional<size_t> gold_index;
  size_t chunk_index = 0;
  size_t chunk_count = 1;
  // dictionary index of options[0]; option i corresponds to candidate
  // first_candidate + i while i is a real option
  size_t first_candidate = 0;

  size_t real_option_count() const;
};

struct ChoiceBuilderConfig {
  size_t option_width = 14;
  size_t max_context_tokens = 300;
  // seeded candidate-order shuffle for ablations; dictionary order otherwise
  bool shuffle_candidates = false;
  uint64_t shuffle_seed = 0;
};

struct TruncatedContext {
  std::vector<std::string> tokens;
  size_t acronym_index = 0;
};

// Keeps the first max_tokens tokens; when the acronym would fall outside
// that prefix the window is re-centered on it so the occurrence survives.
TruncatedContext truncate_context(const std::vector<std::string>& tokens, size_t acronym_index,
                                  size_t max_tokens);

std::vector<ChoiceInstance> build_instances(const Sample& sample, const Dictionary& dictionary,
                                            const ChoiceBuilderConfig& config);

std::vector<ChoiceInstance> build_instances(const Sample& sample, const Dictionary& dictionary,
                                            size_t option_width, size_t max_tokens);

}  // namespace acrodis
