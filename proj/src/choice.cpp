#include "acrodis/choice.hpp"

#include <algorithm>
#include <numeric>

#include "acrodis/rng.hpp"
#include "acrodis/text.hpp"

namespace acrodis {

size_t ChoiceInstance::real_option_count() const {
  size_t n = 0;
  for (const auto& o : options) {
    if (!o.is_padding) ++n;
  }
  return n;
}

TruncatedContext truncate_context(const std::vector<std::string>& tokens, size_t acronym_index,
                                  size_t max_tokens) {
  if (max_tokens < 1) throw ValidationError("truncate_context: max_tokens must be >= 1");
  if (acronym_index >= tokens.size()) {
    throw ValidationError("truncate_context: acronym index out of range");
  }

  TruncatedContext out;
  if (tokens.size() <= max_tokens) {
    out.tokens = tokens;
    out.acronym_index = acronym_index;
    return out;
  }

  size_t start = 0;
  if (acronym_index >= max_tokens) {
    // the leading window would drop the acronym; re-center on it
    start = std::min(acronym_index - max_tokens / 2, tokens.size() - max_tokens);
  }
  out.tokens.assign(tokens.begin() + start, tokens.begin() + start + max_tokens);
  out.acronym_index = acronym_index - start;
  return out;
}

std::vector<ChoiceInstance> build_instances(const Sample& sample, const Dictionary& dictionary,
                                            const ChoiceBuilderConfig& config) {
  const size_t K = config.option_width;
  if (K < 2) throw ValidationError("build_instances: option width must be >= 2");

  const auto* expansions = dictionary.find(sample.acronym());
  if (!expansions) {
    throw ValidationError("build_instances: acronym '" + sample.acronym() +
                          "' not found in dictionary (sample " + sample.id + ")");
  }

  std::vector<size_t> candidate_order(expansions->size());
  std::iota(candidate_order.begin(), candidate_order.end(), 0);
  if (config.shuffle_candidates) {
    Rng rng(mix_keys(config.shuffle_seed, text::fnv1a(sample.id)));
    fisher_yates(candidate_order, rng);
  }

  const TruncatedContext ctx =
      truncate_context(sample.tokens, sample.acronym_index, config.max_context_tokens);
  std::vector<std::string> context;
  context.reserve(ctx.tokens.size() + 2);
  context.insert(context.end(), ctx.tokens.begin(), ctx.tokens.begin() + ctx.acronym_index);
  context.push_back(kAcronymOpen);
  context.push_back(ctx.tokens[ctx.acronym_index]);
  context.push_back(kAcronymClose);
  context.insert(context.end(), ctx.tokens.begin() + ctx.acronym_index + 1, ctx.tokens.end());

  std::optional<size_t> gold_pos;
  if (sample.gold_expansion) {
    for (size_t i = 0; i < candidate_order.size(); ++i) {
      if ((*expansions)[candidate_order[i]] == *sample.gold_expansion) {
        gold_pos = i;
        break;
      }
    }
    if (!gold_pos) {
      throw ValidationError("build_instances: gold expansion '" + *sample.gold_expansion +
                            "' is not a candidate of '" + sample.acronym() + "' (sample " +
                            sample.id + ")");
    }
  }

  const size_t n = candidate_order.size();
  const size_t chunk_count = (n + K - 1) / K;
  std::vector<ChoiceInstance> instances;
  instances.reserve(chunk_count);
  for (size_t c = 0; c < chunk_count; ++c) {
    ChoiceInstance inst;
    inst.sample_id = sample.id;
    inst.chunk_index = c;
    inst.chunk_count = chunk_count;
    inst.first_candidate = c * K;
    const size_t end = std::min(n, (c + 1) * K);
    for (size_t i = c * K; i < end; ++i) {
      OptionEncoding opt;
      opt.context_tokens = context;
      opt.candidate_text = (*expansions)[candidate_order[i]];
      opt.is_padding = false;
      inst.options.push_back(std::move(opt));
    }
    while (inst.options.size() < K) {
      OptionEncoding pad;
      pad.is_padding = true;
      inst.options.push_back(std::move(pad));
    }
    if (gold_pos && *gold_pos >= c * K && *gold_pos < end) {
      inst.gold_index = *gold_pos - c * K;
    }
    instances.push_back(std::move(inst));
  }
  return instances;
}

std::vector<ChoiceInstance> build_instances(const Sample& sample, const Dictionary& dictionary,
                                            size_t option_width, size_t max_tokens) {
  ChoiceBuilderConfig config;
  config.option_width = option_width;
  config.max_context_tokens = max_tokens;
  return build_instances(sample, dictionary, config);
}

}  // namespace acrodis
