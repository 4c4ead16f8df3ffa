#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "acrodis/choice.hpp"
#include "acrodis/params.hpp"

namespace acrodis {

struct LossConfig;  // losses.hpp

// Logit assigned to padding options; exp() underflows to exactly zero.
inline constexpr double kPaddingLogit = -1e30;

struct EncoderConfig {
  size_t vocab_hash_size = 32768;
  size_t embedding_dim = 64;
  size_t num_layers = 2;
  size_t num_heads = 4;
  double dropout_rate = 0.1;
  size_t max_positions = 512;
  uint64_t seed = 0;

  void validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

enum class ScoreMode { kTrain, kEval };

struct OptionLogits {
  std::vector<double> values;
  std::vector<uint8_t> padding_mask;  // 1 = padding
};

struct OptionDistribution {
  std::vector<double> probs;
  std::vector<uint8_t> padding_mask;
};

// Max-subtracted softmax over unmasked entries; padding probabilities are
// exactly zero. Throws when every option is masked.
OptionDistribution softmax_over_options(const OptionLogits& logits);

struct ForwardBackwardResult {
  double loss = 0.0;
  GradientSet gradients;
};

// Contract shared by the reference encoder and adapters for pretrained
// multilingual encoders: tokenization, per-option scoring, and parameter
// iteration for masked optimizer steps.
class EncoderBackend {
 public:
  virtual ~EncoderBackend() = default;

  virtual const EncoderConfig& config() const = 0;
  virtual std::vector<std::string> tokenize(const std::string& text) const = 0;

  // One scalar per option. Eval mode is deterministic; train mode applies
  // dropout streams derived from dropout_seed. Padding options receive
  // kPaddingLogit without a forward pass.
  virtual OptionLogits score_options(const ChoiceInstance& instance, ScoreMode mode,
                                     uint64_t dropout_seed) const = 0;

  // Loss per LossConfig (including the R-Drop double pass when enabled)
  // plus gradients for every parameter. Requires gold_index.
  virtual ForwardBackwardResult forward_backward(const ChoiceInstance& instance,
                                                 const LossConfig& loss, ScoreMode mode,
                                                 uint64_t dropout_seed) const = 0;

  virtual ParameterSet& parameters() = 0;
  virtual const ParameterSet& parameters() const = 0;
};

// Self-contained scoring model: hashed token embeddings, learned positions,
// pre-norm self-attention blocks, mean-pooled context and candidate vectors,
// two-layer tanh head producing one scalar per option.
class ReferenceEncoder : public EncoderBackend {
 public:
  explicit ReferenceEncoder(const EncoderConfig& config);
  ReferenceEncoder(const EncoderConfig& config, ParameterSet params);

  const EncoderConfig& config() const override { return config_; }
  std::vector<std::string> tokenize(const std::string& text) const override;

  OptionLogits score_options(const ChoiceInstance& instance, ScoreMode mode,
                             uint64_t dropout_seed) const override;
  ForwardBackwardResult forward_backward(const ChoiceInstance& instance, const LossConfig& loss,
                                         ScoreMode mode, uint64_t dropout_seed) const override;

  ParameterSet& parameters() override { return params_; }
  const ParameterSet& parameters() const override { return params_; }

 private:
  struct OptionCache;
  double option_forward(const OptionEncoding& option, ScoreMode mode, uint64_t option_seed,
                        OptionCache* cache) const;
  void option_backward(const OptionCache& cache, double dlogit, GradientSet& grads) const;
  std::vector<size_t> token_ids(const OptionEncoding& option, size_t& context_len) const;

  EncoderConfig config_;
  ParameterSet params_;
};

std::unique_ptr<ReferenceEncoder> make_reference_encoder(const EncoderConfig& config);

}  // namespace acrodis
