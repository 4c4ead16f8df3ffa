#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "acrodis/encoder.hpp"

namespace acrodis {

enum class LossKind { kCrossEntropy, kInTrust };

std::string loss_kind_name(LossKind kind);
LossKind loss_kind_from_name(const std::string& name);

struct LossConfig {
  LossKind kind = LossKind::kCrossEntropy;
  double alpha = 1.0;  // CE weight (in-trust)
  double beta = 1.0;   // DCE weight (in-trust)
  double delta = 0.5;  // trust mixing, (0, 1]
  bool rdrop_enabled = false;
  double rdrop_weight = 1.0;

  void validate() const;
};

// -log(probs[gold]); the log argument is clamped at 1e-12.
double cross_entropy(const OptionDistribution& dist, size_t gold_index);

// alpha * CE + beta * DCE with DCE = -log(delta + (1 - delta) * probs[gold]):
// the one-hot label mixed with the model output at the gold coordinate.
// delta = 1 reduces to alpha * CE exactly.
double in_trust_loss(const OptionDistribution& dist, size_t gold_index, double alpha, double beta,
                     double delta);

// sum p_i log(p_i / q_i) over unmasked entries, 0 log 0 = 0, q clamped at
// 1e-12. Masks must match.
double kl_divergence(const OptionDistribution& p, const OptionDistribution& q);

// CE or In-Trust per config.kind (ignores the rdrop fields).
double base_loss(const OptionDistribution& dist, size_t gold_index, const LossConfig& config);

// base(dist1) + base(dist2) + weight * (KL(d1||d2) + KL(d2||d1)) / 2
double rdrop_objective(const OptionDistribution& dist1, const OptionDistribution& dist2,
                       size_t gold_index, const LossConfig& base_config, double rdrop_weight);

struct LogitGradient {
  double loss = 0.0;
  std::vector<double> dlogits;
};

struct PairLogitGradient {
  double loss = 0.0;
  std::vector<double> dlogits1;
  std::vector<double> dlogits2;
};

// Loss and its gradient w.r.t. the option logits (back through the softmax);
// padding entries receive zero gradient.
LogitGradient base_loss_dlogits(const OptionDistribution& dist, size_t gold_index,
                                const LossConfig& config);
PairLogitGradient rdrop_dlogits(const OptionDistribution& dist1, const OptionDistribution& dist2,
                                size_t gold_index, const LossConfig& config);

// Loss of one instance exactly as forward_backward computes it (including
// the R-Drop pass-seed derivation), without gradients.
double instance_loss(const EncoderBackend& model, const ChoiceInstance& instance,
                     const LossConfig& config, ScoreMode mode, uint64_t dropout_seed);

// Seeds of the two stochastic forward passes derived from one step seed.
uint64_t rdrop_pass_seed(uint64_t dropout_seed, int pass);

}  // namespace acrodis
