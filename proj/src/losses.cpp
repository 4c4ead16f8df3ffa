#include "acrodis/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "acrodis/rng.hpp"

namespace acrodis {

namespace {

constexpr double kLogClamp = 1e-12;

void check_gold(const OptionDistribution& dist, size_t gold_index) {
  if (gold_index >= dist.probs.size()) {
    throw std::runtime_error("loss: gold index " + std::to_string(gold_index) + " out of range");
  }
  if (dist.padding_mask[gold_index]) {
    throw std::runtime_error("loss: gold index " + std::to_string(gold_index) +
                             " is a padding option");
  }
}

void check_masks(const OptionDistribution& a, const OptionDistribution& b) {
  if (a.padding_mask != b.padding_mask || a.probs.size() != b.probs.size()) {
    throw std::runtime_error("loss: distributions have mismatched masks");
  }
}

// chain rule through the softmax: dL/dz_k = q_k * (g_k - sum_j g_j q_j)
std::vector<double> chain_softmax(const OptionDistribution& dist, const std::vector<double>& dprob) {
  const size_t K = dist.probs.size();
  double s = 0.0;
  for (size_t k = 0; k < K; ++k) {
    if (!dist.padding_mask[k]) s += dprob[k] * dist.probs[k];
  }
  std::vector<double> dz(K, 0.0);
  for (size_t k = 0; k < K; ++k) {
    if (!dist.padding_mask[k]) dz[k] = dist.probs[k] * (dprob[k] - s);
  }
  return dz;
}

// dL/dprobs of the base loss; nonzero only at the gold coordinate
std::vector<double> base_loss_dprob(const OptionDistribution& dist, size_t gold_index,
                                    const LossConfig& config) {
  std::vector<double> g(dist.probs.size(), 0.0);
  const double q = dist.probs[gold_index];
  if (config.kind == LossKind::kCrossEntropy) {
    if (q > kLogClamp) g[gold_index] = -1.0 / q;
  } else {
    if (q > kLogClamp) g[gold_index] += config.alpha * (-1.0 / q);
    const double arg = config.delta + (1.0 - config.delta) * q;
    g[gold_index] += config.beta * (-(1.0 - config.delta) / arg);
  }
  return g;
}

}  // namespace

std::string loss_kind_name(LossKind kind) {
  return kind == LossKind::kCrossEntropy ? "ce" : "in_trust";
}

LossKind loss_kind_from_name(const std::string& name) {
  if (name == "ce") return LossKind::kCrossEntropy;
  if (name == "in_trust") return LossKind::kInTrust;
  throw std::runtime_error("unknown loss kind: '" + name + "' (expected ce or in_trust)");
}

void LossConfig::validate() const {
  if (!(delta > 0.0 && delta <= 1.0)) throw std::runtime_error("loss: delta must be in (0, 1]");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw std::runtime_error("loss: alpha must be finite and >= 0");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw std::runtime_error("loss: beta must be finite and >= 0");
  if (!(rdrop_weight >= 0.0) || !std::isfinite(rdrop_weight)) {
    throw std::runtime_error("loss: rdrop_weight must be finite and >= 0");
  }
}

double cross_entropy(const OptionDistribution& dist, size_t gold_index) {
  check_gold(dist, gold_index);
  return -std::log(std::max(dist.probs[gold_index], kLogClamp));
}

double in_trust_loss(const OptionDistribution& dist, size_t gold_index, double alpha, double beta,
                     double delta) {
  check_gold(dist, gold_index);
  if (!(delta > 0.0 && delta <= 1.0)) throw std::runtime_error("loss: delta must be in (0, 1]");
  const double ce = cross_entropy(dist, gold_index);
  const double dce = -std::log(std::max(delta + (1.0 - delta) * dist.probs[gold_index], kLogClamp));
  return alpha * ce + beta * dce;
}

double kl_divergence(const OptionDistribution& p, const OptionDistribution& q) {
  check_masks(p, q);
  double kl = 0.0;
  for (size_t i = 0; i < p.probs.size(); ++i) {
    if (p.padding_mask[i]) continue;
    const double pi = p.probs[i];
    if (pi <= 0.0) continue;  // 0 log 0 = 0
    kl += pi * (std::log(pi) - std::log(std::max(q.probs[i], kLogClamp)));
  }
  return kl;
}

double base_loss(const OptionDistribution& dist, size_t gold_index, const LossConfig& config) {
  if (config.kind == LossKind::kCrossEntropy) return cross_entropy(dist, gold_index);
  return in_trust_loss(dist, gold_index, config.alpha, config.beta, config.delta);
}

double rdrop_objective(const OptionDistribution& dist1, const OptionDistribution& dist2,
                       size_t gold_index, const LossConfig& base_config, double rdrop_weight) {
  check_masks(dist1, dist2);
  const double sym_kl = 0.5 * (kl_divergence(dist1, dist2) + kl_divergence(dist2, dist1));
  return base_loss(dist1, gold_index, base_config) + base_loss(dist2, gold_index, base_config) +
         rdrop_weight * sym_kl;
}

LogitGradient base_loss_dlogits(const OptionDistribution& dist, size_t gold_index,
                                const LossConfig& config) {
  check_gold(dist, gold_index);
  LogitGradient out;
  out.loss = base_loss(dist, gold_index, config);
  out.dlogits = chain_softmax(dist, base_loss_dprob(dist, gold_index, config));
  return out;
}

PairLogitGradient rdrop_dlogits(const OptionDistribution& dist1, const OptionDistribution& dist2,
                                size_t gold_index, const LossConfig& config) {
  check_gold(dist1, gold_index);
  check_masks(dist1, dist2);
  const size_t K = dist1.probs.size();
  const double w = config.rdrop_weight;

  PairLogitGradient out;
  out.loss = rdrop_objective(dist1, dist2, gold_index, config, w);

  // d/dprob of base(d1) + w/2*(KL(d1||d2) + KL(d2||d1)) w.r.t. each side
  std::vector<double> g1 = base_loss_dprob(dist1, gold_index, config);
  std::vector<double> g2 = base_loss_dprob(dist2, gold_index, config);
  for (size_t i = 0; i < K; ++i) {
    if (dist1.padding_mask[i]) continue;
    const double p1 = dist1.probs[i];
    const double p2 = dist2.probs[i];
    // KL(d1||d2) term is p1 * (log p1 - log max(p2, clamp)):
    // d/dp1 = log p1 - log max(p2, clamp) + 1; d/dp2 = -p1/p2 above the clamp
    if (p1 > 0.0) g1[i] += 0.5 * w * (std::log(p1) - std::log(std::max(p2, kLogClamp)) + 1.0);
    if (p2 > kLogClamp) g2[i] += 0.5 * w * (-p1 / p2);
    // KL(d2||d1), mirrored
    if (p2 > 0.0) g2[i] += 0.5 * w * (std::log(p2) - std::log(std::max(p1, kLogClamp)) + 1.0);
    if (p1 > kLogClamp) g1[i] += 0.5 * w * (-p2 / p1);
  }
  out.dlogits1 = chain_softmax(dist1, g1);
  out.dlogits2 = chain_softmax(dist2, g2);
  return out;
}

uint64_t rdrop_pass_seed(uint64_t dropout_seed, int pass) {
  return mix_keys(dropout_seed, 0x7264726fULL, static_cast<uint64_t>(pass));
}

double instance_loss(const EncoderBackend& model, const ChoiceInstance& instance,
                     const LossConfig& config, ScoreMode mode, uint64_t dropout_seed) {
  if (!instance.gold_index) throw std::runtime_error("instance_loss: gold index missing");
  const auto d1 = softmax_over_options(
      model.score_options(instance, mode, rdrop_pass_seed(dropout_seed, 1)));
  if (!config.rdrop_enabled) return base_loss(d1, *instance.gold_index, config);
  const auto d2 = softmax_over_options(
      model.score_options(instance, mode, rdrop_pass_seed(dropout_seed, 2)));
  return rdrop_objective(d1, d2, *instance.gold_index, config, config.rdrop_weight);
}

}  // namespace acrodis
