#include <cmath>

#include "acrodis/losses.hpp"
#include "acrodis/rng.hpp"
#include "doctest.h"

using namespace acrodis;

namespace {

OptionDistribution dist_of(std::vector<double> probs) {
  OptionDistribution d;
  d.padding_mask.assign(probs.size(), 0);
  d.probs = std::move(probs);
  return d;
}

// random distribution over n real options plus optional padding tail
OptionDistribution random_dist(Rng& rng, size_t n_real, size_t n_pad = 0) {
  OptionDistribution d;
  double sum = 0.0;
  for (size_t i = 0; i < n_real; ++i) {
    d.probs.push_back(0.05 + rng.uniform());
    d.padding_mask.push_back(0);
    sum += d.probs.back();
  }
  for (auto& p : d.probs) p /= sum;
  for (size_t i = 0; i < n_pad; ++i) {
    d.probs.push_back(0.0);
    d.padding_mask.push_back(1);
  }
  return d;
}

OptionLogits logits_of(std::vector<double> values, std::vector<uint8_t> mask = {}) {
  OptionLogits l;
  if (mask.empty()) mask.assign(values.size(), 0);
  l.values = std::move(values);
  l.padding_mask = std::move(mask);
  return l;
}

}  // namespace

TEST_CASE("cross entropy closed forms") {
  CHECK(cross_entropy(dist_of({0.5, 0.5}), 0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(cross_entropy(dist_of({0.5, 0.5}), 1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(cross_entropy(dist_of({1.0, 0.0}), 0) == doctest::Approx(0.0));
  CHECK(cross_entropy(dist_of({0.75, 0.25}), 0) ==
        doctest::Approx(-std::log(0.75)).epsilon(1e-12));

  OptionDistribution with_pad = dist_of({1.0, 0.0});
  with_pad.padding_mask = {0, 1};
  CHECK_THROWS(cross_entropy(with_pad, 1));  // gold on padding
}

TEST_CASE("in-trust loss closed forms and the full-trust identity") {
  // alpha=1, beta=1, delta=0.5, probs[gold]=0.5: CE = ln 2, DCE = -ln 0.75
  const double expected = std::log(2.0) - std::log(0.75);
  CHECK(in_trust_loss(dist_of({0.5, 0.5}), 0, 1.0, 1.0, 0.5) ==
        doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(0.9808).epsilon(1e-4));

  // perfect prediction: DCE = 0 for every delta
  for (double delta : {0.1, 0.5, 1.0}) {
    CHECK(in_trust_loss(dist_of({1.0, 0.0}), 0, 0.0, 1.0, delta) == doctest::Approx(0.0));
  }

  // delta = 1 degenerates to alpha * CE exactly
  Rng rng(8);
  for (int trial = 0; trial < 1000; ++trial) {
    const OptionDistribution d = random_dist(rng, 2 + rng.below(6), rng.below(3));
    const size_t gold = rng.below(2);
    const double alpha = rng.uniform() * 2.0;
    const double it = in_trust_loss(d, gold, alpha, 1.7, 1.0);
    CHECK(std::abs(it - alpha * cross_entropy(d, gold)) < 1e-12);
  }
}

TEST_CASE("losses are non-negative and vanish only on perfect predictions") {
  Rng rng(12);
  LossConfig it_cfg;
  it_cfg.kind = LossKind::kInTrust;
  for (int trial = 0; trial < 500; ++trial) {
    const OptionDistribution d = random_dist(rng, 2 + rng.below(6), rng.below(3));
    const size_t gold = rng.below(2);
    CHECK(cross_entropy(d, gold) > 0.0);  // probs[gold] < 1 by construction
    CHECK(in_trust_loss(d, gold, 1.0, 1.0, 0.5) > 0.0);
    CHECK(base_loss(d, gold, it_cfg) >= 0.0);
  }
  CHECK(cross_entropy(dist_of({0.0, 1.0}), 1) == 0.0);
}

TEST_CASE("kl divergence closed forms and non-negativity") {
  const OptionDistribution p = dist_of({0.9, 0.1});
  const OptionDistribution q = dist_of({0.6, 0.4});
  CHECK(kl_divergence(p, p) == doctest::Approx(0.0));
  const double expected = 0.9 * std::log(0.9 / 0.6) + 0.1 * std::log(0.1 / 0.4);
  CHECK(kl_divergence(p, q) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(0.2263).epsilon(1e-3));

  Rng rng(9);
  for (int trial = 0; trial < 1000; ++trial) {
    const size_t n = 2 + rng.below(8);
    const OptionDistribution a = random_dist(rng, n);
    OptionDistribution b = random_dist(rng, n);
    CHECK(kl_divergence(a, b) >= 0.0);
  }

  OptionDistribution mismatched = dist_of({0.5, 0.5});
  mismatched.padding_mask = {0, 1};
  CHECK_THROWS(kl_divergence(p, mismatched));
}

TEST_CASE("rdrop objective degenerate and hand cases") {
  LossConfig ce;
  const OptionDistribution d1 = dist_of({0.9, 0.1});
  const OptionDistribution d2 = dist_of({0.6, 0.4});

  // identical passes: exactly twice the base loss
  CHECK(rdrop_objective(d1, d1, 0, ce, 123.0) ==
        doctest::Approx(2.0 * cross_entropy(d1, 0)).epsilon(1e-15));

  // disabled weight: sum of the two base losses
  CHECK(rdrop_objective(d1, d2, 0, ce, 0.0) ==
        doctest::Approx(cross_entropy(d1, 0) + cross_entropy(d2, 0)).epsilon(1e-15));

  // hand case: (0.1054 + 0.5108) + 0.2687 = 0.8849
  const double sym = 0.5 * (kl_divergence(d1, d2) + kl_divergence(d2, d1));
  const double expected = -std::log(0.9) - std::log(0.6) + sym;
  CHECK(rdrop_objective(d1, d2, 0, ce, 1.0) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(0.8849).epsilon(1e-3));

  // monotone non-decreasing in the weight
  Rng rng(10);
  for (int trial = 0; trial < 200; ++trial) {
    const size_t n = 2 + rng.below(5);
    const OptionDistribution a = random_dist(rng, n);
    const OptionDistribution b = random_dist(rng, n);
    const size_t gold = rng.below(n);
    const double w1 = rng.uniform() * 2.0;
    const double w2 = w1 + rng.uniform();
    CHECK(rdrop_objective(a, b, gold, ce, w2) >= rdrop_objective(a, b, gold, ce, w1) - 1e-12);
  }

  // symmetric KL term: swapping the passes preserves the value
  LossConfig sym_cfg;
  sym_cfg.rdrop_weight = 1.0;
  for (int trial = 0; trial < 100; ++trial) {
    const size_t n = 2 + rng.below(5);
    const OptionDistribution a = random_dist(rng, n);
    const OptionDistribution b = random_dist(rng, n);
    const double kl_ab = 0.5 * (kl_divergence(a, b) + kl_divergence(b, a));
    const double kl_ba = 0.5 * (kl_divergence(b, a) + kl_divergence(a, b));
    CHECK(kl_ab == doctest::Approx(kl_ba).epsilon(1e-15));
  }
}

TEST_CASE("loss config validation") {
  LossConfig c;
  c.delta = 0.0;
  CHECK_THROWS(c.validate());
  c = LossConfig{};
  c.alpha = -1.0;
  CHECK_THROWS(c.validate());
  c = LossConfig{};
  c.rdrop_weight = -0.5;
  CHECK_THROWS(c.validate());
  CHECK(loss_kind_from_name("ce") == LossKind::kCrossEntropy);
  CHECK(loss_kind_from_name("in_trust") == LossKind::kInTrust);
  CHECK_THROWS(loss_kind_from_name("focal"));
}

// finite differences on raw logit vectors: the analytic dlogits of every
// loss must match the numeric derivative of loss(softmax(z))
TEST_CASE("loss gradients w.r.t. logits match finite differences") {
  Rng rng(11);
  const double eps = 1e-6;

  auto check_base = [&](const LossConfig& cfg) {
    for (int trial = 0; trial < 50; ++trial) {
      const size_t n = 2 + rng.below(5);
      std::vector<double> z(n);
      for (auto& v : z) v = rng.normal();
      const size_t gold = rng.below(n);

      const OptionDistribution d = softmax_over_options(logits_of(z));
      const LogitGradient lg = base_loss_dlogits(d, gold, cfg);
      for (size_t k = 0; k < n; ++k) {
        auto zp = z, zm = z;
        zp[k] += eps;
        zm[k] -= eps;
        const double lp = base_loss(softmax_over_options(logits_of(zp)), gold, cfg);
        const double lm = base_loss(softmax_over_options(logits_of(zm)), gold, cfg);
        const double fd = (lp - lm) / (2 * eps);
        CHECK(lg.dlogits[k] == doctest::Approx(fd).epsilon(5e-5));
      }
    }
  };

  LossConfig ce;
  check_base(ce);
  LossConfig it;
  it.kind = LossKind::kInTrust;
  it.alpha = 0.8;
  it.beta = 1.3;
  it.delta = 0.4;
  check_base(it);

  // rdrop pair gradient, including the KL path with distinct distributions
  LossConfig rd;
  rd.rdrop_enabled = true;
  rd.rdrop_weight = 0.7;
  for (int trial = 0; trial < 30; ++trial) {
    const size_t n = 2 + rng.below(4);
    std::vector<double> z1(n), z2(n);
    for (auto& v : z1) v = rng.normal();
    for (auto& v : z2) v = rng.normal();
    const size_t gold = rng.below(n);

    const OptionDistribution d1 = softmax_over_options(logits_of(z1));
    const OptionDistribution d2 = softmax_over_options(logits_of(z2));
    const PairLogitGradient pg = rdrop_dlogits(d1, d2, gold, rd);

    auto loss_at = [&](const std::vector<double>& a, const std::vector<double>& b) {
      return rdrop_objective(softmax_over_options(logits_of(a)),
                             softmax_over_options(logits_of(b)), gold, rd, rd.rdrop_weight);
    };
    for (size_t k = 0; k < n; ++k) {
      auto zp = z1, zm = z1;
      zp[k] += eps;
      zm[k] -= eps;
      const double fd = (loss_at(zp, z2) - loss_at(zm, z2)) / (2 * eps);
      CHECK(pg.dlogits1[k] == doctest::Approx(fd).epsilon(5e-5));

      auto wp = z2, wm = z2;
      wp[k] += eps;
      wm[k] -= eps;
      const double fd2 = (loss_at(z1, wp) - loss_at(z1, wm)) / (2 * eps);
      CHECK(pg.dlogits2[k] == doctest::Approx(fd2).epsilon(5e-5));
    }
  }
}
