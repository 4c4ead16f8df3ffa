#include "acrodis/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "acrodis/losses.hpp"
#include "acrodis/rng.hpp"
#include "acrodis/text.hpp"

namespace acrodis {

namespace {

constexpr const char* kSepToken = "[sep]";
constexpr double kEmbedInitStd = 0.02;

// y[i,j] = b[j] + sum_k x[i,k] W[k,j]   (x: n x din, W: din x dout)
void linear_forward(const double* x, size_t n, size_t din, size_t dout, const double* w,
                    const double* b, double* y) {
  for (size_t i = 0; i < n; ++i) {
    double* yi = y + i * dout;
    for (size_t j = 0; j < dout; ++j) yi[j] = b[j];
    const double* xi = x + i * din;
    for (size_t k = 0; k < din; ++k) {
      const double xv = xi[k];
      if (xv == 0.0) continue;
      const double* wk = w + k * dout;
      for (size_t j = 0; j < dout; ++j) yi[j] += xv * wk[j];
    }
  }
}

void linear_backward(const double* x, const double* dy, size_t n, size_t din, size_t dout,
                     const double* w, double* dx, double* dw, double* db) {
  for (size_t i = 0; i < n; ++i) {
    const double* dyi = dy + i * dout;
    const double* xi = x + i * din;
    for (size_t j = 0; j < dout; ++j) db[j] += dyi[j];
    for (size_t k = 0; k < din; ++k) {
      const double* wk = w + k * dout;
      double acc = 0.0;
      double* dwk = dw + k * dout;
      const double xv = xi[k];
      for (size_t j = 0; j < dout; ++j) {
        acc += dyi[j] * wk[j];
        dwk[j] += xv * dyi[j];
      }
      if (dx) dx[i * din + k] += acc;
    }
  }
}

// per-position layer norm; stores xhat and 1/std for the backward pass
void layernorm_forward(const double* x, size_t n, size_t d, const double* gamma,
                       const double* beta, double* xhat, double* invstd, double* y) {
  for (size_t i = 0; i < n; ++i) {
    const double* xi = x + i * d;
    double mean = 0.0;
    for (size_t j = 0; j < d; ++j) mean += xi[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (size_t j = 0; j < d; ++j) {
      const double c = xi[j] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + 1e-5);
    invstd[i] = is;
    for (size_t j = 0; j < d; ++j) {
      const double xh = (xi[j] - mean) * is;
      xhat[i * d + j] = xh;
      y[i * d + j] = gamma[j] * xh + beta[j];
    }
  }
}

void layernorm_backward(const double* xhat, const double* invstd, size_t n, size_t d,
                        const double* gamma, const double* dy, double* dx, double* dgamma,
                        double* dbeta) {
  for (size_t i = 0; i < n; ++i) {
    const double* dyi = dy + i * d;
    const double* xh = xhat + i * d;
    double mean_g = 0.0, mean_gx = 0.0;
    for (size_t j = 0; j < d; ++j) {
      const double g = dyi[j] * gamma[j];
      mean_g += g;
      mean_gx += g * xh[j];
      dgamma[j] += dyi[j] * xh[j];
      dbeta[j] += dyi[j];
    }
    mean_g /= static_cast<double>(d);
    mean_gx /= static_cast<double>(d);
    for (size_t j = 0; j < d; ++j) {
      const double g = dyi[j] * gamma[j];
      dx[i * d + j] += invstd[i] * (g - mean_g - xh[j] * mean_gx);
    }
  }
}

}  // namespace

void EncoderConfig::validate() const {
  if (vocab_hash_size == 0) throw std::runtime_error("encoder: vocab_hash_size must be > 0");
  if (embedding_dim == 0 || num_heads == 0 || embedding_dim % num_heads != 0) {
    throw std::runtime_error("encoder: embedding_dim must be a positive multiple of num_heads");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw std::runtime_error("encoder: dropout_rate must be in [0, 1)");
  }
  if (max_positions == 0) throw std::runtime_error("encoder: max_positions must be > 0");
}

OptionDistribution softmax_over_options(const OptionLogits& logits) {
  const size_t K = logits.values.size();
  if (K == 0 || logits.padding_mask.size() != K) {
    throw std::runtime_error("softmax: malformed logits");
  }
  double mx = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (size_t k = 0; k < K; ++k) {
    if (!logits.padding_mask[k]) {
      any = true;
      mx = std::max(mx, logits.values[k]);
    }
  }
  if (!any) throw std::runtime_error("softmax: every option is masked");

  OptionDistribution dist;
  dist.probs.assign(K, 0.0);
  dist.padding_mask = logits.padding_mask;
  double z = 0.0;
  for (size_t k = 0; k < K; ++k) {
    if (!logits.padding_mask[k]) {
      dist.probs[k] = std::exp(logits.values[k] - mx);
      z += dist.probs[k];
    }
  }
  for (size_t k = 0; k < K; ++k) dist.probs[k] /= z;
  return dist;
}

struct ReferenceEncoder::OptionCache {
  size_t n = 0;
  size_t n_ctx = 0;  // context positions are [0, n_ctx); then [sep]; candidate after
  std::vector<size_t> ids;
  std::vector<double> x0;     // embedded, pre-dropout
  std::vector<double> drop0;  // dropout multipliers (empty when inactive)
  struct Layer {
    std::vector<double> x;        // block input
    std::vector<double> xhat;     // LN intermediate
    std::vector<double> invstd;   // per position
    std::vector<double> lnout;
    std::vector<double> q, k, v;
    std::vector<double> aprobs;   // H * n * n attention rows
    std::vector<double> attn;     // heads concatenated
    std::vector<double> proj;     // after output projection, pre-dropout
    std::vector<double> drop;     // dropout multipliers (empty when inactive)
  };
  std::vector<Layer> layers;
  std::vector<double> x_last;   // input to the final LN
  std::vector<double> fhat;
  std::vector<double> finvstd;
  std::vector<double> xf;
  std::vector<double> pooled;   // [context mean ; candidate mean], 2d
  std::vector<double> hidden;   // tanh layer output
  double logit = 0.0;
};

ReferenceEncoder::ReferenceEncoder(const EncoderConfig& config) : config_(config) {
  config_.validate();
  const size_t d = config_.embedding_dim;

  params_.add("embed.token", {config_.vocab_hash_size, d});
  params_.add("embed.pos", {config_.max_positions, d});
  for (size_t l = 0; l < config_.num_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    params_.add(p + "ln.gamma", {d});
    params_.add(p + "ln.beta", {d});
    params_.add(p + "attn.wq", {d, d});
    params_.add(p + "attn.bq", {d});
    params_.add(p + "attn.wk", {d, d});
    params_.add(p + "attn.bk", {d});
    params_.add(p + "attn.wv", {d, d});
    params_.add(p + "attn.bv", {d});
    params_.add(p + "attn.wo", {d, d});
    params_.add(p + "attn.bo", {d});
  }
  params_.add("final_ln.gamma", {d});
  params_.add("final_ln.beta", {d});
  params_.add("head.w1", {2 * d, d});
  params_.add("head.b1", {d});
  params_.add("head.w2", {d});
  params_.add("head.b2", {1});

  for (auto& t : params_.tensors()) {
    if (t.name.ends_with("gamma")) {
      std::fill(t.data.begin(), t.data.end(), 1.0);
    } else if (t.name.ends_with("beta") || t.name[t.name.find_last_of('.') + 1] == 'b') {
      // biases and betas start at zero
    } else if (t.name.starts_with("embed.")) {
      Rng rng(mix_keys(config_.seed, text::fnv1a(t.name)));
      for (auto& x : t.data) x = rng.normal() * kEmbedInitStd;
    } else {
      // Glorot scaling for projections; the layer norms make the embedding
      // scale irrelevant but the head needs O(1) signal to train from
      const size_t fan_in = t.shape.size() == 2 ? t.shape[0] : t.shape[0];
      const size_t fan_out = t.shape.size() == 2 ? t.shape[1] : 1;
      const double std = std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
      Rng rng(mix_keys(config_.seed, text::fnv1a(t.name)));
      for (auto& x : t.data) x = rng.normal() * std;
    }
  }
}

ReferenceEncoder::ReferenceEncoder(const EncoderConfig& config, ParameterSet params)
    : config_(config), params_(std::move(params)) {
  config_.validate();
  ReferenceEncoder fresh(config);
  if (!fresh.params_.same_layout(params_)) {
    throw std::runtime_error("encoder: parameter set does not match the configuration layout");
  }
}

std::vector<std::string> ReferenceEncoder::tokenize(const std::string& text) const {
  auto pieces = text::split_whitespace(text);
  for (auto& p : pieces) p = text::normalize_token(p);
  return pieces;
}

std::vector<size_t> ReferenceEncoder::token_ids(const OptionEncoding& option,
                                                size_t& context_len) const {
  std::vector<size_t> ids;
  ids.reserve(option.context_tokens.size() + 8);
  for (const auto& t : option.context_tokens) {
    ids.push_back(text::fnv1a(text::normalize_token(t)) % config_.vocab_hash_size);
  }
  context_len = ids.size();
  if (context_len == 0) throw std::runtime_error("encoder: option has an empty context");
  ids.push_back(text::fnv1a(kSepToken) % config_.vocab_hash_size);
  const auto cand = tokenize(option.candidate_text);
  if (cand.empty()) throw std::runtime_error("encoder: option has an empty candidate text");
  for (const auto& t : cand) ids.push_back(text::fnv1a(t) % config_.vocab_hash_size);
  return ids;
}

double ReferenceEncoder::option_forward(const OptionEncoding& option, ScoreMode mode,
                                        uint64_t option_seed, OptionCache* cache) const {
  const size_t d = config_.embedding_dim;
  const size_t H = config_.num_heads;
  const size_t dh = d / H;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  size_t n_ctx = 0;
  const std::vector<size_t> ids = token_ids(option, n_ctx);
  const size_t n = ids.size();
  if (n > config_.max_positions) {
    throw std::runtime_error("encoder: sequence length " + std::to_string(n) +
                             " exceeds max_positions " + std::to_string(config_.max_positions) +
                             "; contexts must be pre-truncated");
  }

  const bool use_dropout = mode == ScoreMode::kTrain && config_.dropout_rate > 0.0;
  Rng drop_rng(mix_keys(option_seed, 0x64726f70ULL));
  const double keep_scale = use_dropout ? 1.0 / (1.0 - config_.dropout_rate) : 1.0;
  auto draw_mask = [&](std::vector<double>& mask, size_t count) {
    mask.resize(count);
    for (size_t i = 0; i < count; ++i) {
      mask[i] = drop_rng.uniform() < config_.dropout_rate ? 0.0 : keep_scale;
    }
  };

  const auto& emb = params_.at("embed.token").data;
  const auto& pos = params_.at("embed.pos").data;

  std::vector<double> x(n * d);
  for (size_t i = 0; i < n; ++i) {
    const double* e = emb.data() + ids[i] * d;
    const double* p = pos.data() + i * d;
    for (size_t j = 0; j < d; ++j) x[i * d + j] = e[j] + p[j];
  }
  if (cache) {
    cache->n = n;
    cache->n_ctx = n_ctx;
    cache->ids = ids;
    cache->x0 = x;
    cache->layers.resize(config_.num_layers);
  }
  if (use_dropout) {
    std::vector<double> mask;
    draw_mask(mask, n * d);
    for (size_t i = 0; i < n * d; ++i) x[i] *= mask[i];
    if (cache) cache->drop0 = std::move(mask);
  }

  std::vector<double> lnout(n * d), xhat(n * d), invstd(n);
  std::vector<double> q(n * d), k(n * d), v(n * d), attn(n * d), proj(n * d);
  std::vector<double> aprobs(H * n * n);

  for (size_t l = 0; l < config_.num_layers; ++l) {
    const std::string pfx = "layer" + std::to_string(l) + ".";
    const auto& gamma = params_.at(pfx + "ln.gamma").data;
    const auto& beta = params_.at(pfx + "ln.beta").data;

    if (cache) cache->layers[l].x = x;
    layernorm_forward(x.data(), n, d, gamma.data(), beta.data(), xhat.data(), invstd.data(),
                      lnout.data());

    linear_forward(lnout.data(), n, d, d, params_.at(pfx + "attn.wq").data.data(),
                   params_.at(pfx + "attn.bq").data.data(), q.data());
    linear_forward(lnout.data(), n, d, d, params_.at(pfx + "attn.wk").data.data(),
                   params_.at(pfx + "attn.bk").data.data(), k.data());
    linear_forward(lnout.data(), n, d, d, params_.at(pfx + "attn.wv").data.data(),
                   params_.at(pfx + "attn.bv").data.data(), v.data());

    for (size_t h = 0; h < H; ++h) {
      const size_t off = h * dh;
      double* arows = aprobs.data() + h * n * n;
      for (size_t i = 0; i < n; ++i) {
        double* arow = arows + i * n;
        double mx = -std::numeric_limits<double>::infinity();
        for (size_t j2 = 0; j2 < n; ++j2) {
          double s = 0.0;
          const double* qi = q.data() + i * d + off;
          const double* kj = k.data() + j2 * d + off;
          for (size_t t = 0; t < dh; ++t) s += qi[t] * kj[t];
          arow[j2] = s * inv_sqrt_dh;
          mx = std::max(mx, arow[j2]);
        }
        double z = 0.0;
        for (size_t j2 = 0; j2 < n; ++j2) {
          arow[j2] = std::exp(arow[j2] - mx);
          z += arow[j2];
        }
        for (size_t j2 = 0; j2 < n; ++j2) arow[j2] /= z;
        double* out = attn.data() + i * d + off;
        std::fill(out, out + dh, 0.0);
        for (size_t j2 = 0; j2 < n; ++j2) {
          const double a = arow[j2];
          if (a == 0.0) continue;
          const double* vj = v.data() + j2 * d + off;
          for (size_t t = 0; t < dh; ++t) out[t] += a * vj[t];
        }
      }
    }

    linear_forward(attn.data(), n, d, d, params_.at(pfx + "attn.wo").data.data(),
                   params_.at(pfx + "attn.bo").data.data(), proj.data());

    if (cache) {
      auto& lc = cache->layers[l];
      lc.xhat = xhat;
      lc.invstd = invstd;
      lc.lnout = lnout;
      lc.q = q;
      lc.k = k;
      lc.v = v;
      lc.aprobs = aprobs;
      lc.attn = attn;
      lc.proj = proj;
    }

    if (use_dropout) {
      std::vector<double> mask;
      draw_mask(mask, n * d);
      for (size_t i = 0; i < n * d; ++i) x[i] += proj[i] * mask[i];
      if (cache) cache->layers[l].drop = std::move(mask);
    } else {
      for (size_t i = 0; i < n * d; ++i) x[i] += proj[i];
    }
  }

  if (cache) cache->x_last = x;
  std::vector<double> xf(n * d), fhat(n * d), finvstd(n);
  layernorm_forward(x.data(), n, d, params_.at("final_ln.gamma").data.data(),
                    params_.at("final_ln.beta").data.data(), fhat.data(), finvstd.data(),
                    xf.data());

  // mean-pool context and candidate separately; [sep] belongs to neither
  const size_t cand_begin = n_ctx + 1;
  const size_t n_cand = n - cand_begin;
  std::vector<double> pooled(2 * d, 0.0);
  for (size_t i = 0; i < n_ctx; ++i) {
    for (size_t j = 0; j < d; ++j) pooled[j] += xf[i * d + j];
  }
  for (size_t j = 0; j < d; ++j) pooled[j] /= static_cast<double>(n_ctx);
  for (size_t i = cand_begin; i < n; ++i) {
    for (size_t j = 0; j < d; ++j) pooled[d + j] += xf[i * d + j];
  }
  for (size_t j = 0; j < d; ++j) pooled[d + j] /= static_cast<double>(n_cand);

  const auto& w1 = params_.at("head.w1").data;
  const auto& b1 = params_.at("head.b1").data;
  std::vector<double> hidden(d);
  linear_forward(pooled.data(), 1, 2 * d, d, w1.data(), b1.data(), hidden.data());
  for (auto& hval : hidden) hval = std::tanh(hval);

  const auto& w2 = params_.at("head.w2").data;
  double logit = params_.at("head.b2").data[0];
  for (size_t j = 0; j < d; ++j) logit += hidden[j] * w2[j];

  if (cache) {
    cache->fhat = std::move(fhat);
    cache->finvstd = std::move(finvstd);
    cache->xf = std::move(xf);
    cache->pooled = std::move(pooled);
    cache->hidden = std::move(hidden);
    cache->logit = logit;
  }
  return logit;
}

void ReferenceEncoder::option_backward(const OptionCache& cache, double dlogit,
                                       GradientSet& grads) const {
  const size_t d = config_.embedding_dim;
  const size_t H = config_.num_heads;
  const size_t dh = d / H;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  const size_t n = cache.n;
  const size_t n_ctx = cache.n_ctx;
  const size_t cand_begin = n_ctx + 1;
  const size_t n_cand = n - cand_begin;

  // head
  const auto& w2 = params_.at("head.w2").data;
  auto& dw2 = grads.at("head.w2").data;
  grads.at("head.b2").data[0] += dlogit;
  std::vector<double> dhidden(d);
  for (size_t j = 0; j < d; ++j) {
    dw2[j] += cache.hidden[j] * dlogit;
    const double th = cache.hidden[j];
    dhidden[j] = w2[j] * dlogit * (1.0 - th * th);
  }

  std::vector<double> dpooled(2 * d, 0.0);
  linear_backward(cache.pooled.data(), dhidden.data(), 1, 2 * d, d,
                  params_.at("head.w1").data.data(), dpooled.data(),
                  grads.at("head.w1").data.data(), grads.at("head.b1").data.data());

  // un-pool
  std::vector<double> dxf(n * d, 0.0);
  for (size_t i = 0; i < n_ctx; ++i) {
    for (size_t j = 0; j < d; ++j) dxf[i * d + j] += dpooled[j] / static_cast<double>(n_ctx);
  }
  for (size_t i = cand_begin; i < n; ++i) {
    for (size_t j = 0; j < d; ++j) dxf[i * d + j] += dpooled[d + j] / static_cast<double>(n_cand);
  }

  std::vector<double> dx(n * d, 0.0);
  layernorm_backward(cache.fhat.data(), cache.finvstd.data(), n, d,
                     params_.at("final_ln.gamma").data.data(), dxf.data(), dx.data(),
                     grads.at("final_ln.gamma").data.data(),
                     grads.at("final_ln.beta").data.data());

  std::vector<double> dproj(n * d), dattn(n * d), dq(n * d), dk(n * d), dv(n * d),
      dlnout(n * d);
  for (size_t li = config_.num_layers; li-- > 0;) {
    const auto& lc = cache.layers[li];
    const std::string pfx = "layer" + std::to_string(li) + ".";

    // residual: dx flows to both the skip path and the attention branch
    if (!lc.drop.empty()) {
      for (size_t i = 0; i < n * d; ++i) dproj[i] = dx[i] * lc.drop[i];
    } else {
      std::copy(dx.begin(), dx.end(), dproj.begin());
    }

    std::fill(dattn.begin(), dattn.end(), 0.0);
    linear_backward(lc.attn.data(), dproj.data(), n, d, d,
                    params_.at(pfx + "attn.wo").data.data(), dattn.data(),
                    grads.at(pfx + "attn.wo").data.data(),
                    grads.at(pfx + "attn.bo").data.data());

    std::fill(dq.begin(), dq.end(), 0.0);
    std::fill(dk.begin(), dk.end(), 0.0);
    std::fill(dv.begin(), dv.end(), 0.0);
    std::vector<double> darow(n), dsrow(n);
    for (size_t h = 0; h < H; ++h) {
      const size_t off = h * dh;
      const double* arows = lc.aprobs.data() + h * n * n;
      for (size_t i = 0; i < n; ++i) {
        const double* arow = arows + i * n;
        const double* dout = dattn.data() + i * d + off;
        double dot = 0.0;
        for (size_t j2 = 0; j2 < n; ++j2) {
          const double* vj = lc.v.data() + j2 * d + off;
          double da = 0.0;
          for (size_t t = 0; t < dh; ++t) da += dout[t] * vj[t];
          darow[j2] = da;
          dot += da * arow[j2];
          double* dvj = dv.data() + j2 * d + off;
          const double a = arow[j2];
          for (size_t t = 0; t < dh; ++t) dvj[t] += a * dout[t];
        }
        for (size_t j2 = 0; j2 < n; ++j2) dsrow[j2] = arow[j2] * (darow[j2] - dot);
        const double* qi = lc.q.data() + i * d + off;
        double* dqi = dq.data() + i * d + off;
        for (size_t j2 = 0; j2 < n; ++j2) {
          const double ds = dsrow[j2] * inv_sqrt_dh;
          if (ds == 0.0) continue;
          const double* kj = lc.k.data() + j2 * d + off;
          double* dkj = dk.data() + j2 * d + off;
          for (size_t t = 0; t < dh; ++t) {
            dqi[t] += ds * kj[t];
            dkj[t] += ds * qi[t];
          }
        }
      }
    }

    std::fill(dlnout.begin(), dlnout.end(), 0.0);
    linear_backward(lc.lnout.data(), dq.data(), n, d, d, params_.at(pfx + "attn.wq").data.data(),
                    dlnout.data(), grads.at(pfx + "attn.wq").data.data(),
                    grads.at(pfx + "attn.bq").data.data());
    linear_backward(lc.lnout.data(), dk.data(), n, d, d, params_.at(pfx + "attn.wk").data.data(),
                    dlnout.data(), grads.at(pfx + "attn.wk").data.data(),
                    grads.at(pfx + "attn.bk").data.data());
    linear_backward(lc.lnout.data(), dv.data(), n, d, d, params_.at(pfx + "attn.wv").data.data(),
                    dlnout.data(), grads.at(pfx + "attn.wv").data.data(),
                    grads.at(pfx + "attn.bv").data.data());

    // LN backward adds into dx (the residual skip keeps its share)
    layernorm_backward(lc.xhat.data(), lc.invstd.data(), n, d,
                       params_.at(pfx + "ln.gamma").data.data(), dlnout.data(), dx.data(),
                       grads.at(pfx + "ln.gamma").data.data(),
                       grads.at(pfx + "ln.beta").data.data());
  }

  if (!cache.drop0.empty()) {
    for (size_t i = 0; i < n * d; ++i) dx[i] *= cache.drop0[i];
  }

  auto& demb = grads.at("embed.token").data;
  auto& dposg = grads.at("embed.pos").data;
  for (size_t i = 0; i < n; ++i) {
    double* de = demb.data() + cache.ids[i] * d;
    double* dp = dposg.data() + i * d;
    for (size_t j = 0; j < d; ++j) {
      de[j] += dx[i * d + j];
      dp[j] += dx[i * d + j];
    }
  }
}

OptionLogits ReferenceEncoder::score_options(const ChoiceInstance& instance, ScoreMode mode,
                                             uint64_t dropout_seed) const {
  OptionLogits out;
  const size_t K = instance.options.size();
  out.values.assign(K, kPaddingLogit);
  out.padding_mask.assign(K, 1);
  for (size_t o = 0; o < K; ++o) {
    const auto& opt = instance.options[o];
    if (opt.is_padding) continue;
    out.padding_mask[o] = 0;
    out.values[o] = option_forward(opt, mode, mix_keys(dropout_seed, o), nullptr);
  }
  return out;
}

ForwardBackwardResult ReferenceEncoder::forward_backward(const ChoiceInstance& instance,
                                                         const LossConfig& loss, ScoreMode mode,
                                                         uint64_t dropout_seed) const {
  if (!instance.gold_index) {
    throw std::runtime_error("forward_backward: instance has no gold index (sample " +
                             instance.sample_id + ")");
  }
  loss.validate();
  const size_t K = instance.options.size();
  const size_t gold = *instance.gold_index;

  auto run_pass = [&](uint64_t pass_seed, std::vector<OptionCache>& caches) {
    OptionLogits logits;
    logits.values.assign(K, kPaddingLogit);
    logits.padding_mask.assign(K, 1);
    caches.resize(K);
    for (size_t o = 0; o < K; ++o) {
      const auto& opt = instance.options[o];
      if (opt.is_padding) continue;
      logits.padding_mask[o] = 0;
      logits.values[o] = option_forward(opt, mode, mix_keys(pass_seed, o), &caches[o]);
    }
    return logits;
  };

  ForwardBackwardResult result;
  result.gradients = params_.zeros_like();

  std::vector<OptionCache> caches1;
  const OptionLogits logits1 = run_pass(rdrop_pass_seed(dropout_seed, 1), caches1);
  const OptionDistribution dist1 = softmax_over_options(logits1);

  if (loss.rdrop_enabled) {
    std::vector<OptionCache> caches2;
    const OptionLogits logits2 = run_pass(rdrop_pass_seed(dropout_seed, 2), caches2);
    const OptionDistribution dist2 = softmax_over_options(logits2);
    const PairLogitGradient pg = rdrop_dlogits(dist1, dist2, gold, loss);
    result.loss = pg.loss;
    for (size_t o = 0; o < K; ++o) {
      if (instance.options[o].is_padding) continue;
      if (pg.dlogits1[o] != 0.0) option_backward(caches1[o], pg.dlogits1[o], result.gradients);
      if (pg.dlogits2[o] != 0.0) option_backward(caches2[o], pg.dlogits2[o], result.gradients);
    }
  } else {
    const LogitGradient lg = base_loss_dlogits(dist1, gold, loss);
    result.loss = lg.loss;
    for (size_t o = 0; o < K; ++o) {
      if (instance.options[o].is_padding) continue;
      if (lg.dlogits[o] != 0.0) option_backward(caches1[o], lg.dlogits[o], result.gradients);
    }
  }
  return result;
}

std::unique_ptr<ReferenceEncoder> make_reference_encoder(const EncoderConfig& config) {
  return std::make_unique<ReferenceEncoder>(config);
}

}  // namespace acrodis
