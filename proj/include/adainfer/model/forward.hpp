// Copyright 2026 The AdaInfer Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adainfer/core/error.hpp"
#include "adainfer/core/linalg.hpp"
#include "adainfer/model/model.hpp"

namespace adainfer {

/// Last-token probe of one decoder block.
struct BlockSnapshot {
  int layer_index = 0;  // 1-based
  Vector hidden_last;   // residual stream after the block
  Vector attn_last;     // attention sublayer output (post output-projection)
  Vector mlp_last;      // MLP sublayer output
  Vector logits;
  Vector probs;

  std::size_t prediction() const { return argmax(probs); }

  bool operator==(const BlockSnapshot&) const = default;
};

inline constexpr double kLayerNormEps = 1e-5;

/// y = gamma * (x - mean) / sqrt(var + eps) + beta. Returns (mean, rstd).
inline std::pair<double, double> layer_norm(std::span<const double> x,
                                            std::span<const double> gamma,
                                            std::span<const double> beta,
                                            std::span<double> y) {
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= n;
  const double rstd = 1.0 / std::sqrt(var + kLayerNormEps);
  for (std::size_t i = 0; i < x.size(); ++i)
    y[i] = gamma[i] * (x[i] - mean) * rstd + beta[i];
  return {mean, rstd};
}

/// Pre-softmax affine map: W hidden + b.
inline Vector lm_head(std::span<const double> hidden, const Matrix& weight,
                      std::span<const double> bias) {
  require(hidden.size() == weight.cols, "lm_head: hidden size mismatch");
  require(bias.size() == weight.rows, "lm_head: bias size mismatch");
  Vector out = matvec(weight, hidden);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bias[i];
  return out;
}

inline Vector lm_head(std::span<const double> hidden, const ModelWeights& w) {
  return lm_head(hidden, w.head_weight, w.head_bias);
}

/// Activations of one block over the whole sequence, kept for backprop.
struct BlockCache {
  Matrix x_in, a, q, k, v, ctx, attn_out, x_mid, m, u, r, mlp_out;
  Vector ln1_mean, ln1_rstd, ln2_mean, ln2_rstd;
  std::vector<Matrix> attn_probs;  // per head, seq x seq (causal)
};

/// Applies one pre-norm block to the residual stream `x` (seq x h) in place.
/// `attn_out`/`mlp_out` receive the sublayer outputs for every position.
inline void block_forward(const LayerWeights& lw, const ModelConfig& cfg,
                          Matrix& x, Matrix& attn_out, Matrix& mlp_out,
                          BlockCache* cache = nullptr) {
  const std::size_t seq = x.rows;
  const auto h = static_cast<std::size_t>(cfg.hidden_size);
  const auto heads = static_cast<std::size_t>(cfg.num_heads);
  const auto hd = static_cast<std::size_t>(cfg.head_dim());
  const auto mlp = static_cast<std::size_t>(cfg.mlp_size());
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  if (cache) {
    cache->x_in = x;
    cache->ln1_mean.assign(seq, 0.0);
    cache->ln1_rstd.assign(seq, 0.0);
    cache->ln2_mean.assign(seq, 0.0);
    cache->ln2_rstd.assign(seq, 0.0);
    cache->attn_probs.assign(heads, Matrix(seq, seq));
  }

  Matrix a(seq, h), q(seq, h), k(seq, h), v(seq, h), ctx(seq, h);
  for (std::size_t t = 0; t < seq; ++t) {
    auto [mean, rstd] = layer_norm(x.row(t), lw.ln1_gamma, lw.ln1_beta, a.row(t));
    if (cache) {
      cache->ln1_mean[t] = mean;
      cache->ln1_rstd[t] = rstd;
    }
    matvec(lw.wq, a.row(t), q.row(t));
    matvec(lw.wk, a.row(t), k.row(t));
    matvec(lw.wv, a.row(t), v.row(t));
  }

  Vector scores(seq);
  for (std::size_t head = 0; head < heads; ++head) {
    const std::size_t off = head * hd;
    for (std::size_t t = 0; t < seq; ++t) {
      const auto qt = q.row(t).subspan(off, hd);
      for (std::size_t j = 0; j <= t; ++j)
        scores[j] = scale * dot(qt, k.row(j).subspan(off, hd));
      const Vector p = softmax(std::span<const double>(scores.data(), t + 1));
      auto ct = ctx.row(t).subspan(off, hd);
      for (std::size_t j = 0; j <= t; ++j) {
        const auto vj = v.row(j).subspan(off, hd);
        for (std::size_t d = 0; d < hd; ++d) ct[d] += p[j] * vj[d];
        if (cache) cache->attn_probs[head](t, j) = p[j];
      }
    }
  }

  attn_out = Matrix(seq, h);
  for (std::size_t t = 0; t < seq; ++t) {
    matvec(lw.wo, ctx.row(t), attn_out.row(t));
    auto xt = x.row(t);
    const auto at = attn_out.row(t);
    for (std::size_t i = 0; i < h; ++i) xt[i] += at[i];
  }
  if (cache) cache->x_mid = x;

  Matrix m(seq, h), u(seq, mlp), r(seq, mlp);
  mlp_out = Matrix(seq, h);
  for (std::size_t t = 0; t < seq; ++t) {
    auto [mean, rstd] = layer_norm(x.row(t), lw.ln2_gamma, lw.ln2_beta, m.row(t));
    if (cache) {
      cache->ln2_mean[t] = mean;
      cache->ln2_rstd[t] = rstd;
    }
    matvec(lw.w_up, m.row(t), u.row(t));
    auto rt = r.row(t);
    const auto ut = u.row(t);
    for (std::size_t i = 0; i < mlp; ++i) rt[i] = ut[i] > 0.0 ? ut[i] : 0.0;
    matvec(lw.w_down, rt, mlp_out.row(t));
    auto xt = x.row(t);
    const auto ot = mlp_out.row(t);
    for (std::size_t i = 0; i < h; ++i) xt[i] += ot[i];
  }

  if (cache) {
    cache->a = std::move(a);
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->ctx = std::move(ctx);
    cache->attn_out = attn_out;
    cache->m = std::move(m);
    cache->u = std::move(u);
    cache->r = std::move(r);
    cache->mlp_out = mlp_out;
  }
}

inline void validate_tokens(const ModelConfig& cfg,
                            std::span<const TokenId> tokens) {
  require(!tokens.empty(), "forward: empty token sequence");
  require(tokens.size() <= static_cast<std::size_t>(cfg.max_seq_len),
          "forward: sequence longer than max_seq_len");
  for (TokenId t : tokens)
    require(t < static_cast<TokenId>(cfg.vocab_size),
            "forward: token id " + std::to_string(t) + " out of range");
}

inline Matrix embed(const Model& model, std::span<const TokenId> tokens) {
  const auto h = static_cast<std::size_t>(model.config.hidden_size);
  Matrix x(tokens.size(), h);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const auto te = model.weights.token_embedding.row(tokens[t]);
    const auto pe = model.weights.position_embedding.row(t);
    auto xt = x.row(t);
    for (std::size_t i = 0; i < h; ++i) xt[i] = te[i] + pe[i];
  }
  return x;
}

/// Logits read off a residual-stream vector after block `layer_index`.
inline Vector probe_logits(const Model& model, std::span<const double> hidden,
                           int layer_index) {
  const auto& w = model.weights;
  const bool normalize =
      model.config.probe_norm == ProbeNorm::kFinalNormEveryProbe ||
      layer_index == model.config.num_layers;
  if (!normalize) return lm_head(hidden, w);
  Vector n(hidden.size());
  layer_norm(hidden, w.final_gamma, w.final_beta, n);
  return lm_head(n, w);
}

/// probe_logits() into caller-owned buffers (same arithmetic, no
/// allocation once the buffers have their final size).
inline void probe_logits_into(const Model& model, std::span<const double> hidden,
                              int layer_index, Vector& scratch, Vector& out) {
  const auto& w = model.weights;
  require(hidden.size() == w.head_weight.cols, "lm_head: hidden size mismatch");
  const bool normalize =
      model.config.probe_norm == ProbeNorm::kFinalNormEveryProbe ||
      layer_index == model.config.num_layers;
  std::span<const double> in = hidden;
  if (normalize) {
    scratch.resize(hidden.size());
    layer_norm(hidden, w.final_gamma, w.final_beta, scratch);
    in = scratch;
  }
  out.resize(w.head_weight.rows);
  matvec(w.head_weight, in, out);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += w.head_bias[i];
}

/// Layer-by-layer evaluation of one instance. Each advance() runs exactly
/// one decoder block; probe() reads the current last-token state.
class ForwardPass {
 public:
  ForwardPass(const Model& model, std::span<const TokenId> tokens)
      : model_(&model) {
    validate_tokens(model.config, tokens);
    x_ = embed(model, tokens);
    const auto last = x_.row(x_.rows - 1);
    embedding_last_.assign(last.begin(), last.end());
  }

  int layers_evaluated() const { return evaluated_; }
  bool finished() const { return evaluated_ == model_->config.num_layers; }
  const Vector& embedding_last() const { return embedding_last_; }

  void advance() {
    require(!finished(), "forward: all layers already evaluated");
    block_forward(model_->weights.layers[static_cast<std::size_t>(evaluated_)],
                  model_->config, x_, attn_out_, mlp_out_);
    ++evaluated_;
  }

  std::span<const double> hidden_last() const { return x_.row(x_.rows - 1); }
  std::span<const double> attn_last() const { return attn_out_.row(attn_out_.rows - 1); }
  std::span<const double> mlp_last() const { return mlp_out_.row(mlp_out_.rows - 1); }

  Vector logits() const {
    return probe_logits(*model_, hidden_last(), evaluated_);
  }

  BlockSnapshot probe() const {
    require(evaluated_ >= 1, "forward: probe before first block");
    BlockSnapshot snap;
    snap.layer_index = evaluated_;
    const auto last = x_.rows - 1;
    const auto hid = x_.row(last);
    const auto att = attn_out_.row(last);
    const auto mlp = mlp_out_.row(last);
    snap.hidden_last.assign(hid.begin(), hid.end());
    snap.attn_last.assign(att.begin(), att.end());
    snap.mlp_last.assign(mlp.begin(), mlp.end());
    snap.logits = logits();
    snap.probs = softmax(snap.logits);
    return snap;
  }

  BlockSnapshot step() {
    advance();
    return probe();
  }

 private:
  const Model* model_;
  Matrix x_, attn_out_, mlp_out_;
  Vector embedding_last_;
  int evaluated_ = 0;
};

inline std::vector<BlockSnapshot> forward_instrumented(
    const Model& model, std::span<const TokenId> tokens) {
  ForwardPass pass(model, tokens);
  std::vector<BlockSnapshot> out;
  out.reserve(static_cast<std::size_t>(model.config.num_layers));
  while (!pass.finished()) out.push_back(pass.step());
  return out;
}

struct DenseResult {
  TokenId prediction = 0;
  Vector logits;
};

/// All L blocks, then a single head application.
inline DenseResult forward_dense(const Model& model,
                                 std::span<const TokenId> tokens) {
  ForwardPass pass(model, tokens);
  while (!pass.finished()) pass.advance();
  DenseResult out;
  out.logits = pass.logits();
  out.prediction = static_cast<TokenId>(argmax(softmax(out.logits)));
  return out;
}

}  // namespace adainfer
