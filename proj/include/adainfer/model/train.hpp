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
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "adainfer/core/error.hpp"
#include "adainfer/core/linalg.hpp"
#include "adainfer/core/rng.hpp"
#include "adainfer/model/corpus.hpp"
#include "adainfer/model/forward.hpp"
#include "adainfer/model/model.hpp"

namespace adainfer {

struct TrainHyperparams {
  int steps = 400;
  int batch_size = 16;
  double learning_rate = 3e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 1.0;
  std::uint64_t seed = 1;
};

struct TrainReport {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double train_accuracy = 0.0;
  std::vector<double> batch_losses;
};

namespace detail {

inline void layer_norm_backward(std::span<const double> x, double mean,
                                double rstd, std::span<const double> gamma,
                                std::span<const double> dy,
                                std::span<double> dgamma,
                                std::span<double> dbeta, std::span<double> dx) {
  const std::size_t n = x.size();
  Vector g(n), xhat(n);
  double mean_g = 0.0, mean_gx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    xhat[i] = (x[i] - mean) * rstd;
    dgamma[i] += dy[i] * xhat[i];
    dbeta[i] += dy[i];
    g[i] = dy[i] * gamma[i];
    mean_g += g[i];
    mean_gx += g[i] * xhat[i];
  }
  mean_g /= static_cast<double>(n);
  mean_gx /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    dx[i] += rstd * (g[i] - mean_g - xhat[i] * mean_gx);
}

/// On entry `dx` holds dLoss/d(block output); on exit dLoss/d(block input).
inline void block_backward(const LayerWeights& lw, const ModelConfig& cfg,
                           const BlockCache& c, Matrix& dx, LayerWeights& g) {
  const std::size_t seq = dx.rows;
  const auto h = static_cast<std::size_t>(cfg.hidden_size);
  const auto heads = static_cast<std::size_t>(cfg.num_heads);
  const auto hd = static_cast<std::size_t>(cfg.head_dim());
  const auto mlp = static_cast<std::size_t>(cfg.mlp_size());
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  // MLP sublayer; the residual passes dx through unchanged.
  Matrix dmid = dx;
  Vector dr(mlp), dm(h);
  for (std::size_t t = 0; t < seq; ++t) {
    const auto dout = dx.row(t);
    outer_add(g.w_down, dout, c.r.row(t));
    std::fill(dr.begin(), dr.end(), 0.0);
    matvec_transposed_add(lw.w_down, dout, dr);
    const auto ut = c.u.row(t);
    for (std::size_t i = 0; i < mlp; ++i)
      if (ut[i] <= 0.0) dr[i] = 0.0;
    outer_add(g.w_up, dr, c.m.row(t));
    std::fill(dm.begin(), dm.end(), 0.0);
    matvec_transposed_add(lw.w_up, dr, dm);
    layer_norm_backward(c.x_mid.row(t), c.ln2_mean[t], c.ln2_rstd[t],
                        lw.ln2_gamma, dm, g.ln2_gamma, g.ln2_beta, dmid.row(t));
  }

  // Attention sublayer.
  Matrix dctx(seq, h), dq(seq, h), dk(seq, h), dv(seq, h);
  for (std::size_t t = 0; t < seq; ++t) {
    outer_add(g.wo, dmid.row(t), c.ctx.row(t));
    matvec_transposed_add(lw.wo, dmid.row(t), dctx.row(t));
  }
  Vector dp(seq);
  for (std::size_t head = 0; head < heads; ++head) {
    const std::size_t off = head * hd;
    const Matrix& p = c.attn_probs[head];
    for (std::size_t t = 0; t < seq; ++t) {
      const auto dct = dctx.row(t).subspan(off, hd);
      double weighted = 0.0;
      for (std::size_t j = 0; j <= t; ++j) {
        dp[j] = dot(dct, c.v.row(j).subspan(off, hd));
        weighted += p(t, j) * dp[j];
        auto dvj = dv.row(j).subspan(off, hd);
        for (std::size_t d = 0; d < hd; ++d) dvj[d] += p(t, j) * dct[d];
      }
      const auto qt = c.q.row(t).subspan(off, hd);
      auto dqt = dq.row(t).subspan(off, hd);
      for (std::size_t j = 0; j <= t; ++j) {
        const double ds = p(t, j) * (dp[j] - weighted) * scale;
        if (ds == 0.0) continue;
        const auto kj = c.k.row(j).subspan(off, hd);
        auto dkj = dk.row(j).subspan(off, hd);
        for (std::size_t d = 0; d < hd; ++d) {
          dqt[d] += ds * kj[d];
          dkj[d] += ds * qt[d];
        }
      }
    }
  }

  dx = dmid;
  Vector da(h);
  for (std::size_t t = 0; t < seq; ++t) {
    const auto at = c.a.row(t);
    outer_add(g.wq, dq.row(t), at);
    outer_add(g.wk, dk.row(t), at);
    outer_add(g.wv, dv.row(t), at);
    std::fill(da.begin(), da.end(), 0.0);
    matvec_transposed_add(lw.wq, dq.row(t), da);
    matvec_transposed_add(lw.wk, dk.row(t), da);
    matvec_transposed_add(lw.wv, dv.row(t), da);
    layer_norm_backward(c.x_in.row(t), c.ln1_mean[t], c.ln1_rstd[t],
                        lw.ln1_gamma, da, g.ln1_gamma, g.ln1_beta, dx.row(t));
  }
}

}  // namespace detail

/// Cross-entropy of the final-layer prediction at the last position.
/// Accumulates dLoss/dweights into `grads` (same shape as the weights).
inline double loss_and_gradient(const Model& model, const Instance& inst,
                                ModelWeights& grads) {
  require(inst.gold.has_value(), "train: instance without target");
  const auto& cfg = model.config;
  const auto& w = model.weights;
  validate_tokens(cfg, inst.tokens);
  require(*inst.gold < static_cast<TokenId>(cfg.vocab_size),
          "train: target out of range");
  const std::size_t seq = inst.tokens.size();
  const auto h = static_cast<std::size_t>(cfg.hidden_size);

  Matrix x = embed(model, inst.tokens);
  std::vector<BlockCache> caches(w.layers.size());
  Matrix attn_out, mlp_out;
  for (std::size_t l = 0; l < w.layers.size(); ++l)
    block_forward(w.layers[l], cfg, x, attn_out, mlp_out, &caches[l]);

  const auto last = x.row(seq - 1);
  Vector normed(h);
  const auto [mean, rstd] = layer_norm(last, w.final_gamma, w.final_beta, normed);
  const Vector logits = lm_head(normed, w);
  Vector probs = softmax(logits);
  const double loss = -std::log(std::max(probs[*inst.gold], 1e-300));

  Vector& dlogits = probs;
  dlogits[*inst.gold] -= 1.0;
  outer_add(grads.head_weight, dlogits, normed);
  for (std::size_t i = 0; i < dlogits.size(); ++i) grads.head_bias[i] += dlogits[i];
  Vector dnormed(h, 0.0);
  matvec_transposed_add(w.head_weight, dlogits, dnormed);

  Matrix dx(seq, h);
  detail::layer_norm_backward(last, mean, rstd, w.final_gamma, dnormed,
                              grads.final_gamma, grads.final_beta,
                              dx.row(seq - 1));
  for (std::size_t l = w.layers.size(); l-- > 0;)
    detail::block_backward(w.layers[l], cfg, caches[l], dx, grads.layers[l]);

  for (std::size_t t = 0; t < seq; ++t) {
    auto te = grads.token_embedding.row(inst.tokens[t]);
    auto pe = grads.position_embedding.row(t);
    const auto d = dx.row(t);
    for (std::size_t i = 0; i < h; ++i) {
      te[i] += d[i];
      pe[i] += d[i];
    }
  }
  return loss;
}

inline double mean_loss(const Model& model, const std::vector<Instance>& data) {
  double total = 0.0;
  for (const auto& inst : data) {
    const Vector p = softmax(forward_dense(model, inst.tokens).logits);
    total += -std::log(std::max(p[*inst.gold], 1e-300));
  }
  return total / static_cast<double>(data.size());
}

inline double dense_accuracy(const Model& model,
                             const std::vector<Instance>& data) {
  std::size_t hits = 0;
  for (const auto& inst : data)
    if (inst.gold && forward_dense(model, inst.tokens).prediction == *inst.gold)
      ++hits;
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

/// Minibatch Adam on last-position cross-entropy. Minibatches walk a
/// per-epoch shuffle drawn from `hp.seed`. Zero steps returns `init` as is.
inline Model train_toy(const std::vector<Instance>& data, Model init,
                       const TrainHyperparams& hp,
                       TrainReport* report = nullptr) {
  require(!data.empty(), "train: empty dataset");
  require(hp.batch_size >= 1 && hp.steps >= 0, "train: bad hyperparameters");
  for (const auto& inst : data) {
    require(inst.gold.has_value(), "train: instance without target");
    require(*inst.gold < static_cast<TokenId>(init.config.vocab_size),
            "train: target out of range");
    validate_tokens(init.config, inst.tokens);
  }

  Model model = std::move(init);
  TrainReport local;
  local.initial_loss = mean_loss(model, data);

  ModelWeights m1 = zeros_like(model.config);
  ModelWeights m2 = zeros_like(model.config);
  auto params = parameter_spans(model.weights);
  auto first = parameter_spans(m1);
  auto second = parameter_spans(m2);

  Rng rng(hp.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();

  for (int step = 1; step <= hp.steps; ++step) {
    ModelWeights grads = zeros_like(model.config);
    double batch_loss = 0.0;
    for (int b = 0; b < hp.batch_size; ++b) {
      if (cursor == order.size()) {
        rng.shuffle(std::span<std::size_t>(order));
        cursor = 0;
      }
      try {
        batch_loss += loss_and_gradient(model, data[order[cursor++]], grads);
      } catch (const Error& e) {
        throw Error(ErrorCategory::kTrainingFailure,
                    "train: diverged at step " + std::to_string(step) + ": " + e.what());
      }
    }
    batch_loss /= hp.batch_size;
    if (!std::isfinite(batch_loss))
      throw Error(ErrorCategory::kTrainingFailure,
                  "train: loss became non-finite at step " + std::to_string(step));
    local.batch_losses.push_back(batch_loss);

    auto gspans = parameter_spans(grads);
    double sq = 0.0;
    for (auto gs : gspans)
      for (double& v : gs) {
        v /= hp.batch_size;
        sq += v * v;
      }
    const double gnorm = std::sqrt(sq);
    const double clip =
        (hp.clip_norm > 0.0 && gnorm > hp.clip_norm) ? hp.clip_norm / gnorm : 1.0;
    const double bc1 = 1.0 - std::pow(hp.beta1, step);
    const double bc2 = 1.0 - std::pow(hp.beta2, step);
    for (std::size_t s = 0; s < params.size(); ++s) {
      for (std::size_t i = 0; i < params[s].size(); ++i) {
        const double gi = gspans[s][i] * clip;
        first[s][i] = hp.beta1 * first[s][i] + (1.0 - hp.beta1) * gi;
        second[s][i] = hp.beta2 * second[s][i] + (1.0 - hp.beta2) * gi * gi;
        params[s][i] -= hp.learning_rate * (first[s][i] / bc1) /
                        (std::sqrt(second[s][i] / bc2) + hp.epsilon);
      }
    }
  }

  for (auto span : parameter_spans(model.weights))
    if (!all_finite(span))
      throw Error(ErrorCategory::kTrainingFailure, "train: non-finite weights");
  try {
    local.final_loss = mean_loss(model, data);
  } catch (const Error& e) {
    throw Error(ErrorCategory::kTrainingFailure, std::string("train: ") + e.what());
  }
  if (!std::isfinite(local.final_loss))
    throw Error(ErrorCategory::kTrainingFailure, "train: final loss non-finite");
  local.train_accuracy = dense_accuracy(model, data);
  if (report) *report = std::move(local);
  return model;
}

}  // namespace adainfer
