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

#include <chrono>
#include <span>
#include <string>
#include <vector>

#include "adainfer/classifiers/decider.hpp"
#include "adainfer/core/error.hpp"
#include "adainfer/cost/cost_model.hpp"
#include "adainfer/features/features.hpp"
#include "adainfer/features/labels.hpp"
#include "adainfer/features/trace.hpp"
#include "adainfer/model/forward.hpp"

namespace adainfer {

struct ExitPolicy {
  ExitDecider decider = AlwaysDense{};
  int min_exit_layer = 1;
  FeatureOptions features;
};

struct InferenceOutcome {
  TokenId predicted_token = 0;
  int exit_layer = 0;
  std::vector<FeatureVector> features_used;  // layers 1..exit_layer
  Vector logits;                             // probe at exit_layer
  int layers_evaluated = 0;                  // blocks actually run
  double flops_estimate = 0.0;
  double wall_time = 0.0;  // seconds
};

/// Single-instance cost parameters for a model and prompt length.
inline CostParams model_cost_params(const ModelConfig& cfg, std::size_t seq_len) {
  return {1, seq_len, static_cast<std::uint64_t>(cfg.hidden_size),
          static_cast<std::uint64_t>(cfg.num_layers),
          static_cast<std::uint64_t>(cfg.vocab_size)};
}

/// The early-exit loop with an arbitrary decision callable
/// `bool(std::span<const FeatureVector> prefix)`. Blocks run strictly in
/// order; the decider is consulted from `min_exit_layer` on and a positive
/// decision stops the pass before any further block is evaluated.
template <class Decide>
InferenceOutcome adainfer_forward_with(const Model& model,
                                       std::span<const TokenId> tokens,
                                       Decide&& decide, int min_exit_layer,
                                       const FeatureOptions& options = {}) {
  const int num_layers = model.config.num_layers;
  require(min_exit_layer >= 1 && min_exit_layer <= num_layers,
          "adainfer: min_exit_layer must lie in [1, L]");
  const auto t0 = std::chrono::steady_clock::now();
  ForwardPass pass(model, tokens);
  InferenceOutcome out;
  out.features_used.reserve(static_cast<std::size_t>(num_layers));
  // Probe buffers are reused across layers; the previous layer's
  // last-token state is kept for the cosine features.
  Vector scratch, logits, probs(static_cast<std::size_t>(model.config.vocab_size));
  Vector prev_hidden, prev_attn, prev_mlp;
  while (true) {
    pass.advance();
    const int layer = pass.layers_evaluated();
    probe_logits_into(model, pass.hidden_last(), layer, scratch, logits);
    softmax_into(logits, probs);
    const LayerView current{layer, probs, pass.hidden_last(), pass.attn_last(), pass.mlp_last()};
    const LayerView previous{layer - 1, {}, prev_hidden, prev_attn, prev_mlp};
    out.features_used.push_back(extract_features(
        current, layer > 1 ? &previous : nullptr, options, pass.embedding_last()));
    bool stop = layer == num_layers;
    if (!stop && layer >= min_exit_layer) {
      try {
        stop = decide(std::span<const FeatureVector>(out.features_used));
      } catch (const Error& e) {
        throw Error(e.category(),
                    "adainfer: decider failed at layer " + std::to_string(layer) +
                        ": " + e.what());
      }
    }
    if (stop) {
      out.exit_layer = layer;
      out.predicted_token = static_cast<TokenId>(argmax(probs));
      out.logits = std::move(logits);
      break;
    }
    prev_hidden.assign(current.hidden_last.begin(), current.hidden_last.end());
    prev_attn.assign(current.attn_last.begin(), current.attn_last.end());
    prev_mlp.assign(current.mlp_last.begin(), current.mlp_last.end());
  }
  out.layers_evaluated = pass.layers_evaluated();
  out.flops_estimate = adaptive_flops(out.exit_layer,
                                      model_cost_params(model.config, tokens.size()));
  out.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

/// FinalLayerAgreement labels of one instance from its dense probe pass.
inline std::vector<int> oracle_labels(const Model& model,
                                      std::span<const TokenId> tokens) {
  std::vector<TokenId> argmaxes;
  for (const auto& s : forward_instrumented(model, tokens))
    argmaxes.push_back(static_cast<TokenId>(s.prediction()));
  return labels_from_argmax(argmaxes, ReferenceMode::kFinalLayerAgreement, std::nullopt);
}

inline InferenceOutcome adainfer_forward(const Model& model,
                                         std::span<const TokenId> tokens,
                                         const ExitPolicy& policy) {
  if (std::holds_alternative<OracleLabels>(policy.decider)) {
    const auto labels = oracle_labels(model, tokens);
    return adainfer_forward_with(
        model, tokens,
        [&](std::span<const FeatureVector> prefix) {
          return labels[prefix.size() - 1] == 1;
        },
        policy.min_exit_layer, policy.features);
  }
  return adainfer_forward_with(
      model, tokens,
      [&](std::span<const FeatureVector> prefix) { return decide(policy.decider, prefix); },
      policy.min_exit_layer, policy.features);
}

struct TruncatedResult {
  TokenId prediction = 0;
  int layers_used = 0;
};

/// Static baseline: run the first `keep_layers` blocks and predict from
/// that layer's probe.
inline TruncatedResult truncated_forward(const Model& model,
                                         std::span<const TokenId> tokens,
                                         int keep_layers) {
  require(keep_layers >= 1 && keep_layers <= model.config.num_layers,
          "truncated: keep_layers must lie in [1, L]");
  ForwardPass pass(model, tokens);
  for (int k = 0; k < keep_layers; ++k) pass.advance();
  return {static_cast<TokenId>(argmax(softmax(pass.logits()))),
          pass.layers_evaluated()};
}

struct ReplayOutcome {
  int exit_layer = 0;
  TokenId predicted_token = 0;
};

/// The same exit loop driven by a recorded trace instead of a model.
inline ReplayOutcome replay_trace(const TraceRecord& trace, const ExitPolicy& policy) {
  const int num_layers = trace.num_layers;
  require(num_layers >= 1 && trace.argmax.size() == static_cast<std::size_t>(num_layers),
          "replay: malformed trace");
  require(policy.min_exit_layer >= 1 && policy.min_exit_layer <= num_layers,
          "replay: min_exit_layer must lie in [1, L]");
  const auto features = trace_features(trace);
  std::vector<int> labels;
  const bool oracle = std::holds_alternative<OracleLabels>(policy.decider);
  if (oracle)
    labels = labels_from_argmax(trace.argmax, ReferenceMode::kFinalLayerAgreement,
                                std::nullopt);
  int exit_layer = num_layers;
  for (int layer = policy.min_exit_layer; layer < num_layers; ++layer) {
    const auto prefix = std::span<const FeatureVector>(features).first(
        static_cast<std::size_t>(layer));
    const bool stop = oracle ? labels[static_cast<std::size_t>(layer - 1)] == 1
                             : decide(policy.decider, prefix);
    if (stop) {
      exit_layer = layer;
      break;
    }
  }
  return {exit_layer, trace.argmax[static_cast<std::size_t>(exit_layer - 1)]};
}

}  // namespace adainfer
