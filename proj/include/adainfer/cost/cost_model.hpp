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

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "adainfer/core/error.hpp"

namespace adainfer {

// Closed-form transformer FLOPs accounting.
//
// Values are doubles. Every quantity here is an integer polynomial in the
// parameters, so results are exact while they stay below 2^53 (about
// 9.0e15); a Llama2-7B-sized dense pass at s = 2048 is about 2.9e13.

struct CostParams {
  std::uint64_t batch = 1;       // B
  std::uint64_t seq_len = 1;     // s
  std::uint64_t hidden = 1;      // h
  std::uint64_t layers = 1;      // l
  std::uint64_t vocab = 1;       // V

  void validate() const {
    require(batch > 0 && seq_len > 0 && hidden > 0 && layers > 0 && vocab > 0,
            "cost: all parameters must be positive");
  }

  bool operator==(const CostParams&) const = default;
};

/// 24 B s h^2 + 4 B s^2 h
inline double block_flops(const CostParams& p) {
  p.validate();
  const double B = p.batch, s = p.seq_len, h = p.hidden;
  return 24.0 * B * s * h * h + 4.0 * B * s * s * h;
}

/// 2 B t h V, where t is the number of positions sent through the head.
inline double lm_head_flops(const CostParams& p, std::uint64_t tokens_probed) {
  p.validate();
  require(tokens_probed >= 1, "cost: tokens_probed must be >= 1");
  const double B = p.batch, t = tokens_probed, h = p.hidden, V = p.vocab;
  return 2.0 * B * t * h * V;
}

/// 4 B s h l (6h + s) + 2 B s h V
inline double total_dense_flops(const CostParams& p) {
  p.validate();
  const double B = p.batch, s = p.seq_len, h = p.hidden, l = p.layers,
               V = p.vocab;
  return 4.0 * B * s * h * l * (6.0 * h + s) + 2.0 * B * s * h * V;
}

/// Cost of running l' of l layers relative to the dense pass:
///   (2 l' (6h + s) + V) / (2 l (6h + s) + V)
inline double flops_ratio(double l_prime, const CostParams& p) {
  p.validate();
  require(l_prime > 0.0, "cost: l_prime must be positive");
  require(l_prime <= static_cast<double>(p.layers),
          "cost: l_prime exceeds layer count");
  const double s = p.seq_len, h = p.hidden, l = p.layers, V = p.vocab;
  return (2.0 * l_prime * (6.0 * h + s) + V) / (2.0 * l * (6.0 * h + s) + V);
}

/// Share of dense FLOPs spent on one last-token head probe per layer:
///   V l / (s (2 l (6h + s) + V))  ==  l * 2BhV / total_dense_flops.
inline double probe_overhead_fraction(const CostParams& p) {
  p.validate();
  const double s = p.seq_len, h = p.hidden, l = p.layers, V = p.vocab;
  return V * l / (s * (2.0 * l * (6.0 * h + s) + V));
}

/// (L - avg_layers) / L
inline double pruning_ratio(double avg_layers, int num_layers) {
  require(num_layers >= 1, "cost: num_layers must be >= 1");
  require(avg_layers > 0.0 && avg_layers <= num_layers,
          "cost: avg_layers must lie in (0, L]");
  return (num_layers - avg_layers) / num_layers;
}

/// Blocks 1..k plus one single-token head probe after each of them.
/// Decider cost is taken as zero.
inline double adaptive_flops(double exit_layer, const CostParams& p) {
  require(exit_layer > 0.0 && exit_layer <= static_cast<double>(p.layers),
          "cost: exit layer must lie in (0, l]");
  return exit_layer * (block_flops(p) + lm_head_flops(p, 1));
}

struct CostReport {
  double block_flops = 0.0;
  double lm_head_flops = 0.0;
  double total_dense_flops = 0.0;
  double adaptive_flops = 0.0;
  double flops_ratio = 0.0;
  double probe_overhead_fraction = 0.0;
  double pruning_ratio = 0.0;
};

inline CostReport cost_report(const CostParams& p, double avg_exit_layer) {
  CostReport r;
  r.block_flops = block_flops(p);
  r.lm_head_flops = lm_head_flops(p, p.seq_len);
  r.total_dense_flops = total_dense_flops(p);
  r.adaptive_flops = adaptive_flops(avg_exit_layer, p);
  r.flops_ratio = flops_ratio(avg_exit_layer, p);
  r.probe_overhead_fraction = probe_overhead_fraction(p);
  r.pruning_ratio = pruning_ratio(avg_exit_layer, static_cast<int>(p.layers));
  return r;
}

struct ClassifierCostProfile {
  std::string kind;
  std::uint64_t N = 1;  // training examples
  std::uint64_t d = 1;  // feature dimension
  std::uint64_t S = 1;  // average chain length
  std::uint64_t M = 2;  // label count
  std::string train_complexity;
  std::string predict_complexity;
};

/// Symbolic complexity for the statistical deciders.
inline ClassifierCostProfile classifier_cost_profile(const std::string& kind,
                                                     std::uint64_t N, std::uint64_t d,
                                                     std::uint64_t S, std::uint64_t M = 2) {
  require(N > 0 && d > 0 && S > 0 && M > 0, "cost: profile sizes must be positive");
  ClassifierCostProfile p{kind, N, d, S, M, "", ""};
  if (kind == "svm") {
    p.train_complexity = "O(N^2 x d) .. O(N^3 x d)";
    p.predict_complexity = "O(d)";
  } else if (kind == "crf") {
    p.train_complexity = "O(N x S x M)";
    p.predict_complexity = "O(S x M)";
  } else if (kind == "gap_rule") {
    p.train_complexity = "none";
    p.predict_complexity = "O(1)";
  } else {
    throw_invalid("cost: unknown classifier kind " + kind);
  }
  return p;
}

inline nlohmann::json cost_params_to_json(const CostParams& p) {
  return {{"B", p.batch}, {"s", p.seq_len}, {"h", p.hidden}, {"l", p.layers}, {"V", p.vocab}};
}

inline CostParams cost_params_from_json(const nlohmann::json& j, CostParams base = {}) {
  base.batch = j.value("B", base.batch);
  base.seq_len = j.value("s", base.seq_len);
  base.hidden = j.value("h", base.hidden);
  base.layers = j.value("l", base.layers);
  base.vocab = j.value("V", base.vocab);
  base.validate();
  return base;
}

inline nlohmann::json cost_report_to_json(const CostReport& r) {
  return {{"block_flops", r.block_flops},
          {"lm_head_flops", r.lm_head_flops},
          {"total_dense_flops", r.total_dense_flops},
          {"adaptive_flops", r.adaptive_flops},
          {"flops_ratio", r.flops_ratio},
          {"probe_overhead_fraction", r.probe_overhead_fraction},
          {"pruning_ratio", r.pruning_ratio}};
}

inline nlohmann::json classifier_profile_to_json(const ClassifierCostProfile& p) {
  return {{"kind", p.kind}, {"N", p.N}, {"d", p.d}, {"S", p.S}, {"M", p.M},
          {"train", p.train_complexity}, {"predict", p.predict_complexity}};
}

}  // namespace adainfer
