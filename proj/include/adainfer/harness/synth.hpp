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

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "adainfer/core/error.hpp"
#include "adainfer/core/rng.hpp"
#include "adainfer/features/trace.hpp"

namespace adainfer {

/// Instances drawn from a band first agree with the final layer at a layer
/// uniform in [min_layer, max_layer].
struct DifficultyBand {
  std::string tag;
  double weight = 1.0;
  int min_layer = 1;
  int max_layer = 1;
};

struct SynthTaskSpec {
  std::string name = "synthetic";
  int num_layers = 16;
  int vocab_size = 32;
  std::size_t instances = 100;
  std::uint64_t seed = 0;
  std::vector<DifficultyBand> profile;
  double dense_accuracy = 0.9;  // P(gold == final prediction)

  void validate() const {
    require(instances >= 1, "synth: instance count must be >= 1");
    require(num_layers >= 1, "synth: num_layers must be >= 1");
    require(vocab_size >= 3, "synth: vocab_size must be >= 3");
    require(!profile.empty(), "synth: empty difficulty profile");
    require(dense_accuracy >= 0.0 && dense_accuracy <= 1.0,
            "synth: dense_accuracy must lie in [0, 1]");
    for (const auto& b : profile)
      require(b.weight > 0.0 && b.min_layer >= 1 && b.min_layer <= b.max_layer &&
                  b.max_layer <= num_layers,
              "synth: bad difficulty band '" + b.tag + "'");
  }
};

/// Half easy (agreement in the first quarter), half hard (last quarter).
inline SynthTaskSpec mixed_spec(int num_layers, std::size_t instances,
                                std::uint64_t seed) {
  SynthTaskSpec s;
  s.name = "mixed";
  s.num_layers = num_layers;
  s.instances = instances;
  s.seed = seed;
  const int q = std::max(1, num_layers / 4);
  s.profile = {{"easy", 1.0, 1, q}, {"hard", 1.0, num_layers - q + 1, num_layers}};
  return s;
}

namespace detail {

inline TokenId draw_other(Rng& rng, int vocab, TokenId a, TokenId b) {
  while (true) {
    const auto t = static_cast<TokenId>(rng.uniform_int(static_cast<std::uint64_t>(vocab)));
    if (t != a && t != b) return t;
  }
}

inline void push_probs(TraceRecord& r, Rng& rng, double gap) {
  gap = std::clamp(gap, 0.0, 1.0);
  const double second = rng.uniform(0.0, (1.0 - gap) / 2.0);
  r.gap.push_back(gap);
  r.top_prob.push_back(gap + second);
}

}  // namespace detail

/// Deterministic synthetic traces. Before its agreement layer an instance's
/// argmax is a distractor token (never the final or gold token) with gap in
/// [0, 0.34]; from the agreement layer on it predicts the final token and
/// gap ramps from about 0.42 toward 0.92, never below 0.36. Cosines of the
/// hidden state rise after agreement; attn/mlp cosines are noise.
inline std::vector<TraceRecord> synth_traces(const SynthTaskSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  double total_weight = 0.0;
  for (const auto& b : spec.profile) total_weight += b.weight;
  const int L = spec.num_layers;
  std::vector<TraceRecord> out;
  out.reserve(spec.instances);
  for (std::size_t i = 0; i < spec.instances; ++i) {
    double pick = rng.uniform() * total_weight;
    const DifficultyBand* band = &spec.profile.back();
    for (const auto& b : spec.profile) {
      if (pick < b.weight) {
        band = &b;
        break;
      }
      pick -= b.weight;
    }
    const int agree = band->min_layer +
                      static_cast<int>(rng.uniform_int(
                          static_cast<std::uint64_t>(band->max_layer - band->min_layer + 1)));
    const auto final_token =
        static_cast<TokenId>(rng.uniform_int(static_cast<std::uint64_t>(spec.vocab_size)));
    TokenId gold = final_token;
    if (!rng.bernoulli(spec.dense_accuracy))
      gold = detail::draw_other(rng, spec.vocab_size, final_token, final_token);

    TraceRecord r;
    r.instance_id = spec.name + "-" + std::to_string(i);
    r.task_tag = band->tag.empty() ? spec.name : band->tag;
    r.num_layers = L;
    for (int k = 1; k <= L; ++k) {
      if (k < agree) {
        const double drift = 0.1 * k / agree;
        detail::push_probs(r, rng, std::min(0.34, std::abs(rng.normal(0.12 + drift, 0.07))));
        r.argmax.push_back(detail::draw_other(rng, spec.vocab_size, final_token, gold));
      } else {
        const double progress = static_cast<double>(k - agree + 1) / (L - agree + 1);
        detail::push_probs(r, rng,
                           std::clamp(0.42 + 0.5 * progress + rng.normal(0.0, 0.04), 0.36, 1.0));
        r.argmax.push_back(final_token);
      }
      if (k == 1) {
        r.cos_attn.push_back(1.0);
        r.cos_mlp.push_back(1.0);
        r.cos_hidden.push_back(1.0);
      } else {
        r.cos_attn.push_back(std::clamp(rng.normal(0.3, 0.2), -1.0, 1.0));
        r.cos_mlp.push_back(std::clamp(rng.normal(0.3, 0.2), -1.0, 1.0));
        r.cos_hidden.push_back(
            std::clamp(rng.normal(k < agree ? 0.6 : 0.92, 0.05), -1.0, 1.0));
      }
    }
    r.final_prediction = final_token;
    r.gold_target = gold;
    out.push_back(std::move(r));
  }
  return out;
}

inline TraceFile synth_trace_file(const SynthTaskSpec& spec) {
  return {{spec.num_layers, spec.vocab_size, "synthetic:" + spec.name}, synth_traces(spec)};
}

}  // namespace adainfer
