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
#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adainfer/core/error.hpp"
#include "adainfer/core/linalg.hpp"
#include "adainfer/model/forward.hpp"

namespace adainfer {

/// Classifier input for one layer.
struct FeatureVector {
  int layer_index = 0;
  double gap = 0.0;       // P(top) - P(second)
  double top_prob = 0.0;  // P(top)
  double cos_attn = 1.0;
  double cos_mlp = 1.0;
  double cos_hidden = 1.0;

  bool operator==(const FeatureVector&) const = default;
};

enum class FeatureName { kGap, kTopProb, kCosAttn, kCosMlp, kCosHidden };

inline constexpr std::array<FeatureName, 5> kAllFeatures = {
    FeatureName::kGap, FeatureName::kTopProb, FeatureName::kCosAttn,
    FeatureName::kCosMlp, FeatureName::kCosHidden};

/// Default classifier input: the two logit-derived confidence features.
inline const std::vector<FeatureName>& base_features() {
  static const std::vector<FeatureName> kBase = {FeatureName::kGap,
                                                 FeatureName::kTopProb};
  return kBase;
}

inline std::string_view feature_name(FeatureName f) {
  switch (f) {
    case FeatureName::kGap: return "gap";
    case FeatureName::kTopProb: return "top_prob";
    case FeatureName::kCosAttn: return "cos_attn";
    case FeatureName::kCosMlp: return "cos_mlp";
    case FeatureName::kCosHidden: return "cos_hidden";
  }
  return "";
}

inline FeatureName feature_from_name(std::string_view name) {
  for (FeatureName f : kAllFeatures)
    if (feature_name(f) == name) return f;
  throw_invalid("unknown feature: " + std::string(name));
}

inline double feature_value(const FeatureVector& fv, FeatureName f) {
  switch (f) {
    case FeatureName::kGap: return fv.gap;
    case FeatureName::kTopProb: return fv.top_prob;
    case FeatureName::kCosAttn: return fv.cos_attn;
    case FeatureName::kCosMlp: return fv.cos_mlp;
    case FeatureName::kCosHidden: return fv.cos_hidden;
  }
  return 0.0;
}

inline Vector select_features(const FeatureVector& fv,
                              std::span<const FeatureName> mask) {
  Vector out;
  out.reserve(mask.size());
  for (FeatureName f : mask) out.push_back(feature_value(fv, f));
  return out;
}

/// Cosine similarity clamped to [-1, 1]. Two zero vectors count as
/// identical (1.0); one zero vector against a non-zero one gives 0.0.
inline double cosine(std::span<const double> u, std::span<const double> v) {
  require(u.size() == v.size(), "cosine: length mismatch");
  const double nu = norm2(u);
  const double nv = norm2(v);
  if (nu == 0.0 && nv == 0.0) return 1.0;
  if (nu == 0.0 || nv == 0.0) return 0.0;
  return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

struct TopTwo {
  std::size_t top_index = 0;
  double top = 0.0;
  double second = 0.0;
};

/// Largest and second-largest probabilities (lowest index wins ties).
inline TopTwo top_two(std::span<const double> probs) {
  require(probs.size() >= 2, "features: vocabulary must have >= 2 entries");
  TopTwo t;
  t.top_index = argmax(probs);
  t.top = probs[t.top_index];
  bool have_second = false;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (i == t.top_index) continue;
    if (!have_second || probs[i] > t.second) {
      t.second = probs[i];
      have_second = true;
    }
  }
  return t;
}

/// What layer 1 is compared against for the cosine features.
enum class Layer1Reference {
  kSentinel,   // all three cosines are 1.0
  kEmbedding,  // cos_hidden against the embedding output, others 1.0
};

struct FeatureOptions {
  Layer1Reference layer1 = Layer1Reference::kSentinel;
};

/// Last-token state of one layer, as read by the feature extractor.
struct LayerView {
  int layer_index = 0;
  std::span<const double> probs;
  std::span<const double> hidden_last;
  std::span<const double> attn_last;
  std::span<const double> mlp_last;
};

inline LayerView layer_view(const BlockSnapshot& s) {
  return {s.layer_index, s.probs, s.hidden_last, s.attn_last, s.mlp_last};
}

/// `previous` is null only for layer 1 (its probs are not read).
/// `embedding_last` is consulted only in kEmbedding mode.
inline FeatureVector extract_features(const LayerView& current, const LayerView* previous,
                                      const FeatureOptions& options = {},
                                      std::span<const double> embedding_last = {}) {
  require(current.probs.size() >= 2,
          "features: vocabulary must have >= 2 entries");
  require(previous != nullptr || current.layer_index == 1,
          "features: previous snapshot required after layer 1");
  const TopTwo t = top_two(current.probs);
  FeatureVector fv;
  fv.layer_index = current.layer_index;
  fv.top_prob = t.top;
  fv.gap = t.top - t.second;
  if (previous) {
    fv.cos_attn = cosine(current.attn_last, previous->attn_last);
    fv.cos_mlp = cosine(current.mlp_last, previous->mlp_last);
    fv.cos_hidden = cosine(current.hidden_last, previous->hidden_last);
  } else if (options.layer1 == Layer1Reference::kEmbedding) {
    require(embedding_last.size() == current.hidden_last.size(),
            "features: embedding reference has wrong length");
    fv.cos_hidden = cosine(current.hidden_last, embedding_last);
  }
  return fv;
}

inline FeatureVector extract_features(const BlockSnapshot& current,
                                      const BlockSnapshot* previous,
                                      const FeatureOptions& options = {},
                                      std::span<const double> embedding_last = {}) {
  if (!previous) return extract_features(layer_view(current), nullptr, options, embedding_last);
  const LayerView prev = layer_view(*previous);
  return extract_features(layer_view(current), &prev, options, embedding_last);
}

/// Features for a full snapshot sequence (layer order).
inline std::vector<FeatureVector> extract_all(
    std::span<const BlockSnapshot> snapshots, const FeatureOptions& options = {},
    std::span<const double> embedding_last = {}) {
  std::vector<FeatureVector> out;
  out.reserve(snapshots.size());
  for (std::size_t k = 0; k < snapshots.size(); ++k)
    out.push_back(extract_features(snapshots[k], k ? &snapshots[k - 1] : nullptr,
                                   options, embedding_last));
  return out;
}

}  // namespace adainfer
