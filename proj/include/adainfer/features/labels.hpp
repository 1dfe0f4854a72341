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

#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "adainfer/core/error.hpp"
#include "adainfer/features/features.hpp"
#include "adainfer/features/trace.hpp"
#include "adainfer/model/corpus.hpp"
#include "adainfer/model/forward.hpp"

namespace adainfer {

/// Which token a layer's argmax must match to earn label 1.
enum class ReferenceMode {
  kFinalLayerAgreement,  // the last layer's argmax
  kGoldAnswer,           // the instance's gold target
};

inline std::string_view reference_mode_name(ReferenceMode m) {
  return m == ReferenceMode::kFinalLayerAgreement ? "final_layer_agreement"
                                                  : "gold_answer";
}

inline ReferenceMode reference_mode_from_name(std::string_view name) {
  if (name == "final_layer_agreement" || name == "final")
    return ReferenceMode::kFinalLayerAgreement;
  if (name == "gold_answer" || name == "gold") return ReferenceMode::kGoldAnswer;
  throw_invalid("unknown reference mode: " + std::string(name));
}

struct LabeledExample {
  std::string instance_id;
  FeatureVector features;
  int label = 0;

  bool operator==(const LabeledExample&) const = default;
};

/// Per-layer labels from the per-layer argmax tokens.
inline std::vector<int> labels_from_argmax(std::span<const TokenId> argmaxes,
                                           ReferenceMode mode,
                                           std::optional<TokenId> gold) {
  require(!argmaxes.empty(), "labels: empty layer sequence");
  require(mode != ReferenceMode::kGoldAnswer || gold.has_value(),
          "labels: gold answer required in gold_answer mode");
  const TokenId reference =
      mode == ReferenceMode::kFinalLayerAgreement ? argmaxes.back() : *gold;
  std::vector<int> out;
  out.reserve(argmaxes.size());
  for (TokenId t : argmaxes) out.push_back(t == reference ? 1 : 0);
  return out;
}

inline std::vector<LabeledExample> build_labels(
    std::span<const BlockSnapshot> snapshots, ReferenceMode mode,
    std::optional<TokenId> gold, const FeatureOptions& options = {},
    std::span<const double> embedding_last = {}, const std::string& instance_id = "") {
  require(!snapshots.empty(), "labels: no snapshots");
  std::vector<TokenId> argmaxes;
  for (const auto& s : snapshots) argmaxes.push_back(static_cast<TokenId>(s.prediction()));
  const auto labels = labels_from_argmax(argmaxes, mode, gold);
  const auto features = extract_all(snapshots, options, embedding_last);
  std::vector<LabeledExample> out;
  for (std::size_t k = 0; k < snapshots.size(); ++k)
    out.push_back({instance_id, features[k], labels[k]});
  return out;
}

inline std::vector<LabeledExample> build_labels(const TraceRecord& trace,
                                                ReferenceMode mode) {
  const auto labels = labels_from_argmax(trace.argmax, mode, trace.gold_target);
  const auto features = trace_features(trace);
  std::vector<LabeledExample> out;
  for (std::size_t k = 0; k < features.size(); ++k)
    out.push_back({trace.instance_id, features[k], labels[k]});
  return out;
}

/// |corpus| x L examples, instance-major then layer order.
inline std::vector<LabeledExample> build_dataset(
    const std::vector<Instance>& corpus, const Model& model, ReferenceMode mode,
    const FeatureOptions& options = {}) {
  require(!corpus.empty(), "dataset: empty corpus");
  std::vector<LabeledExample> out;
  out.reserve(corpus.size() * static_cast<std::size_t>(model.config.num_layers));
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    ForwardPass pass(model, corpus[i].tokens);
    std::vector<BlockSnapshot> snaps;
    while (!pass.finished()) snaps.push_back(pass.step());
    auto ex = build_labels(snaps, mode, corpus[i].gold, options,
                           pass.embedding_last(), std::to_string(i));
    out.insert(out.end(), ex.begin(), ex.end());
  }
  return out;
}

inline std::vector<LabeledExample> build_dataset(
    const std::vector<TraceRecord>& traces, ReferenceMode mode) {
  require(!traces.empty(), "dataset: empty trace set");
  std::vector<LabeledExample> out;
  for (const auto& t : traces) {
    auto ex = build_labels(t, mode);
    out.insert(out.end(), ex.begin(), ex.end());
  }
  return out;
}

/// Splits an instance-major example list into per-instance layer sequences
/// (consecutive runs sharing an instance_id).
inline std::vector<std::vector<LabeledExample>> group_sequences(
    std::span<const LabeledExample> examples) {
  std::vector<std::vector<LabeledExample>> out;
  for (const auto& ex : examples) {
    if (out.empty() || out.back().front().instance_id != ex.instance_id ||
        ex.features.layer_index <= out.back().back().features.layer_index)
      out.emplace_back();
    out.back().push_back(ex);
  }
  return out;
}

// Labeled dataset JSONL: one example per line.

inline nlohmann::json example_to_json(const LabeledExample& e) {
  const auto& f = e.features;
  return {{"instance_id", e.instance_id}, {"layer", f.layer_index},
          {"gap", f.gap},                 {"top_prob", f.top_prob},
          {"cos_attn", f.cos_attn},       {"cos_mlp", f.cos_mlp},
          {"cos_hidden", f.cos_hidden},   {"label", e.label}};
}

inline LabeledExample example_from_json(const nlohmann::json& j) {
  try {
    LabeledExample e;
    e.instance_id = j.at("instance_id").get<std::string>();
    e.features.layer_index = j.at("layer").get<int>();
    e.features.gap = j.at("gap").get<double>();
    e.features.top_prob = j.at("top_prob").get<double>();
    e.features.cos_attn = j.at("cos_attn").get<double>();
    e.features.cos_mlp = j.at("cos_mlp").get<double>();
    e.features.cos_hidden = j.at("cos_hidden").get<double>();
    e.label = j.at("label").get<int>();
    if (e.label != 0 && e.label != 1)
      throw Error(ErrorCategory::kParse, "dataset: label must be 0 or 1");
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCategory::kParse, std::string("dataset: ") + ex.what());
  }
}

inline void write_dataset(const std::string& path,
                          std::span<const LabeledExample> examples) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCategory::kIo, "cannot write " + path);
  for (const auto& e : examples) out << example_to_json(e).dump() << '\n';
}

inline std::vector<LabeledExample> read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::kIo, "cannot read " + path);
  std::vector<LabeledExample> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(example_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCategory::kParse, std::string("dataset: ") + e.what());
    }
  }
  return out;
}

}  // namespace adainfer
