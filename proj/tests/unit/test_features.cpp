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

#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "adainfer/features/features.hpp"
#include "adainfer/features/labels.hpp"
#include "adainfer/features/trajectory.hpp"
#include "adainfer/model/corpus.hpp"
#include "test_util.hpp"

namespace adainfer {
namespace {

using testing::category_of;
using testing::random_model;

BlockSnapshot snapshot(int layer, Vector probs, Vector hidden = {1.0, 0.0}) {
  BlockSnapshot s;
  s.layer_index = layer;
  s.probs = std::move(probs);
  s.logits.resize(s.probs.size());
  for (std::size_t i = 0; i < s.probs.size(); ++i) s.logits[i] = std::log(s.probs[i] + 1e-300);
  s.hidden_last = hidden;
  s.attn_last = hidden;
  s.mlp_last = hidden;
  return s;
}

Vector one_hot(std::size_t v, std::size_t i) {
  Vector p(v, 0.0);
  p[i] = 1.0;
  return p;
}

TEST(Cosine, IdentityAntipodalAndDiagonal) {
  const Vector u{0.3, -1.2, 2.0};
  const Vector neg{-0.3, 1.2, -2.0};
  EXPECT_DOUBLE_EQ(cosine(u, u), 1.0);
  EXPECT_DOUBLE_EQ(cosine(u, neg), -1.0);
  EXPECT_NEAR(cosine(Vector{1.0, 0.0}, Vector{1.0, 1.0}), 1.0 / std::sqrt(2.0), 1e-15);
}

TEST(Cosine, ZeroVectorConventions) {
  EXPECT_DOUBLE_EQ(cosine(Vector{0.0, 0.0}, Vector{0.0, 0.0}), 1.0);
  EXPECT_DOUBLE_EQ(cosine(Vector{0.0, 0.0}, Vector{1.0, 2.0}), 0.0);
  EXPECT_EQ(category_of([] { cosine(Vector{1.0}, Vector{1.0, 2.0}); }),
            ErrorCategory::kInvalidInput);
}

TEST(Cosine, BoundedAndSymmetric) {
  Rng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    Vector u(1 + rng.uniform_int(8)), v(u.size());
    for (auto& x : u) x = rng.normal();
    for (auto& x : v) x = rng.normal();
    const double c = cosine(u, v);
    EXPECT_GE(c, -1.0);
    EXPECT_LE(c, 1.0);
    EXPECT_DOUBLE_EQ(c, cosine(v, u));
  }
}

TEST(ExtractFeatures, OneHotIsMaximallyConfident) {
  const auto fv = extract_features(snapshot(1, one_hot(5, 3)), nullptr);
  EXPECT_DOUBLE_EQ(fv.gap, 1.0);
  EXPECT_DOUBLE_EQ(fv.top_prob, 1.0);
}

TEST(ExtractFeatures, UniformHasZeroGap) {
  const auto fv = extract_features(snapshot(1, Vector(4, 0.25)), nullptr);
  EXPECT_DOUBLE_EQ(fv.gap, 0.0);
  EXPECT_DOUBLE_EQ(fv.top_prob, 0.25);
}

TEST(ExtractFeatures, DirectFromDefinition) {
  const auto fv = extract_features(snapshot(1, {0.2, 0.5, 0.3}), nullptr);
  EXPECT_NEAR(fv.gap, 0.2, 1e-15);
  EXPECT_DOUBLE_EQ(fv.top_prob, 0.5);
}

TEST(ExtractFeatures, RequiresTwoTokenVocabulary) {
  EXPECT_EQ(category_of([] { extract_features(snapshot(1, {1.0}), nullptr); }),
            ErrorCategory::kInvalidInput);
}

TEST(ExtractFeatures, RequiresPreviousAfterLayerOne) {
  EXPECT_EQ(category_of([] { extract_features(snapshot(2, {0.5, 0.5}), nullptr); }),
            ErrorCategory::kInvalidInput);
}

TEST(ExtractFeatures, LayerOneSentinel) {
  const auto fv = extract_features(snapshot(1, {0.5, 0.5}, {3.0, -1.0}), nullptr);
  EXPECT_EQ(fv.cos_attn, 1.0);
  EXPECT_EQ(fv.cos_mlp, 1.0);
  EXPECT_EQ(fv.cos_hidden, 1.0);
}

TEST(ExtractFeatures, LayerOneEmbeddingReference) {
  FeatureOptions opts;
  opts.layer1 = Layer1Reference::kEmbedding;
  const Vector emb{1.0, 1.0};
  const auto fv = extract_features(snapshot(1, {0.5, 0.5}, {1.0, 0.0}), nullptr, opts, emb);
  EXPECT_NEAR(fv.cos_hidden, 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_EQ(fv.cos_attn, 1.0);
  EXPECT_EQ(fv.cos_mlp, 1.0);
}

TEST(ExtractFeatures, CosinesAgainstPreviousBlock) {
  const auto a = snapshot(1, {0.6, 0.4}, {1.0, 0.0});
  const auto b = snapshot(2, {0.6, 0.4}, {0.0, 2.0});
  const auto fv = extract_features(b, &a);
  EXPECT_EQ(fv.layer_index, 2);
  EXPECT_NEAR(fv.cos_hidden, 0.0, 1e-15);
  EXPECT_NEAR(fv.cos_attn, 0.0, 1e-15);
}

TEST(ExtractFeatures, InvariantsOnRealSnapshots) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Model m = random_model(seed);
    Rng rng(seed);
    const auto tokens = testing::random_tokens(rng, m.config);
    const auto snaps = forward_instrumented(m, tokens);
    const auto fvs = extract_all(snaps);
    for (std::size_t k = 0; k < fvs.size(); ++k) {
      const auto& f = fvs[k];
      const auto t = top_two(snaps[k].probs);
      EXPECT_GE(f.gap, 0.0);
      EXPECT_LE(f.gap, f.top_prob);
      EXPECT_LE(f.top_prob, 1.0);
      EXPECT_DOUBLE_EQ(f.gap + t.second, f.top_prob);
      for (double c : {f.cos_attn, f.cos_mlp, f.cos_hidden}) {
        EXPECT_GE(c, -1.0);
        EXPECT_LE(c, 1.0);
      }
    }
  }
}

TEST(FeatureNames, RoundTrip) {
  for (FeatureName f : kAllFeatures) EXPECT_EQ(feature_from_name(feature_name(f)), f);
  EXPECT_EQ(category_of([] { feature_from_name("entropy"); }), ErrorCategory::kInvalidInput);
  FeatureVector fv;
  fv.gap = 0.1;
  fv.top_prob = 0.2;
  EXPECT_EQ(select_features(fv, base_features()), (Vector{0.1, 0.2}));
}

std::vector<BlockSnapshot> snapshots_with_argmax(const std::vector<std::size_t>& argmaxes) {
  std::vector<BlockSnapshot> out;
  for (std::size_t k = 0; k < argmaxes.size(); ++k) {
    Vector p(10, 0.05);
    p[argmaxes[k]] = 0.55;
    out.push_back(snapshot(static_cast<int>(k) + 1, p));
  }
  return out;
}

std::vector<int> labels_of(const std::vector<LabeledExample>& ex) {
  std::vector<int> out;
  for (const auto& e : ex) out.push_back(e.label);
  return out;
}

TEST(BuildLabels, FinalLayerAgreement) {
  const auto snaps = snapshots_with_argmax({5, 7, 7, 7});
  const auto ex = build_labels(snaps, ReferenceMode::kFinalLayerAgreement, std::nullopt);
  EXPECT_EQ(labels_of(ex), (std::vector<int>{0, 1, 1, 1}));
}

TEST(BuildLabels, NonMonotoneLabelsArePermitted) {
  const auto snaps = snapshots_with_argmax({3, 3, 9, 3});
  const auto ex = build_labels(snaps, ReferenceMode::kFinalLayerAgreement, std::nullopt);
  EXPECT_EQ(labels_of(ex), (std::vector<int>{1, 1, 0, 1}));
}

TEST(BuildLabels, GoldAnswer) {
  const auto snaps = snapshots_with_argmax({3, 3, 9, 3});
  const auto ex = build_labels(snaps, ReferenceMode::kGoldAnswer, TokenId{9});
  EXPECT_EQ(labels_of(ex), (std::vector<int>{0, 0, 1, 0}));
  EXPECT_EQ(category_of([&] { build_labels(snaps, ReferenceMode::kGoldAnswer, std::nullopt); }),
            ErrorCategory::kInvalidInput);
}

TEST(BuildLabels, FinalLayerAlwaysAgreesWithItself) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Model m = random_model(seed);
    Rng rng(seed + 3);
    const auto snaps = forward_instrumented(m, testing::random_tokens(rng, m.config));
    const auto ex = build_labels(snaps, ReferenceMode::kFinalLayerAgreement, std::nullopt);
    ASSERT_EQ(ex.size(), snaps.size());
    EXPECT_EQ(ex.back().label, 1);
  }
}

TEST(ReferenceModeNames, RoundTrip) {
  for (auto m : {ReferenceMode::kFinalLayerAgreement, ReferenceMode::kGoldAnswer})
    EXPECT_EQ(reference_mode_from_name(reference_mode_name(m)), m);
  EXPECT_EQ(reference_mode_from_name("gold"), ReferenceMode::kGoldAnswer);
  EXPECT_EQ(category_of([] { reference_mode_from_name("oracle"); }), ErrorCategory::kInvalidInput);
}

ModelConfig four_layer() {
  ModelConfig c;
  c.num_layers = 4;
  return c;
}

TEST(BuildDataset, Cardinality) {
  const Model m = init_model(four_layer(), 2);
  const auto corpus = make_copy_corpus(3, 5, 16, 1);
  EXPECT_EQ(build_dataset(corpus, m, ReferenceMode::kGoldAnswer).size(), 12u);
  EXPECT_EQ(category_of([&] { build_dataset(std::vector<Instance>{}, m, ReferenceMode::kGoldAnswer); }),
            ErrorCategory::kInvalidInput);
}

TEST(BuildDataset, ConcatenatesPerInstanceLabels) {
  const Model m = init_model(four_layer(), 2);
  const auto corpus = make_copy_corpus(5, 5, 16, 4);
  const auto all = build_dataset(corpus, m, ReferenceMode::kFinalLayerAgreement);
  std::vector<LabeledExample> concat;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto snaps = forward_instrumented(m, corpus[i].tokens);
    const auto ex = build_labels(snaps, ReferenceMode::kFinalLayerAgreement, corpus[i].gold,
                                 {}, {}, std::to_string(i));
    concat.insert(concat.end(), ex.begin(), ex.end());
  }
  EXPECT_EQ(all, concat);
  const auto groups = group_sequences(all);
  ASSERT_EQ(groups.size(), 5u);
  for (const auto& g : groups) EXPECT_EQ(g.size(), 4u);
}

TEST(BuildDataset, MatchesTracePath) {
  const Model m = init_model(four_layer(), 2);
  const auto corpus = make_copy_corpus(4, 5, 16, 8);
  std::vector<TraceRecord> traces;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    traces.push_back(make_trace(std::to_string(i), "copy",
                                forward_instrumented(m, corpus[i].tokens), corpus[i].gold));
  EXPECT_EQ(build_dataset(traces, ReferenceMode::kGoldAnswer),
            build_dataset(corpus, m, ReferenceMode::kGoldAnswer));
}

TEST(DatasetFile, RoundTripIsExact) {
  const Model m = init_model(four_layer(), 2);
  const auto ex = build_dataset(make_copy_corpus(6, 5, 16, 8), m, ReferenceMode::kGoldAnswer);
  const auto path = (std::filesystem::temp_directory_path() / "adainfer_dataset_test.jsonl").string();
  write_dataset(path, ex);
  EXPECT_EQ(read_dataset(path), ex);
  std::filesystem::remove(path);
}

TEST(DatasetFile, RejectsBadLabel) {
  auto j = example_to_json(LabeledExample{"a", {}, 1});
  j["label"] = 2;
  EXPECT_EQ(category_of([&] { example_from_json(j); }), ErrorCategory::kParse);
}

TraceRecord trace_with_gap(std::string id, std::vector<double> gap) {
  TraceRecord r;
  r.instance_id = std::move(id);
  r.task_tag = "t";
  r.num_layers = static_cast<int>(gap.size());
  r.top_prob.assign(gap.size(), 1.0);
  r.cos_attn.assign(gap.size(), 0.5);
  r.cos_mlp.assign(gap.size(), 0.25);
  r.cos_hidden.assign(gap.size(), 1.0);
  r.argmax.assign(gap.size(), 0);
  r.gap = std::move(gap);
  return r;
}

TEST(Trajectory, SingleTraceMeansEqualValues) {
  const auto rows = feature_trajectory_report({trace_with_gap("a", {0.1, 0.4, 0.7})});
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_DOUBLE_EQ(rows[1][FeatureName::kGap].mean, 0.4);
  EXPECT_DOUBLE_EQ(rows[1][FeatureName::kGap].p10, 0.4);
  EXPECT_DOUBLE_EQ(rows[2][FeatureName::kCosMlp].median, 0.25);
}

TEST(Trajectory, TwoTraceMeans) {
  const auto rows = feature_trajectory_report(
      {trace_with_gap("a", {0.1, 0.4}), trace_with_gap("b", {0.3, 0.8})});
  EXPECT_DOUBLE_EQ(rows[0][FeatureName::kGap].mean, 0.2);
  EXPECT_DOUBLE_EQ(rows[1][FeatureName::kGap].mean, 0.6);
  EXPECT_NEAR(rows[1][FeatureName::kGap].p90, 0.4 + 0.9 * 0.4, 1e-15);
}

TEST(Trajectory, LinearGapGivesMonotoneMean) {
  Rng rng(1);
  std::vector<TraceRecord> traces;
  for (int i = 0; i < 50; ++i) {
    std::vector<double> gap;
    const double slope = 0.05 + 0.05 * rng.uniform();
    for (int k = 0; k < 10; ++k) gap.push_back(slope * k);
    traces.push_back(trace_with_gap(std::to_string(i), gap));
  }
  const auto rows = feature_trajectory_report(traces);
  for (std::size_t k = 1; k < rows.size(); ++k)
    EXPECT_GT(rows[k][FeatureName::kGap].mean, rows[k - 1][FeatureName::kGap].mean);
}

TEST(Trajectory, RejectsMixedDepths) {
  EXPECT_EQ(category_of([] {
              feature_trajectory_report({trace_with_gap("a", {0.1}), trace_with_gap("b", {0.1, 0.2})});
            }),
            ErrorCategory::kInvalidInput);
  EXPECT_EQ(category_of([] { feature_trajectory_report({}); }), ErrorCategory::kInvalidInput);
}

TEST(Trajectory, CsvShape) {
  const auto csv = trajectory_csv(feature_trajectory_report({trace_with_gap("a", {0.1, 0.4})}));
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "layer,gap_mean,gap_p10,gap_p50,gap_p90,top_prob_mean,top_prob_p10,top_prob_p50,"
            "top_prob_p90,cos_attn_mean,cos_attn_p10,cos_attn_p50,cos_attn_p90,cos_mlp_mean,"
            "cos_mlp_p10,cos_mlp_p50,cos_mlp_p90,cos_hidden_mean,cos_hidden_p10,cos_hidden_p50,"
            "cos_hidden_p90");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

}  // namespace
}  // namespace adainfer
