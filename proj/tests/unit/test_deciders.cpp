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

#include <filesystem>

#include <gtest/gtest.h>

#include "adainfer/classifiers/decider.hpp"
#include "adainfer/classifiers/model_io.hpp"
#include "test_util.hpp"

namespace adainfer {
namespace {

using testing::category_of;

FeatureVector with_gap(double gap) {
  FeatureVector fv;
  fv.layer_index = 1;
  fv.gap = gap;
  fv.top_prob = std::min(1.0, gap + 0.05);
  return fv;
}

TEST(GapRule, StrictThreshold) {
  const GapRule rule;
  EXPECT_EQ(rule.threshold, 0.8);
  EXPECT_TRUE(gap_rule_decide(rule, with_gap(0.81)));
  EXPECT_FALSE(gap_rule_decide(rule, with_gap(0.8)));
  EXPECT_FALSE(gap_rule_decide(rule, with_gap(0.1)));
}

TEST(GapRule, ThresholdOneNeverFires) {
  const GapRule rule{1.0};
  for (double g = 0.0; g <= 1.0; g += 0.01) EXPECT_FALSE(gap_rule_decide(rule, with_gap(g)));
  EXPECT_FALSE(gap_rule_decide(rule, with_gap(1.0)));
}

TEST(GapRule, RejectsOutOfRangeThreshold) {
  EXPECT_EQ(category_of([] { GapRule{1.5}.validate(); }), ErrorCategory::kInvalidInput);
  EXPECT_EQ(category_of([] { GapRule{-0.1}.validate(); }), ErrorCategory::kInvalidInput);
}

TEST(Decide, DispatchesOnEveryKind) {
  const std::vector<FeatureVector> prefix{with_gap(0.1), with_gap(0.9)};
  EXPECT_TRUE(decide(GapRule{}, prefix));
  EXPECT_FALSE(decide(GapRule{}, std::span(prefix).first(1)));
  EXPECT_FALSE(decide(AlwaysDense{}, prefix));
  EXPECT_TRUE(decide(constant_svm(true), prefix));
  EXPECT_FALSE(decide(constant_svm(false), prefix));
  CrfModel crf = CrfModel::zeros(base_features());
  crf.start = {0.0, 1.0};
  EXPECT_TRUE(decide(crf, std::span(prefix).first(1)));
  EXPECT_EQ(category_of([&] { decide(OracleLabels{}, prefix); }), ErrorCategory::kInvalidInput);
  EXPECT_EQ(category_of([] { decide(GapRule{}, {}); }), ErrorCategory::kInvalidInput);
}

TEST(Decide, KindNames) {
  EXPECT_EQ(decider_kind(SvmModel{}), "svm");
  EXPECT_EQ(decider_kind(CrfModel{}), "crf");
  EXPECT_EQ(decider_kind(GapRule{}), "gap_rule");
  EXPECT_EQ(decider_kind(AlwaysDense{}), "always_dense");
  EXPECT_EQ(decider_kind(OracleLabels{}), "oracle");
}

class DeciderFile : public ::testing::Test {
 protected:
  void TearDown() override { std::filesystem::remove(path_); }
  ExitDecider round_trip(const ExitDecider& d, const TrainingMetadata& meta = {}) {
    save_decider(path_, d, meta);
    TrainingMetadata back_meta;
    auto back = load_decider(path_, &back_meta);
    EXPECT_EQ(back_meta, meta);
    return back;
  }
  std::string path_ =
      (std::filesystem::temp_directory_path() / "adainfer_decider_test.json").string();
};

TEST_F(DeciderFile, SvmRoundTrip) {
  SvmModel m;
  m.features = {FeatureName::kGap, FeatureName::kCosMlp, FeatureName::kTopProb};
  m.weights = {0.1234567890123, -2.5, 1e-17};
  m.bias = -0.3;
  m.hyperparams.C = 4.0;
  m.hyperparams.schedule = LearningRateSchedule::kConstant;
  m.hyperparams.seed = 99;
  const auto back = std::get<SvmModel>(round_trip(m, {42, "abc", 7}));
  EXPECT_EQ(back.features, m.features);
  EXPECT_EQ(back.weights, m.weights);
  EXPECT_EQ(back.bias, m.bias);
  EXPECT_EQ(back.hyperparams.C, 4.0);
  EXPECT_EQ(back.hyperparams.schedule, LearningRateSchedule::kConstant);
  EXPECT_EQ(back.hyperparams.seed, 99u);
}

TEST_F(DeciderFile, CrfRoundTrip) {
  Rng rng(2);
  CrfModel m = CrfModel::zeros({FeatureName::kGap, FeatureName::kTopProb, FeatureName::kCosHidden});
  for (double& x : m.emission.data) x = rng.normal();
  for (double& x : m.transition.data) x = rng.normal();
  for (double& x : m.start) x = rng.normal();
  m.decode = CrfDecode::kMarginal;
  m.marginal_threshold = 0.7;
  m.hyperparams.l2 = 0.01;
  const auto j = decider_to_json(m);
  ASSERT_TRUE(j["emission"].is_array());
  ASSERT_EQ(j["emission"].size(), 2u);
  ASSERT_EQ(j["emission"][0].size(), 3u);
  const auto back = std::get<CrfModel>(round_trip(m));
  EXPECT_EQ(back.features, m.features);
  EXPECT_EQ(back.emission, m.emission);
  EXPECT_EQ(back.transition, m.transition);
  EXPECT_EQ(back.start, m.start);
  EXPECT_EQ(back.decode, CrfDecode::kMarginal);
  EXPECT_EQ(back.marginal_threshold, 0.7);
  EXPECT_EQ(back.hyperparams.l2, 0.01);
}

TEST_F(DeciderFile, GapRuleRoundTrip) {
  const auto j = decider_to_json(GapRule{0.65});
  ASSERT_TRUE(j["features"].is_array());
  EXPECT_EQ(j["features"][0], "gap");
  EXPECT_EQ(std::get<GapRule>(round_trip(GapRule{0.65})).threshold, 0.65);
}

TEST(DeciderJson, RejectsBadFiles) {
  EXPECT_EQ(category_of([] { decider_to_json(AlwaysDense{}); }), ErrorCategory::kInvalidInput);
  auto j = decider_to_json(GapRule{});
  j["kind"] = "tree";
  EXPECT_EQ(category_of([&] { decider_from_json(j); }), ErrorCategory::kParse);
  j = decider_to_json(constant_svm(true));
  j["weights"] = {1.0};
  EXPECT_EQ(category_of([&] { decider_from_json(j); }), ErrorCategory::kInvalidInput);
  j = decider_to_json(CrfModel{});
  j["transition"] = {{1.0, 2.0}};
  EXPECT_EQ(category_of([&] { decider_from_json(j); }), ErrorCategory::kParse);
  j = decider_to_json(GapRule{});
  j["version"] = 2;
  EXPECT_EQ(category_of([&] { decider_from_json(j); }), ErrorCategory::kParse);
  EXPECT_EQ(category_of([] { load_decider("/nonexistent/model.json"); }), ErrorCategory::kIo);
}

TEST(DeciderJson, DecodeNames) {
  for (auto d : {CrfDecode::kPrefixViterbi, CrfDecode::kMarginal})
    EXPECT_EQ(crf_decode_from_name(crf_decode_name(d)), d);
  EXPECT_EQ(category_of([] { crf_decode_from_name("beam"); }), ErrorCategory::kInvalidInput);
}

}  // namespace
}  // namespace adainfer
