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

#include <gtest/gtest.h>

#include "adainfer/model/corpus.hpp"
#include "adainfer/model/sweep.hpp"
#include "adainfer/model/train.hpp"
#include "test_util.hpp"

namespace adainfer {
namespace {

using testing::category_of;
using testing::random_model;

ModelConfig small_config(int layers) {
  ModelConfig c;
  c.num_layers = layers;
  c.hidden_size = 16;
  c.num_heads = 2;
  c.vocab_size = 8;
  c.max_seq_len = 4;
  return c;
}

TEST(TrainToy, ConstantTargetIsLearnedPerfectly) {
  auto data = make_copy_corpus(64, 4, 8, 3);
  for (auto& inst : data) inst.gold = 5;
  TrainHyperparams hp;
  hp.steps = 100;
  hp.learning_rate = 1e-2;
  TrainReport report;
  const Model m = train_toy(data, init_model(small_config(1), 1), hp, &report);
  EXPECT_DOUBLE_EQ(dense_accuracy(m, data), 1.0);
  EXPECT_DOUBLE_EQ(report.train_accuracy, 1.0);
}

TEST(TrainToy, CopyTaskReachesHighTrainAccuracy) {
  const auto data = make_copy_corpus(256, 4, 8, 5);
  TrainHyperparams hp;
  hp.steps = 400;
  hp.learning_rate = 1e-2;
  const Model m = train_toy(data, init_model(small_config(2), 2), hp);
  EXPECT_GE(dense_accuracy(m, data), 0.95);
}

TEST(TrainToy, ZeroStepsReturnsInitialWeights) {
  const auto data = make_copy_corpus(8, 4, 8, 5);
  const Model init = init_model(small_config(2), 7);
  TrainHyperparams hp;
  hp.steps = 0;
  EXPECT_EQ(train_toy(data, init, hp), init);
}

TEST(TrainToy, LossDecreases) {
  const auto data = make_copy_corpus(128, 4, 8, 9);
  TrainHyperparams hp;
  hp.steps = 200;
  TrainReport report;
  train_toy(data, init_model(small_config(2), 3), hp, &report);
  EXPECT_LT(report.final_loss, report.initial_loss);
  EXPECT_EQ(report.batch_losses.size(), 200u);
}

TEST(TrainToy, SeedDeterministic) {
  const auto data = make_copy_corpus(32, 4, 8, 9);
  TrainHyperparams hp;
  hp.steps = 20;
  EXPECT_EQ(train_toy(data, init_model(small_config(2), 3), hp),
            train_toy(data, init_model(small_config(2), 3), hp));
}

TEST(TrainToy, DivergenceIsReportedAsTrainingFailure) {
  const auto data = make_copy_corpus(32, 4, 8, 9);
  TrainHyperparams hp;
  hp.steps = 50;
  hp.learning_rate = 1e300;
  EXPECT_EQ(category_of([&] { train_toy(data, init_model(small_config(2), 3), hp); }),
            ErrorCategory::kTrainingFailure);
}

TEST(TrainToy, RejectsBadData) {
  const Model init = init_model(small_config(1), 1);
  TrainHyperparams hp;
  EXPECT_EQ(category_of([&] { train_toy({}, init, hp); }), ErrorCategory::kInvalidInput);
  auto data = make_copy_corpus(4, 4, 8, 1);
  data[2].gold.reset();
  EXPECT_EQ(category_of([&] { train_toy(data, init, hp); }), ErrorCategory::kInvalidInput);
  data = make_copy_corpus(4, 4, 8, 1);
  data[0].gold = 8;
  EXPECT_EQ(category_of([&] { train_toy(data, init, hp); }), ErrorCategory::kInvalidInput);
}

// Central finite differences against the analytic backward pass.
TEST(LossGradient, MatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    Model m = random_model(seed);
    Rng rng(seed + 50);
    Instance inst{testing::random_tokens(rng, m.config),
                  static_cast<TokenId>(rng.uniform_int(static_cast<std::uint64_t>(m.config.vocab_size)))};
    ModelWeights grads = zeros_like(m.config);
    loss_and_gradient(m, inst, grads);
    auto params = parameter_spans(m.weights);
    const auto gspans = parameter_spans(grads);
    double worst = 0.0;
    for (std::size_t s = 0; s < params.size(); ++s) {
      for (std::size_t i = 0; i < params[s].size(); i += 3) {
        const double saved = params[s][i];
        const double eps = 1e-5;
        ModelWeights scratch = zeros_like(m.config);
        params[s][i] = saved + eps;
        const double up = loss_and_gradient(m, inst, scratch);
        params[s][i] = saved - eps;
        const double down = loss_and_gradient(m, inst, scratch);
        params[s][i] = saved;
        const double numeric = (up - down) / (2 * eps);
        const double analytic = gspans[s][i];
        const double err = std::abs(numeric - analytic) /
                           std::max(1e-6, std::abs(numeric) + std::abs(analytic));
        worst = std::max(worst, err);
      }
    }
    EXPECT_LT(worst, 1e-4) << "seed " << seed;
  }
}

TEST(Sweep, FinalEntryEqualsDenseAccuracy) {
  const auto data = make_copy_corpus(40, 4, 8, 1);
  const Model m = init_model(small_config(3), 4);
  const auto acc = layerwise_accuracy_sweep(data, m);
  ASSERT_EQ(acc.size(), 3u);
  EXPECT_DOUBLE_EQ(acc.back(), dense_accuracy(m, data));
  for (double a : acc) {
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
  }
}

TEST(Sweep, CountsPerLayerHits) {
  ModelConfig c = small_config(2);
  Model m = init_model(c, 1);
  // Force every probe to predict token 2.
  std::fill(m.weights.head_weight.data.begin(), m.weights.head_weight.data.end(), 0.0);
  std::fill(m.weights.head_bias.begin(), m.weights.head_bias.end(), 0.0);
  m.weights.head_bias[2] = 1.0;
  std::vector<Instance> data{{{1, 2}, 2}, {{1, 3}, 3}, {{2, 2}, 2}, {{0}, 1}};
  const auto acc = layerwise_accuracy_sweep(data, m);
  EXPECT_EQ(acc, (std::vector<double>{0.5, 0.5}));
}

TEST(Sweep, RejectsUnlabeledOrEmpty) {
  const Model m = init_model(small_config(1), 1);
  EXPECT_EQ(category_of([&] { layerwise_accuracy_sweep({}, m); }), ErrorCategory::kInvalidInput);
  std::vector<Instance> data{{{1}, std::nullopt}};
  EXPECT_EQ(category_of([&] { layerwise_accuracy_sweep(data, m); }), ErrorCategory::kInvalidInput);
}

TEST(CopyCorpus, GoldIsLastToken) {
  for (const auto& inst : make_copy_corpus(50, 5, 7, 2)) {
    ASSERT_EQ(inst.tokens.size(), 5u);
    EXPECT_EQ(inst.gold, inst.tokens.back());
    for (auto t : inst.tokens) EXPECT_LT(t, 7u);
  }
}

}  // namespace
}  // namespace adainfer
