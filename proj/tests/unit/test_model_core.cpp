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
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "adainfer/core/linalg.hpp"
#include "adainfer/model/forward.hpp"
#include "adainfer/model/model.hpp"
#include "test_util.hpp"

namespace adainfer {
namespace {

using testing::category_of;
using testing::random_model;
using testing::random_tokens;

TEST(Softmax, SymmetricPair) {
  const auto p = softmax(Vector{0.0, 0.0});
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  EXPECT_DOUBLE_EQ(p[1], 0.5);
}

TEST(Softmax, LargeLogitsDoNotOverflow) {
  const auto p = softmax(Vector{1000.0, 1000.0, 1000.0});
  for (double x : p) EXPECT_NEAR(x, 1.0 / 3.0, 1e-15);
}

TEST(Softmax, MatchesArbitraryPrecisionOracle) {
  // e^x / sum e^x for x = (2, 1, 0), evaluated with 40 significant digits.
  const double expected[] = {0.6652409557748218895290183, 0.2447284710547976524729596,
                             0.0900305731703804579980221};
  const auto p = softmax(Vector{2.0, 1.0, 0.0});
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(p[i], expected[i], 1e-15);
}

TEST(Softmax, RejectsNonFiniteAndEmpty) {
  const double inf = std::numeric_limits<double>::infinity();
  EXPECT_EQ(category_of([&] { softmax(Vector{0.0, inf}); }), ErrorCategory::kInvalidInput);
  EXPECT_EQ(category_of([&] { softmax(Vector{std::nan("")}); }), ErrorCategory::kInvalidInput);
  EXPECT_EQ(category_of([&] { softmax(Vector{}); }), ErrorCategory::kInvalidInput);
}

TEST(Softmax, PreservesOrderAndNormalizes) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    Vector logits(2 + rng.uniform_int(30));
    for (double& x : logits) x = rng.normal(0.0, 10.0);
    const auto p = softmax(logits);
    double total = 0.0;
    for (double x : p) total += x;
    EXPECT_NEAR(total, 1.0, 1e-12);
    EXPECT_EQ(argmax(p), argmax(logits));
    for (std::size_t i = 0; i < p.size(); ++i)
      for (std::size_t j = 0; j < p.size(); ++j)
        if (logits[i] < logits[j]) {
          EXPECT_LE(p[i], p[j]);
        }
  }
}

TEST(Argmax, LowestIndexWinsTies) {
  EXPECT_EQ(argmax(Vector{0.2, 0.4, 0.4}), 1u);
  EXPECT_EQ(argmax(Vector{1.0, 1.0}), 0u);
}

TEST(LmHead, BasisVectorSelectsColumn) {
  Matrix w(3, 2);
  w(0, 0) = 1.0;
  w(1, 1) = 1.0;
  const auto logits = lm_head(Vector{1.0, 0.0}, w, Vector(3, 0.0));
  EXPECT_EQ(logits, (Vector{w(0, 0), w(1, 0), w(2, 0)}));
}

TEST(LmHead, BiasOnlyModel) {
  const Matrix w(4, 3);
  const Vector b{0.5, -1.0, 2.0, 0.0};
  EXPECT_EQ(lm_head(Vector{3.0, -7.0, 1.5}, w, b), b);
}

TEST(LmHead, MatchesNaiveLoops) {
  Rng rng(17);
  Matrix w(3, 2);
  for (double& x : w.data) x = rng.normal();
  Vector b{rng.normal(), rng.normal(), rng.normal()};
  Vector hidden{rng.normal(), rng.normal()};
  const auto logits = lm_head(hidden, w, b);
  for (std::size_t r = 0; r < 3; ++r) {
    double acc = b[r];
    for (std::size_t c = 0; c < 2; ++c) acc += w.data[r * 2 + c] * hidden[c];
    EXPECT_NEAR(logits[r], acc, 1e-15);
  }
}

TEST(LmHead, DimensionMismatch) {
  const Matrix w(3, 2);
  EXPECT_EQ(category_of([&] { lm_head(Vector{1.0, 2.0, 3.0}, w, Vector(3, 0.0)); }),
            ErrorCategory::kInvalidInput);
}

TEST(ModelConfig, Validation) {
  ModelConfig c;
  c.num_heads = 3;  // 8 % 3 != 0
  EXPECT_EQ(category_of([&] { c.validate(); }), ErrorCategory::kInvalidInput);
  c = ModelConfig{};
  c.vocab_size = 1;
  EXPECT_EQ(category_of([&] { c.validate(); }), ErrorCategory::kInvalidInput);
  c = ModelConfig{};
  c.num_layers = 0;
  EXPECT_EQ(category_of([&] { c.validate(); }), ErrorCategory::kInvalidInput);
}

TEST(Forward, SingleLayerModelYieldsOneSnapshot) {
  ModelConfig c;
  c.num_layers = 1;
  const Model m = init_model(c, 3);
  const std::vector<TokenId> tokens{1, 2, 3};
  const auto snaps = forward_instrumented(m, tokens);
  ASSERT_EQ(snaps.size(), 1u);
  EXPECT_EQ(snaps[0].layer_index, 1);
}

TEST(Forward, SnapshotInvariants) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Model m = random_model(seed);
    Rng rng(seed);
    const auto tokens = random_tokens(rng, m.config);
    const auto snaps = forward_instrumented(m, tokens);
    ASSERT_EQ(snaps.size(), static_cast<std::size_t>(m.config.num_layers));
    for (std::size_t k = 0; k < snaps.size(); ++k) {
      const auto& s = snaps[k];
      EXPECT_EQ(s.layer_index, static_cast<int>(k) + 1);
      EXPECT_EQ(s.hidden_last.size(), static_cast<std::size_t>(m.config.hidden_size));
      EXPECT_EQ(s.attn_last.size(), s.hidden_last.size());
      EXPECT_EQ(s.mlp_last.size(), s.hidden_last.size());
      double total = 0.0;
      for (double p : s.probs) {
        EXPECT_GE(p, 0.0);
        EXPECT_LE(p, 1.0);
        total += p;
      }
      EXPECT_NEAR(total, 1.0, 1e-6);
      EXPECT_EQ(s.probs, softmax(s.logits));
      // Probe consistency.
      EXPECT_EQ(argmax(softmax(probe_logits(m, s.hidden_last, s.layer_index))),
                argmax(s.probs));
    }
  }
}

TEST(Forward, SnapshotsAreReproducible) {
  const Model m = random_model(4);
  Rng rng(1);
  const auto tokens = random_tokens(rng, m.config);
  EXPECT_EQ(forward_instrumented(m, tokens), forward_instrumented(m, tokens));
}

TEST(Forward, ResidualStreamAddsSublayerOutputs) {
  const Model m = random_model(8);
  const std::vector<TokenId> tokens{0, 1};
  const auto snaps = forward_instrumented(m, tokens);
  ForwardPass pass(m, tokens);
  Vector prev = pass.embedding_last();
  for (const auto& s : snaps) {
    for (std::size_t i = 0; i < prev.size(); ++i)
      EXPECT_NEAR(s.hidden_last[i], prev[i] + s.attn_last[i] + s.mlp_last[i], 1e-12);
    prev = s.hidden_last;
  }
}

TEST(Forward, FinalLayerMatchesDenseOnRandomModels) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Model m = random_model(seed);
    if (seed % 2) m.config.probe_norm = ProbeNorm::kRawIntermediate;
    Rng rng(seed + 1000);
    const auto tokens = random_tokens(rng, m.config);
    const auto snaps = forward_instrumented(m, tokens);
    const auto dense = forward_dense(m, tokens);
    EXPECT_EQ(dense.prediction, snaps.back().prediction());
    EXPECT_EQ(dense.logits, snaps.back().logits);
  }
}

TEST(Forward, DenseTieBreakPicksLowestId) {
  ModelConfig c;
  Model m = init_model(c, 1);
  std::fill(m.weights.head_weight.data.begin(), m.weights.head_weight.data.end(), 0.0);
  std::fill(m.weights.head_bias.begin(), m.weights.head_bias.end(), 0.25);
  const std::vector<TokenId> tokens{3, 4};
  EXPECT_EQ(forward_dense(m, tokens).prediction, 0u);
  m.weights.head_bias[5] = m.weights.head_bias[9] = 1.0;
  EXPECT_EQ(forward_dense(m, tokens).prediction, 5u);
}

TEST(Forward, RejectsBadTokens) {
  const Model m = init_model(ModelConfig{}, 1);
  const std::vector<TokenId> out_of_range{1, 16};
  const std::vector<TokenId> empty;
  const std::vector<TokenId> too_long(17, 0);
  EXPECT_EQ(category_of([&] { forward_instrumented(m, out_of_range); }),
            ErrorCategory::kInvalidInput);
  EXPECT_EQ(category_of([&] { forward_dense(m, empty); }), ErrorCategory::kInvalidInput);
  EXPECT_EQ(category_of([&] { forward_dense(m, too_long); }), ErrorCategory::kInvalidInput);
}

TEST(Forward, RawIntermediateProbesSkipFinalNorm) {
  Model m = random_model(3);
  const std::vector<TokenId> tokens{1};
  const auto normed = forward_instrumented(m, tokens);
  m.config.probe_norm = ProbeNorm::kRawIntermediate;
  const auto raw = forward_instrumented(m, tokens);
  for (std::size_t k = 0; k + 1 < raw.size(); ++k)
    EXPECT_EQ(raw[k].logits, lm_head(raw[k].hidden_last, m.weights));
  EXPECT_EQ(raw.back().logits, normed.back().logits);
}

TEST(Checkpoint, RoundTripIsExact) {
  const Model m = random_model(11);
  const auto path = std::filesystem::temp_directory_path() / "adainfer_ckpt_test.json";
  save_model(m, path.string());
  const Model back = load_model(path.string());
  EXPECT_EQ(back, m);
  std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsCorruptContainers) {
  auto j = model_to_json(random_model(2));
  j["format"] = "something-else";
  EXPECT_EQ(category_of([&] { model_from_json(j); }), ErrorCategory::kParse);
  j = model_to_json(random_model(2));
  j["weights"]["head_bias"].push_back(0.0);
  EXPECT_EQ(category_of([&] { model_from_json(j); }), ErrorCategory::kParse);
  EXPECT_EQ(category_of([&] { load_model("/nonexistent/ckpt.json"); }), ErrorCategory::kIo);
}

TEST(Checkpoint, InitIsSeedDeterministic) {
  ModelConfig c;
  EXPECT_EQ(init_model(c, 9), init_model(c, 9));
  EXPECT_NE(init_model(c, 9).weights, init_model(c, 10).weights);
}

// Golden snapshot file for a seed-fixed 2-layer, h = 8, V = 16 model.
// Set ADAINFER_REGEN_GOLDEN=1 to rewrite it after an intended change.
TEST(Forward, GoldenSnapshotsAreByteStable) {
  ModelConfig c;
  c.num_layers = 2;
  c.hidden_size = 8;
  c.num_heads = 2;
  c.vocab_size = 16;
  c.max_seq_len = 8;
  const Model m = init_model(c, 20240501);
  const std::vector<TokenId> tokens{3, 1, 4, 1, 5, 9, 2, 6};
  nlohmann::json j = nlohmann::json::array();
  for (const auto& s : forward_instrumented(m, tokens))
    j.push_back({{"layer_index", s.layer_index},
                 {"hidden_last", s.hidden_last},
                 {"attn_last", s.attn_last},
                 {"mlp_last", s.mlp_last},
                 {"logits", s.logits},
                 {"probs", s.probs}});
  j.push_back({{"dense_prediction", forward_dense(m, tokens).prediction}});
  const std::string actual = j.dump(1) + "\n";
  const std::string path = std::string(ADAINFER_TEST_DATA) + "/golden_snapshots.json";
  if (std::getenv("ADAINFER_REGEN_GOLDEN")) {
    std::ofstream(path) << actual;
    GTEST_SKIP() << "regenerated " << path;
  }
  std::ifstream in(path);
  ASSERT_TRUE(in) << "missing golden file " << path;
  std::stringstream expected;
  expected << in.rdbuf();
  EXPECT_EQ(actual, expected.str());
}

}  // namespace
}  // namespace adainfer
