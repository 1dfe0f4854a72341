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
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "adainfer/classifiers/crf.hpp"
#include "adainfer/classifiers/model_io.hpp"
#include "adainfer/classifiers/svm.hpp"
#include "adainfer/core/error.hpp"
#include "adainfer/cost/cost_model.hpp"
#include "adainfer/features/labels.hpp"
#include "adainfer/harness/eval.hpp"
#include "adainfer/harness/synth.hpp"
#include "adainfer/model/model.hpp"
#include "adainfer/model/train.hpp"

namespace adainfer {

// Harness configuration file, schema version 1 (see README for the layout).
// "version" and "seed" are mandatory; every other section is optional and
// falls back to the defaults below. Component seeds derive from "seed":
//   model init = seed, training shuffle = seed + 1, train corpus = seed + 2,
//   eval corpus = seed + 3, synthetic traces = seed + 4, SVM shuffle = seed + 5.

inline constexpr int kConfigVersion = 1;

struct CorpusConfig {
  std::size_t train_instances = 512;
  std::size_t eval_instances = 500;
  int seq_len = 6;
};

struct ClassifierConfig {
  std::string kind = "svm";
  std::vector<FeatureName> features = base_features();
  SvmHyperparams svm;
  CrfHyperparams crf;
  CrfDecode crf_decode = CrfDecode::kPrefixViterbi;
  double crf_marginal_threshold = 0.5;
  double gap_threshold = 0.8;
};

struct HarnessConfig {
  std::uint64_t seed = 0;
  ModelConfig model;
  TrainHyperparams training;
  CorpusConfig corpus;
  SynthTaskSpec synth;
  ReferenceMode label_mode = ReferenceMode::kFinalLayerAgreement;
  FeatureOptions feature_options;
  ClassifierConfig classifier;
  int min_exit_layer = 1;
  CostParams cost;
  double cost_exit_layer = 0.0;  // 0 means "use l"
  WallClockOptions wall_clock;
  unsigned threads = 1;
};

inline HarnessConfig parse_config(const nlohmann::json& j) {
  try {
    require(j.contains("version"), "config: missing version");
    require(j.at("version").get<int>() == kConfigVersion, "config: unsupported version");
    require(j.contains("seed"), "config: seed is mandatory");
    HarnessConfig c;
    c.seed = j.at("seed").get<std::uint64_t>();
    c.model = config_from_json(j.value("model", nlohmann::json::object()), ModelConfig{
        6, 16, 2, 16, 8, 4, ProbeNorm::kFinalNormEveryProbe});

    const auto t = j.value("training", nlohmann::json::object());
    c.training.steps = t.value("steps", 600);
    c.training.batch_size = t.value("batch_size", c.training.batch_size);
    c.training.learning_rate = t.value("learning_rate", c.training.learning_rate);
    c.training.clip_norm = t.value("clip_norm", c.training.clip_norm);
    c.training.seed = c.seed + 1;

    const auto co = j.value("corpus", nlohmann::json::object());
    c.corpus.train_instances = co.value("train_instances", c.corpus.train_instances);
    c.corpus.eval_instances = co.value("eval_instances", c.corpus.eval_instances);
    c.corpus.seq_len = co.value("seq_len", c.corpus.seq_len);

    const auto sy = j.value("synth", nlohmann::json::object());
    c.synth = mixed_spec(sy.value("num_layers", 16), sy.value("instances", std::size_t{1000}),
                         c.seed + 4);
    c.synth.name = sy.value("name", c.synth.name);
    c.synth.vocab_size = sy.value("vocab_size", c.synth.vocab_size);
    c.synth.dense_accuracy = sy.value("dense_accuracy", c.synth.dense_accuracy);
    if (sy.contains("profile")) {
      c.synth.profile.clear();
      for (const auto& b : sy.at("profile"))
        c.synth.profile.push_back({b.value("tag", std::string()), b.value("weight", 1.0),
                                   b.at("min_layer").get<int>(), b.at("max_layer").get<int>()});
    }
    c.synth.validate();

    const auto lb = j.value("labels", nlohmann::json::object());
    c.label_mode = reference_mode_from_name(lb.value("mode", std::string("final_layer_agreement")));
    const auto l1 = lb.value("layer1_reference", std::string("sentinel"));
    require(l1 == "sentinel" || l1 == "embedding", "config: bad layer1_reference");
    c.feature_options.layer1 =
        l1 == "sentinel" ? Layer1Reference::kSentinel : Layer1Reference::kEmbedding;

    const auto cl = j.value("classifier", nlohmann::json::object());
    c.classifier.kind = cl.value("kind", c.classifier.kind);
    require(c.classifier.kind == "svm" || c.classifier.kind == "crf" ||
                c.classifier.kind == "gap_rule",
            "config: classifier.kind must be svm, crf or gap_rule");
    if (cl.contains("features")) {
      c.classifier.features.clear();
      for (const auto& f : cl.at("features"))
        c.classifier.features.push_back(feature_from_name(f.get<std::string>()));
      require(!c.classifier.features.empty(), "config: empty feature list");
    }
    const auto sv = cl.value("svm", nlohmann::json::object());
    auto& svm = c.classifier.svm;
    svm.C = sv.value("C", svm.C);
    svm.epochs = sv.value("epochs", svm.epochs);
    svm.learning_rate = sv.value("learning_rate", svm.learning_rate);
    if (sv.contains("schedule"))
      svm.schedule = sv["schedule"] == "constant" ? LearningRateSchedule::kConstant
                                                  : LearningRateSchedule::kInverseScaling;
    svm.class_weighting = sv.value("class_weighting", svm.class_weighting);
    svm.seed = c.seed + 5;
    const auto cr = cl.value("crf", nlohmann::json::object());
    auto& crf = c.classifier.crf;
    crf.epochs = cr.value("epochs", crf.epochs);
    crf.learning_rate = cr.value("learning_rate", crf.learning_rate);
    crf.l2 = cr.value("l2", crf.l2);
    crf.prefix_training = cr.value("prefix_training", crf.prefix_training);
    c.classifier.crf_decode = crf_decode_from_name(cr.value("decode", std::string("prefix_viterbi")));
    c.classifier.crf_marginal_threshold = cr.value("marginal_threshold", 0.5);
    c.classifier.gap_threshold = cl.value("gap_threshold", c.classifier.gap_threshold);
    GapRule{c.classifier.gap_threshold}.validate();

    const auto po = j.value("policy", nlohmann::json::object());
    c.min_exit_layer = po.value("min_exit_layer", 1);
    require(c.min_exit_layer >= 1, "config: min_exit_layer must be >= 1");

    const auto cs = j.value("cost", nlohmann::json::object());
    c.cost = cost_params_from_json(cs, CostParams{1, 2048, 4096, 32, 32000});
    c.cost_exit_layer = cs.value("exit_layer", 0.0);

    const auto wc = j.value("wall_clock", nlohmann::json::object());
    c.wall_clock.warmup_iterations = wc.value("warmup", c.wall_clock.warmup_iterations);
    c.wall_clock.repeats = wc.value("repeats", c.wall_clock.repeats);
    c.threads = j.value("threads", 1u);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::kParse, std::string("config: ") + e.what());
  }
}

/// Applies "dotted.key=value" to a raw config document. The value is read
/// as JSON when it parses, otherwise as a plain string.
inline void apply_override(nlohmann::json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  require(eq != std::string::npos && eq > 0, "override must look like key.path=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  nlohmann::json* node = &j;
  std::size_t begin = 0;
  while (true) {
    const auto dot = key.find('.', begin);
    const std::string part = key.substr(begin, dot == std::string::npos ? dot : dot - begin);
    require(!part.empty(), "override has an empty key segment: " + key);
    require(node->is_object(), "override path crosses a non-object: " + key);
    if (dot == std::string::npos) {
      (*node)[part] = std::move(value);
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = nlohmann::json::object();
    begin = dot + 1;
  }
}

inline nlohmann::json load_config_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::kIo, "cannot read " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::kParse, path + ": " + e.what());
  }
}

inline HarnessConfig load_config(const std::string& path,
                                 const std::vector<std::string>& overrides = {}) {
  auto j = load_config_json(path);
  for (const auto& o : overrides) apply_override(j, o);
  return parse_config(j);
}

}  // namespace adainfer
