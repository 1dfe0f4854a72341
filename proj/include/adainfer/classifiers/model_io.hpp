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

#include "adainfer/classifiers/decider.hpp"
#include "adainfer/core/error.hpp"

namespace adainfer {

// Classifier model file: JSON, format "adainfer-classifier", version 1.
//   {"format":..., "version":1, "kind":"svm"|"crf"|"gap_rule",
//    "features":[...], <kind-specific parameters>,
//    "training":{"seed":..., "dataset_digest":"...", "num_examples":N,
//                "hyperparams":{...}}}

struct TrainingMetadata {
  std::uint64_t seed = 0;
  std::string dataset_digest;
  std::size_t num_examples = 0;

  bool operator==(const TrainingMetadata&) const = default;
};

namespace detail {

inline nlohmann::json feature_list(const std::vector<FeatureName>& fs) {
  nlohmann::json j = nlohmann::json::array();
  for (auto f : fs) j.push_back(feature_name(f));
  return j;
}

inline std::vector<FeatureName> feature_list(const nlohmann::json& j) {
  std::vector<FeatureName> out;
  for (const auto& x : j) out.push_back(feature_from_name(x.get<std::string>()));
  return out;
}

inline std::string schedule_name(LearningRateSchedule s) {
  return s == LearningRateSchedule::kConstant ? "constant" : "inverse_scaling";
}

inline LearningRateSchedule schedule_from_name(const std::string& s) {
  if (s == "constant") return LearningRateSchedule::kConstant;
  if (s == "inverse_scaling") return LearningRateSchedule::kInverseScaling;
  throw_invalid("unknown learning-rate schedule: " + s);
}

}  // namespace detail

inline std::string crf_decode_name(CrfDecode d) {
  return d == CrfDecode::kPrefixViterbi ? "prefix_viterbi" : "marginal";
}

inline CrfDecode crf_decode_from_name(const std::string& s) {
  if (s == "prefix_viterbi") return CrfDecode::kPrefixViterbi;
  if (s == "marginal") return CrfDecode::kMarginal;
  throw_invalid("unknown crf decode mode: " + s);
}

inline nlohmann::json decider_to_json(const ExitDecider& d,
                                      const TrainingMetadata& meta = {}) {
  nlohmann::json j = {{"format", "adainfer-classifier"}, {"version", 1},
                      {"kind", decider_kind(d)}};
  nlohmann::json training = {{"seed", meta.seed},
                             {"dataset_digest", meta.dataset_digest},
                             {"num_examples", meta.num_examples}};
  if (const auto* svm = std::get_if<SvmModel>(&d)) {
    const auto& hp = svm->hyperparams;
    j["features"] = detail::feature_list(svm->features);
    j["weights"] = svm->weights;
    j["bias"] = svm->bias;
    training["hyperparams"] = {{"C", hp.C},
                               {"epochs", hp.epochs},
                               {"learning_rate", hp.learning_rate},
                               {"schedule", detail::schedule_name(hp.schedule)},
                               {"class_weighting", hp.class_weighting},
                               {"seed", hp.seed}};
  } else if (const auto* crf = std::get_if<CrfModel>(&d)) {
    const auto& hp = crf->hyperparams;
    j["features"] = detail::feature_list(crf->features);
    j["emission"] = {crf->emission.row(0), crf->emission.row(1)};
    j["transition"] = {crf->transition.row(0), crf->transition.row(1)};
    j["start"] = crf->start;
    j["decode"] = crf_decode_name(crf->decode);
    j["marginal_threshold"] = crf->marginal_threshold;
    training["hyperparams"] = {{"epochs", hp.epochs},
                               {"learning_rate", hp.learning_rate},
                               {"l2", hp.l2},
                               {"prefix_training", hp.prefix_training}};
  } else if (const auto* gap = std::get_if<GapRule>(&d)) {
    j["features"] = {"gap"};
    j["threshold"] = gap->threshold;
  } else {
    throw_invalid("decider: " + decider_kind(d) + " has no model file form");
  }
  j["training"] = training;
  return j;
}

inline ExitDecider decider_from_json(const nlohmann::json& j,
                                     TrainingMetadata* meta = nullptr) {
  try {
    if (j.at("format") != "adainfer-classifier")
      throw Error(ErrorCategory::kParse, "classifier: wrong format tag");
    if (j.at("version") != 1)
      throw Error(ErrorCategory::kParse, "classifier: unsupported version");
    if (meta && j.contains("training")) {
      const auto& t = j.at("training");
      meta->seed = t.value("seed", std::uint64_t{0});
      meta->dataset_digest = t.value("dataset_digest", std::string());
      meta->num_examples = t.value("num_examples", std::size_t{0});
    }
    const auto kind = j.at("kind").get<std::string>();
    const nlohmann::json hp = j.contains("training")
                                  ? j["training"].value("hyperparams", nlohmann::json::object())
                                  : nlohmann::json::object();
    if (kind == "svm") {
      SvmModel m;
      m.features = detail::feature_list(j.at("features"));
      m.weights = j.at("weights").get<Vector>();
      m.bias = j.at("bias").get<double>();
      m.hyperparams.C = hp.value("C", m.hyperparams.C);
      m.hyperparams.epochs = hp.value("epochs", m.hyperparams.epochs);
      m.hyperparams.learning_rate = hp.value("learning_rate", m.hyperparams.learning_rate);
      if (hp.contains("schedule"))
        m.hyperparams.schedule = detail::schedule_from_name(hp["schedule"]);
      m.hyperparams.class_weighting = hp.value("class_weighting", m.hyperparams.class_weighting);
      m.hyperparams.seed = hp.value("seed", m.hyperparams.seed);
      m.validate();
      return m;
    }
    if (kind == "crf") {
      CrfModel m = CrfModel::zeros(detail::feature_list(j.at("features")));
      const auto emission = j.at("emission").get<std::vector<Vector>>();
      const auto transition = j.at("transition").get<std::vector<Vector>>();
      if (emission.size() != kCrfLabels || transition.size() != kCrfLabels)
        throw Error(ErrorCategory::kParse, "classifier: crf matrices must have 2 rows");
      for (std::size_t y = 0; y < kCrfLabels; ++y) {
        if (emission[y].size() != m.features.size() || transition[y].size() != kCrfLabels)
          throw Error(ErrorCategory::kParse, "classifier: crf matrix shape mismatch");
        std::copy(emission[y].begin(), emission[y].end(), m.emission.row(y).begin());
        std::copy(transition[y].begin(), transition[y].end(), m.transition.row(y).begin());
      }
      m.start = j.at("start").get<Vector>();
      m.decode = crf_decode_from_name(j.value("decode", std::string("prefix_viterbi")));
      m.marginal_threshold = j.value("marginal_threshold", 0.5);
      m.hyperparams.epochs = hp.value("epochs", m.hyperparams.epochs);
      m.hyperparams.learning_rate = hp.value("learning_rate", m.hyperparams.learning_rate);
      m.hyperparams.l2 = hp.value("l2", m.hyperparams.l2);
      m.hyperparams.prefix_training = hp.value("prefix_training", m.hyperparams.prefix_training);
      m.validate();
      return m;
    }
    if (kind == "gap_rule") {
      GapRule r{j.at("threshold").get<double>()};
      r.validate();
      return r;
    }
    throw Error(ErrorCategory::kParse, "classifier: unknown kind " + kind);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::kParse, std::string("classifier: ") + e.what());
  }
}

inline void save_decider(const std::string& path, const ExitDecider& d,
                         const TrainingMetadata& meta = {}) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCategory::kIo, "cannot write " + path);
  out << decider_to_json(d, meta).dump(2) << '\n';
}

inline ExitDecider load_decider(const std::string& path,
                                TrainingMetadata* meta = nullptr) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::kIo, "cannot read " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::kParse, path + ": " + e.what());
  }
  return decider_from_json(j, meta);
}

}  // namespace adainfer
