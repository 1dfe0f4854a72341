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

#include <span>
#include <string>
#include <type_traits>
#include <variant>

#include "adainfer/classifiers/crf.hpp"
#include "adainfer/classifiers/gap_rule.hpp"
#include "adainfer/classifiers/svm.hpp"
#include "adainfer/core/error.hpp"
#include "adainfer/features/features.hpp"

namespace adainfer {

/// Never exits early.
struct AlwaysDense {};

/// Exits at the first layer whose FinalLayerAgreement label is 1. Needs the
/// dense pass of the same instance, so only evaluation code can run it.
struct OracleLabels {};

using ExitDecider = std::variant<SvmModel, CrfModel, GapRule, AlwaysDense, OracleLabels>;

inline std::string decider_kind(const ExitDecider& d) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, SvmModel>) return "svm";
        else if constexpr (std::is_same_v<T, CrfModel>) return "crf";
        else if constexpr (std::is_same_v<T, GapRule>) return "gap_rule";
        else if constexpr (std::is_same_v<T, AlwaysDense>) return "always_dense";
        else return "oracle";
      },
      d);
}

/// One exit decision given the features of layers 1..k (k = prefix size).
/// SVM and GAP look at layer k only; the CRF sees the whole prefix.
inline bool decide(const ExitDecider& d, std::span<const FeatureVector> prefix) {
  require(!prefix.empty(), "decider: empty feature prefix");
  return std::visit(
      [&](const auto& x) -> bool {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, SvmModel>)
          return svm_predict(x, prefix.back()).label == 1;
        else if constexpr (std::is_same_v<T, CrfModel>)
          return crf_decode_prefix(x, prefix) == 1;
        else if constexpr (std::is_same_v<T, GapRule>)
          return gap_rule_decide(x, prefix.back());
        else if constexpr (std::is_same_v<T, AlwaysDense>)
          return false;
        else
          throw_invalid("decider: oracle policy needs per-instance labels");
      },
      d);
}

/// SVM with w = 0: bias >= 0 always fires, bias < 0 never fires.
inline SvmModel constant_svm(bool fire) {
  SvmModel m;
  m.weights.assign(m.features.size(), 0.0);
  m.bias = fire ? 0.0 : -1.0;
  return m;
}

}  // namespace adainfer
