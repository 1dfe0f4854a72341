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

#include "adainfer/core/error.hpp"
#include "adainfer/features/features.hpp"

namespace adainfer {

struct GapRule {
  double threshold = 0.8;

  void validate() const {
    require(threshold >= 0.0 && threshold <= 1.0,
            "gap rule: threshold must lie in [0, 1]");
  }
};

/// Strict: fires only when gap > threshold.
inline bool gap_rule_decide(const GapRule& rule, const FeatureVector& fv) {
  return fv.gap > rule.threshold;
}

}  // namespace adainfer
