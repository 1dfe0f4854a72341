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

#include <vector>

#include "adainfer/core/error.hpp"
#include "adainfer/model/corpus.hpp"
#include "adainfer/model/forward.hpp"

namespace adainfer {

/// Fraction of instances whose layer-k probe argmax equals the gold target,
/// for k = 1..L. Entry L equals dense accuracy.
inline std::vector<double> layerwise_accuracy_sweep(
    const std::vector<Instance>& data, const Model& model) {
  require(!data.empty(), "sweep: empty dataset");
  const auto num_layers = static_cast<std::size_t>(model.config.num_layers);
  std::vector<std::size_t> hits(num_layers, 0);
  for (const auto& inst : data) {
    require(inst.gold.has_value(), "sweep: unlabeled instance");
    const auto snaps = forward_instrumented(model, inst.tokens);
    for (std::size_t k = 0; k < num_layers; ++k)
      if (snaps[k].prediction() == *inst.gold) ++hits[k];
  }
  std::vector<double> acc(num_layers);
  for (std::size_t k = 0; k < num_layers; ++k)
    acc[k] = static_cast<double>(hits[k]) / static_cast<double>(data.size());
  return acc;
}

}  // namespace adainfer
