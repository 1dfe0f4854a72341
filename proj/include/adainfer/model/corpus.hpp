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
#include <optional>
#include <vector>

#include "adainfer/core/error.hpp"
#include "adainfer/core/rng.hpp"
#include "adainfer/model/model.hpp"

namespace adainfer {

/// One next-token instance: a token-id prompt and its optional gold answer.
struct Instance {
  std::vector<TokenId> tokens;
  std::optional<TokenId> gold;

  bool operator==(const Instance&) const = default;
};

/// Copy-last-token task: random prompts whose answer is the final token.
inline std::vector<Instance> make_copy_corpus(std::size_t count, int seq_len,
                                              int vocab_size,
                                              std::uint64_t seed) {
  require(count >= 1, "copy corpus: count must be >= 1");
  require(seq_len >= 1 && vocab_size >= 2, "copy corpus: bad shape");
  Rng rng(seed);
  std::vector<Instance> out(count);
  for (auto& inst : out) {
    inst.tokens.resize(static_cast<std::size_t>(seq_len));
    for (auto& t : inst.tokens)
      t = static_cast<TokenId>(rng.uniform_int(static_cast<std::uint64_t>(vocab_size)));
    inst.gold = inst.tokens.back();
  }
  return out;
}

}  // namespace adainfer
