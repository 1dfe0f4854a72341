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

#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "adainfer/core/error.hpp"
#include "adainfer/model/corpus.hpp"

namespace adainfer {

/// "Q: x\nA: y\n\n" per demonstration, then "Q: query\nA:".
inline std::string few_shot_prompt(const std::vector<std::pair<std::string, std::string>>& shots,
                                   const std::string& query) {
  std::string out;
  for (const auto& [x, y] : shots) out += "Q: " + x + "\nA: " + y + "\n\n";
  out += "Q: " + query + "\nA:";
  return out;
}

/// Prompt file: one instance per line, whitespace-separated token ids,
/// optionally followed by a tab and the gold token id. Blank lines are
/// skipped. Ids must lie in [0, vocab_size).
inline std::vector<Instance> read_prompts(std::istream& in, int vocab_size) {
  std::vector<Instance> out;
  std::string line;
  std::size_t line_no = 0;
  auto token = [&](const std::string& text) {
    std::size_t used = 0;
    long long v = -1;
    try {
      v = std::stoll(text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != text.size() || v < 0 || v >= vocab_size)
      throw Error(ErrorCategory::kParse, "prompts line " + std::to_string(line_no) +
                                             ": bad token id '" + text + "'");
    return static_cast<TokenId>(v);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto tab = line.find('\t');
    Instance inst;
    std::istringstream prompt(line.substr(0, tab));
    for (std::string t; prompt >> t;) inst.tokens.push_back(token(t));
    if (inst.tokens.empty())
      throw Error(ErrorCategory::kParse, "prompts line " + std::to_string(line_no) + ": empty prompt");
    if (tab != std::string::npos) {
      std::istringstream gold(line.substr(tab + 1));
      std::string g, extra;
      if (gold >> g) inst.gold = token(g);
      if (gold >> extra)
        throw Error(ErrorCategory::kParse,
                    "prompts line " + std::to_string(line_no) + ": gold must be one token id");
    }
    out.push_back(std::move(inst));
  }
  return out;
}

inline std::vector<Instance> read_prompts_file(const std::string& path, int vocab_size) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::kIo, "cannot read " + path);
  return read_prompts(in, vocab_size);
}

}  // namespace adainfer
