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

#include <stdexcept>
#include <string>
#include <string_view>

namespace adainfer {

/// Machine-readable error classes. The CLI maps each to a distinct exit code.
enum class ErrorCategory {
  kInvalidInput,
  kDegenerateData,
  kTrainingFailure,
  kIo,
  kParse,
};

inline std::string_view category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::kInvalidInput: return "invalid_input";
    case ErrorCategory::kDegenerateData: return "degenerate_data";
    case ErrorCategory::kTrainingFailure: return "training_failure";
    case ErrorCategory::kIo: return "io";
    case ErrorCategory::kParse: return "parse";
  }
  return "unknown";
}

inline int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::kInvalidInput: return 2;
    case ErrorCategory::kDegenerateData: return 3;
    case ErrorCategory::kTrainingFailure: return 4;
    case ErrorCategory::kIo: return 5;
    case ErrorCategory::kParse: return 6;
  }
  return 1;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] inline void throw_invalid(const std::string& message) {
  throw Error(ErrorCategory::kInvalidInput, message);
}

inline void require(bool condition, std::string_view message) {
  if (!condition) throw_invalid(std::string(message));
}

}  // namespace adainfer
