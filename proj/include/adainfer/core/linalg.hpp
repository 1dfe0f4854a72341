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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "adainfer/core/error.hpp"

namespace adainfer {

using Vector = std::vector<double>;

/// Dense row-major matrix. A weight matrix of shape (out x in) maps an
/// input vector of length `in` to an output of length `out`.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data[r * cols + c];
  }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }

  bool operator==(const Matrix&) const = default;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// out = W x
inline void matvec(const Matrix& w, std::span<const double> x,
                   std::span<double> out) {
  for (std::size_t r = 0; r < w.rows; ++r) out[r] = dot(w.row(r), x);
}

inline Vector matvec(const Matrix& w, std::span<const double> x) {
  Vector out(w.rows);
  matvec(w, x, out);
  return out;
}

/// out += W^T y
inline void matvec_transposed_add(const Matrix& w, std::span<const double> y,
                                  std::span<double> out) {
  for (std::size_t r = 0; r < w.rows; ++r) {
    const double yr = y[r];
    if (yr == 0.0) continue;
    const auto wr = w.row(r);
    for (std::size_t c = 0; c < w.cols; ++c) out[c] += yr * wr[c];
  }
}

/// G += y x^T
inline void outer_add(Matrix& g, std::span<const double> y,
                      std::span<const double> x) {
  for (std::size_t r = 0; r < g.rows; ++r) {
    const double yr = y[r];
    if (yr == 0.0) continue;
    auto gr = g.row(r);
    for (std::size_t c = 0; c < g.cols; ++c) gr[c] += yr * x[c];
  }
}

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

/// Max-subtracted softmax. Throws kInvalidInput on empty or non-finite input.
inline void softmax_into(std::span<const double> logits, std::span<double> out) {
  require(!logits.empty(), "softmax: empty input");
  require(out.size() == logits.size(), "softmax: output length mismatch");
  require(all_finite(logits), "softmax: non-finite logit");
  const double mx = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    total += out[i];
  }
  for (double& p : out) p /= total;
}

inline Vector softmax(std::span<const double> logits) {
  Vector out(logits.size());
  softmax_into(logits, out);
  return out;
}

/// Index of the largest entry; the lowest index wins ties.
inline std::size_t argmax(std::span<const double> v) {
  require(!v.empty(), "argmax: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

inline double log_sum_exp(std::span<const double> v) {
  const double mx = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(mx)) return mx;
  double total = 0.0;
  for (double x : v) total += std::exp(x - mx);
  return mx + std::log(total);
}

inline double log_add_exp(double a, double b) {
  const double mx = std::max(a, b);
  if (!std::isfinite(mx)) return mx;
  return mx + std::log(std::exp(a - mx) + std::exp(b - mx));
}

}  // namespace adainfer
