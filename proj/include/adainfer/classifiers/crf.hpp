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

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "adainfer/core/error.hpp"
#include "adainfer/core/linalg.hpp"
#include "adainfer/features/features.hpp"
#include "adainfer/features/labels.hpp"

namespace adainfer {

// Linear-chain CRF over per-layer binary labels (0 = continue, 1 = exit).
//
//   score(y | x) = start[y_1] + sum_t emission[y_t] . x_t
//                + sum_{t>=2} transition[y_{t-1}][y_t]
//
// All inference is in the log domain.

inline constexpr std::size_t kCrfLabels = 2;

/// How a per-layer decision is read off a prefix of the layer sequence.
enum class CrfDecode {
  kPrefixViterbi,  // last label of the max-sum path over the prefix
  kMarginal,       // P(y_last = 1 | prefix) >= marginal_threshold
};

struct CrfHyperparams {
  int epochs = 300;
  double learning_rate = 0.5;
  double l2 = 1e-4;
  bool prefix_training = true;  // fit every prefix of each chain
};

struct CrfModel {
  Matrix emission = Matrix(kCrfLabels, 2);  // labels x features
  Matrix transition = Matrix(kCrfLabels, kCrfLabels);
  Vector start = Vector(kCrfLabels, 0.0);
  std::vector<FeatureName> features = base_features();
  CrfDecode decode = CrfDecode::kPrefixViterbi;
  double marginal_threshold = 0.5;
  CrfHyperparams hyperparams;

  static CrfModel zeros(std::vector<FeatureName> features) {
    CrfModel m;
    m.emission = Matrix(kCrfLabels, features.size());
    m.features = std::move(features);
    return m;
  }

  void validate() const {
    require(emission.rows == kCrfLabels && emission.cols == features.size(),
            "crf: emission shape differs from feature mask");
    require(transition.rows == kCrfLabels && transition.cols == kCrfLabels,
            "crf: transition must be 2x2");
    require(start.size() == kCrfLabels, "crf: start must have 2 entries");
    require(all_finite(emission.data) && all_finite(transition.data) &&
                all_finite(start),
            "crf: non-finite parameter");
  }
};

/// Feature rows (already selected by the mask) for one chain.
using CrfInputs = std::vector<Vector>;

struct CrfSequence {
  CrfInputs x;
  std::vector<int> y;
};

using LabelScores = std::array<double, kCrfLabels>;

inline LabelScores crf_emissions(const CrfModel& m, std::span<const double> x) {
  require(x.size() == m.emission.cols, "crf: feature row has wrong length");
  return {dot(m.emission.row(0), x), dot(m.emission.row(1), x)};
}

inline double crf_sequence_score(const CrfModel& m, const CrfInputs& x,
                                 std::span<const int> y) {
  require(!x.empty() && x.size() == y.size(), "crf: bad sequence");
  double s = m.start[static_cast<std::size_t>(y[0])];
  for (std::size_t t = 0; t < x.size(); ++t) {
    s += crf_emissions(m, x[t])[static_cast<std::size_t>(y[t])];
    if (t > 0)
      s += m.transition(static_cast<std::size_t>(y[t - 1]),
                        static_cast<std::size_t>(y[t]));
  }
  return s;
}

/// Forward log-messages alpha_t(y); log Z = logsumexp(alpha_last).
inline std::vector<LabelScores> crf_forward(const CrfModel& m, const CrfInputs& x) {
  require(!x.empty(), "crf: empty sequence");
  std::vector<LabelScores> alpha(x.size());
  auto e = crf_emissions(m, x[0]);
  for (std::size_t y = 0; y < kCrfLabels; ++y) alpha[0][y] = m.start[y] + e[y];
  for (std::size_t t = 1; t < x.size(); ++t) {
    e = crf_emissions(m, x[t]);
    for (std::size_t y = 0; y < kCrfLabels; ++y)
      alpha[t][y] = e[y] + log_add_exp(alpha[t - 1][0] + m.transition(0, y),
                                       alpha[t - 1][1] + m.transition(1, y));
  }
  return alpha;
}

inline std::vector<LabelScores> crf_backward(const CrfModel& m, const CrfInputs& x) {
  std::vector<LabelScores> beta(x.size(), LabelScores{0.0, 0.0});
  for (std::size_t t = x.size() - 1; t-- > 0;) {
    const auto e = crf_emissions(m, x[t + 1]);
    for (std::size_t y = 0; y < kCrfLabels; ++y)
      beta[t][y] = log_add_exp(m.transition(y, 0) + e[0] + beta[t + 1][0],
                               m.transition(y, 1) + e[1] + beta[t + 1][1]);
  }
  return beta;
}

inline double crf_log_partition(const CrfModel& m, const CrfInputs& x) {
  const auto alpha = crf_forward(m, x);
  return log_add_exp(alpha.back()[0], alpha.back()[1]);
}

/// Per-position marginals P(y_t = y | x).
inline std::vector<LabelScores> crf_marginals(const CrfModel& m, const CrfInputs& x) {
  const auto alpha = crf_forward(m, x);
  const auto beta = crf_backward(m, x);
  const double log_z = log_add_exp(alpha.back()[0], alpha.back()[1]);
  std::vector<LabelScores> out(x.size());
  for (std::size_t t = 0; t < x.size(); ++t)
    for (std::size_t y = 0; y < kCrfLabels; ++y)
      out[t][y] = std::exp(alpha[t][y] + beta[t][y] - log_z);
  return out;
}

struct ViterbiResult {
  std::vector<int> path;
  double score = 0.0;
};

/// Max-sum decoding. On equal scores the lower label wins.
inline ViterbiResult crf_viterbi(const CrfModel& m, const CrfInputs& x) {
  require(!x.empty(), "crf: empty sequence");
  const std::size_t n = x.size();
  std::vector<LabelScores> delta(n);
  std::vector<std::array<int, kCrfLabels>> back(n);
  auto e = crf_emissions(m, x[0]);
  for (std::size_t y = 0; y < kCrfLabels; ++y) delta[0][y] = m.start[y] + e[y];
  for (std::size_t t = 1; t < n; ++t) {
    e = crf_emissions(m, x[t]);
    for (std::size_t y = 0; y < kCrfLabels; ++y) {
      const double from0 = delta[t - 1][0] + m.transition(0, y);
      const double from1 = delta[t - 1][1] + m.transition(1, y);
      back[t][y] = from1 > from0 ? 1 : 0;
      delta[t][y] = e[y] + std::max(from0, from1);
    }
  }
  ViterbiResult r;
  r.path.resize(n);
  int best = delta[n - 1][1] > delta[n - 1][0] ? 1 : 0;
  r.score = delta[n - 1][static_cast<std::size_t>(best)];
  for (std::size_t t = n; t-- > 0;) {
    r.path[t] = best;
    if (t > 0) best = back[t][static_cast<std::size_t>(best)];
  }
  return r;
}

inline CrfInputs crf_inputs(const CrfModel& m, std::span<const FeatureVector> fvs) {
  CrfInputs x;
  x.reserve(fvs.size());
  for (const auto& fv : fvs) x.push_back(select_features(fv, m.features));
  return x;
}

/// Decision for the last position of a layer prefix.
inline int crf_decode_prefix(const CrfModel& m, const CrfInputs& prefix) {
  require(!prefix.empty(), "crf: empty prefix");
  if (m.decode == CrfDecode::kMarginal) {
    const auto alpha = crf_forward(m, prefix);
    const auto& last = alpha.back();
    const double p1 = std::exp(last[1] - log_add_exp(last[0], last[1]));
    return p1 >= m.marginal_threshold ? 1 : 0;
  }
  return crf_viterbi(m, prefix).path.back();
}

inline int crf_decode_prefix(const CrfModel& m, std::span<const FeatureVector> prefix) {
  return crf_decode_prefix(m, crf_inputs(m, prefix));
}

/// log p(y | x) for one chain; adds its gradient into `grad` when non-null.
inline double crf_log_likelihood(const CrfModel& m, const CrfSequence& s,
                                 CrfModel* grad = nullptr) {
  require(!s.x.empty() && s.x.size() == s.y.size(), "crf: bad sequence");
  const auto alpha = crf_forward(m, s.x);
  const double log_z = log_add_exp(alpha.back()[0], alpha.back()[1]);
  const double ll = crf_sequence_score(m, s.x, s.y) - log_z;
  if (!grad) return ll;

  const auto beta = crf_backward(m, s.x);
  const std::size_t n = s.x.size();
  const std::size_t d = m.emission.cols;
  for (std::size_t t = 0; t < n; ++t) {
    const auto yt = static_cast<std::size_t>(s.y[t]);
    for (std::size_t y = 0; y < kCrfLabels; ++y) {
      const double p = std::exp(alpha[t][y] + beta[t][y] - log_z);
      const double coeff = (y == yt ? 1.0 : 0.0) - p;
      for (std::size_t f = 0; f < d; ++f) grad->emission(y, f) += coeff * s.x[t][f];
      if (t == 0) grad->start[y] += coeff;
    }
    if (t == 0) continue;
    const auto e = crf_emissions(m, s.x[t]);
    const auto yp = static_cast<std::size_t>(s.y[t - 1]);
    for (std::size_t a = 0; a < kCrfLabels; ++a)
      for (std::size_t b = 0; b < kCrfLabels; ++b) {
        const double p = std::exp(alpha[t - 1][a] + m.transition(a, b) + e[b] +
                                  beta[t][b] - log_z);
        grad->transition(a, b) += ((a == yp && b == yt) ? 1.0 : 0.0) - p;
      }
  }
  return ll;
}

struct CrfTrainReport {
  std::vector<double> epoch_log_likelihood;  // mean LL; entry 0 is initial
};

inline std::vector<CrfSequence> crf_sequences(
    const std::vector<std::vector<LabeledExample>>& chains,
    std::span<const FeatureName> features) {
  std::vector<CrfSequence> out;
  for (const auto& chain : chains) {
    require(!chain.empty(), "crf: empty chain");
    CrfSequence s;
    for (const auto& ex : chain) {
      s.x.push_back(select_features(ex.features, features));
      s.y.push_back(ex.label);
    }
    out.push_back(std::move(s));
  }
  return out;
}

/// All prefixes 1..n of every chain, in chain order.
inline std::vector<CrfSequence> crf_prefixes(const std::vector<CrfSequence>& sequences) {
  std::vector<CrfSequence> out;
  for (const auto& s : sequences)
    for (std::size_t k = 1; k <= s.x.size(); ++k)
      out.push_back({CrfInputs(s.x.begin(), s.x.begin() + static_cast<std::ptrdiff_t>(k)),
                     std::vector<int>(s.y.begin(), s.y.begin() + static_cast<std::ptrdiff_t>(k))});
  return out;
}

/// Full-batch gradient ascent on mean conditional log-likelihood minus
/// 0.5 * l2 * |theta|^2, starting from zero weights. With prefix_training
/// the objective runs over every prefix of every chain, which matches how
/// the exit loop decodes (the last label of a prefix, without future
/// layers).
inline CrfModel crf_train(const std::vector<CrfSequence>& chains,
                          const CrfHyperparams& hp,
                          std::vector<FeatureName> features = base_features(),
                          CrfTrainReport* report = nullptr) {
  require(!chains.empty(), "crf: no training sequences");
  require(hp.epochs >= 0 && hp.learning_rate > 0.0 && hp.l2 >= 0.0,
          "crf: bad hyperparameters");
  for (const auto& s : chains) {
    require(!s.x.empty() && s.x.size() == s.y.size(), "crf: bad sequence");
    for (const auto& row : s.x)
      require(row.size() == features.size(), "crf: feature row has wrong length");
    for (int y : s.y) require(y == 0 || y == 1, "crf: labels must be 0 or 1");
  }
  const std::vector<CrfSequence> expanded =
      hp.prefix_training ? crf_prefixes(chains) : std::vector<CrfSequence>{};
  const auto& sequences = hp.prefix_training ? expanded : chains;
  CrfModel m = CrfModel::zeros(std::move(features));
  m.hyperparams = hp;
  const double inv_n = 1.0 / static_cast<double>(sequences.size());

  auto mean_ll = [&](const CrfModel& model, CrfModel* grad) {
    double total = 0.0;
    for (const auto& s : sequences) total += crf_log_likelihood(model, s, grad);
    return total * inv_n;
  };
  auto params = [](CrfModel& model) {
    return std::array<std::span<double>, 3>{model.emission.data,
                                            model.transition.data, model.start};
  };

  CrfTrainReport local;
  for (int epoch = 0; epoch <= hp.epochs; ++epoch) {
    CrfModel grad = CrfModel::zeros(m.features);
    const double ll = mean_ll(m, epoch < hp.epochs ? &grad : nullptr);
    local.epoch_log_likelihood.push_back(ll);
    if (epoch == hp.epochs) break;
    auto p = params(m);
    auto g = params(grad);
    for (std::size_t k = 0; k < p.size(); ++k)
      for (std::size_t i = 0; i < p[k].size(); ++i) {
        const double gi = g[k][i] * inv_n - hp.l2 * p[k][i];
        if (!std::isfinite(gi))
          throw Error(ErrorCategory::kTrainingFailure, "crf: non-finite gradient");
        p[k][i] += hp.learning_rate * gi;
      }
  }
  if (report) *report = std::move(local);
  return m;
}

inline CrfModel crf_train(const std::vector<std::vector<LabeledExample>>& chains,
                          const CrfHyperparams& hp,
                          std::vector<FeatureName> features = base_features(),
                          CrfTrainReport* report = nullptr) {
  require(!chains.empty(), "crf: no training sequences");
  auto seqs = crf_sequences(chains, features);
  return crf_train(seqs, hp, std::move(features), report);
}

}  // namespace adainfer
