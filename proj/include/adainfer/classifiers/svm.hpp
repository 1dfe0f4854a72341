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
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "adainfer/core/error.hpp"
#include "adainfer/core/linalg.hpp"
#include "adainfer/core/rng.hpp"
#include "adainfer/features/features.hpp"
#include "adainfer/features/labels.hpp"

namespace adainfer {

enum class LearningRateSchedule { kConstant, kInverseScaling };

struct SvmHyperparams {
  double C = 1.0;
  int epochs = 50;
  double learning_rate = 1.0;
  LearningRateSchedule schedule = LearningRateSchedule::kInverseScaling;
  bool class_weighting = true;
  std::uint64_t seed = 0;
};

struct SvmModel {
  Vector weights;
  double bias = 0.0;
  std::vector<FeatureName> features = base_features();
  SvmHyperparams hyperparams;

  void validate() const {
    require(weights.size() == features.size(),
            "svm: weight length differs from feature mask");
    require(all_finite(weights) && std::isfinite(bias), "svm: non-finite parameter");
  }
};

struct SvmPrediction {
  int label = 0;
  double margin = 0.0;
};

struct SvmTrainReport {
  std::vector<double> epoch_objective;  // entry 0 is the initial objective
  double training_accuracy = 0.0;
};

/// w.x + b on an already selected feature row.
inline double svm_margin(const SvmModel& m, std::span<const double> row) {
  require(row.size() == m.weights.size(), "svm: feature row has wrong length");
  return dot(m.weights, row) + m.bias;
}

/// Fires (label 1) when the margin is >= 0.
inline SvmPrediction svm_predict(const SvmModel& m, std::span<const double> row) {
  const double margin = svm_margin(m, row);
  return {margin >= 0.0 ? 1 : 0, margin};
}

inline SvmPrediction svm_predict(const SvmModel& m, const FeatureVector& fv) {
  return svm_predict(m, select_features(fv, m.features));
}

namespace detail {

struct SvmData {
  std::vector<Vector> rows;
  std::vector<double> y;       // +1 / -1
  std::vector<double> weight;  // per-example cost weight, mean 1
};

inline SvmData svm_data(std::span<const LabeledExample> data,
                        std::span<const FeatureName> features,
                        bool class_weighting) {
  SvmData d;
  std::size_t positives = 0;
  for (const auto& e : data) {
    d.rows.push_back(select_features(e.features, features));
    d.y.push_back(e.label == 1 ? 1.0 : -1.0);
    positives += e.label == 1 ? 1 : 0;
  }
  const std::size_t n = data.size();
  if (positives == 0 || positives == n)
    throw Error(ErrorCategory::kDegenerateData,
                "svm: training data contains a single class");
  const double w_pos = class_weighting ? n / (2.0 * positives) : 1.0;
  const double w_neg = class_weighting ? n / (2.0 * (n - positives)) : 1.0;
  for (double y : d.y) d.weight.push_back(y > 0 ? w_pos : w_neg);
  return d;
}

inline double svm_objective(const Vector& w, double b, double lambda,
                            const SvmData& d) {
  double hinge = 0.0;
  for (std::size_t i = 0; i < d.rows.size(); ++i)
    hinge += d.weight[i] * std::max(0.0, 1.0 - d.y[i] * (dot(w, d.rows[i]) + b));
  return 0.5 * lambda * dot(w, w) + hinge / static_cast<double>(d.rows.size());
}

/// Exact minimizer over b of the weighted hinge term for fixed w. The
/// objective is convex and piecewise linear in b; its slope starts at
/// -sum(a_i, y_i = +1) and rises by a_i at each breakpoint y_i - w.x_i.
/// A flat optimal segment resolves to its midpoint.
inline double optimal_bias(const Vector& w, const SvmData& d) {
  std::vector<std::pair<double, double>> breaks;  // (breakpoint, a_i)
  breaks.reserve(d.rows.size());
  double slope = 0.0;
  for (std::size_t i = 0; i < d.rows.size(); ++i) {
    breaks.emplace_back(d.y[i] - dot(w, d.rows[i]), d.weight[i]);
    if (d.y[i] > 0) slope -= d.weight[i];
  }
  std::sort(breaks.begin(), breaks.end());
  const double tol = 1e-12 * std::abs(slope);
  for (std::size_t k = 0; k < breaks.size(); ++k) {
    slope += breaks[k].second;
    if (slope > tol) return breaks[k].first;
    if (slope >= -tol)
      return k + 1 < breaks.size() ? 0.5 * (breaks[k].first + breaks[k + 1].first)
                                   : breaks[k].first;
  }
  return breaks.back().first;
}

}  // namespace detail

/// Soft-margin linear SVM by primal stochastic subgradient descent on
///   0.5 * lambda * |w|^2 + mean_i a_i * max(0, 1 - y_i (w.x_i + b)),
/// lambda = 1 / (C N), with inverse class-frequency weights a_i when
/// class_weighting is on. The bias is not regularized. Each epoch visits
/// the examples in an order shuffled from `seed`; after the last epoch the
/// bias is re-fitted exactly for the final w.
inline SvmModel svm_train(std::span<const LabeledExample> data,
                          const SvmHyperparams& hp,
                          std::vector<FeatureName> features = base_features(),
                          SvmTrainReport* report = nullptr) {
  require(!data.empty(), "svm: empty training set");
  require(!features.empty(), "svm: empty feature mask");
  require(hp.C > 0.0 && hp.epochs >= 0 && hp.learning_rate > 0.0,
          "svm: bad hyperparameters");
  const auto d = detail::svm_data(data, features, hp.class_weighting);
  const std::size_t n = d.rows.size();
  const double lambda = 1.0 / (hp.C * static_cast<double>(n));

  SvmModel model;
  model.features = std::move(features);
  model.hyperparams = hp;
  model.weights.assign(model.features.size(), 0.0);
  Vector& w = model.weights;
  double& b = model.bias;

  SvmTrainReport local;
  local.epoch_objective.push_back(detail::svm_objective(w, b, lambda, d));

  Rng rng(hp.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::uint64_t t = 0;
  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t i : order) {
      const double eta =
          hp.schedule == LearningRateSchedule::kConstant
              ? hp.learning_rate
              : hp.learning_rate /
                    (1.0 + hp.learning_rate * lambda * static_cast<double>(t));
      ++t;
      const double margin = d.y[i] * (dot(w, d.rows[i]) + b);
      const double shrink = 1.0 - eta * lambda;
      for (double& wj : w) wj *= shrink;
      if (margin < 1.0) {
        const double step = eta * d.weight[i] * d.y[i];
        for (std::size_t j = 0; j < w.size(); ++j) w[j] += step * d.rows[i][j];
        b += step;
      }
    }
    const double obj = detail::svm_objective(w, b, lambda, d);
    if (!std::isfinite(obj))
      throw Error(ErrorCategory::kTrainingFailure, "svm: objective diverged");
    local.epoch_objective.push_back(obj);
  }

  if (hp.epochs > 0) {
    b = detail::optimal_bias(w, d);
    local.epoch_objective.back() = detail::svm_objective(w, b, lambda, d);
  }

  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i)
    if ((svm_margin(model, d.rows[i]) >= 0.0) == (d.y[i] > 0)) ++correct;
  local.training_accuracy = static_cast<double>(correct) / static_cast<double>(n);
  if (report) *report = std::move(local);
  return model;
}

}  // namespace adainfer
