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
#include <sstream>
#include <string>
#include <vector>

#include "adainfer/core/error.hpp"
#include "adainfer/features/features.hpp"
#include "adainfer/features/trace.hpp"

namespace adainfer {

struct FeatureStats {
  double mean = 0.0;
  double p10 = 0.0;
  double median = 0.0;
  double p90 = 0.0;
};

struct TrajectoryRow {
  int layer_index = 0;
  std::array<FeatureStats, 5> stats;  // indexed like kAllFeatures

  const FeatureStats& operator[](FeatureName f) const {
    return stats[static_cast<std::size_t>(f)];
  }
};

/// Linear-interpolation quantile of an already sorted sample.
inline double sorted_quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Per-layer mean and 10/50/90th percentiles of every feature.
inline std::vector<TrajectoryRow> feature_trajectory_report(
    const std::vector<TraceRecord>& traces) {
  require(!traces.empty(), "trajectory: no traces");
  const int layers = traces.front().num_layers;
  for (const auto& t : traces)
    require(t.num_layers == layers, "trajectory: traces have mixed num_layers");
  std::vector<TrajectoryRow> rows(static_cast<std::size_t>(layers));
  std::vector<std::vector<FeatureVector>> per_trace;
  per_trace.reserve(traces.size());
  for (const auto& t : traces) per_trace.push_back(trace_features(t));
  std::vector<double> sample(traces.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    rows[k].layer_index = static_cast<int>(k) + 1;
    for (FeatureName f : kAllFeatures) {
      double total = 0.0;
      for (std::size_t i = 0; i < traces.size(); ++i) {
        sample[i] = feature_value(per_trace[i][k], f);
        total += sample[i];
      }
      std::vector<double> sorted = sample;
      std::sort(sorted.begin(), sorted.end());
      auto& s = rows[k].stats[static_cast<std::size_t>(f)];
      s.mean = total / static_cast<double>(traces.size());
      s.p10 = sorted_quantile(sorted, 0.1);
      s.median = sorted_quantile(sorted, 0.5);
      s.p90 = sorted_quantile(sorted, 0.9);
    }
  }
  return rows;
}

/// Plot-ready CSV: layer, then <feature>_{mean,p10,p50,p90} per feature.
inline std::string trajectory_csv(const std::vector<TrajectoryRow>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << "layer";
  for (FeatureName f : kAllFeatures) {
    const auto n = feature_name(f);
    os << ',' << n << "_mean," << n << "_p10," << n << "_p50," << n << "_p90";
  }
  os << '\n';
  for (const auto& r : rows) {
    os << r.layer_index;
    for (FeatureName f : kAllFeatures) {
      const auto& s = r[f];
      os << ',' << s.mean << ',' << s.p10 << ',' << s.median << ',' << s.p90;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace adainfer
