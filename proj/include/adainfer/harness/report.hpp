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

#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "adainfer/core/error.hpp"
#include "adainfer/harness/eval.hpp"

namespace adainfer {

enum class ReportFormat { kTable, kJson, kCsv };

inline ReportFormat report_format_from_name(const std::string& name) {
  if (name == "table") return ReportFormat::kTable;
  if (name == "json") return ReportFormat::kJson;
  if (name == "csv") return ReportFormat::kCsv;
  throw_invalid("unknown report format: " + name);
}

/// Two-decimal presentation, truncated toward zero (35.715 -> "35.71").
inline std::string fixed2(double x) {
  const double guard = x >= 0 ? 1e-9 : -1e-9;
  const double t = std::trunc((x + guard) * 100.0) / 100.0;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", t);
  return buf;
}

inline std::string exact(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json j = {{"task_tag", r.task_tag},
                      {"num_layers", r.num_layers},
                      {"num_instances", r.num_instances},
                      {"accuracy", r.accuracy},
                      {"dense_accuracy", r.dense_accuracy},
                      {"avg_exit_layer", r.avg_exit_layer},
                      {"exit_layer_variance", r.exit_layer_variance},
                      {"pruning_ratio", r.pruning_ratio},
                      {"flops_ratio", r.flops_ratio}};
  if (r.wall_clock)
    j["wall_clock"] = {{"dense_wall_time", r.wall_clock->dense_seconds},
                       {"adaptive_wall_time", r.wall_clock->adaptive_seconds},
                       {"speedup", r.wall_clock->speedup}};
  else
    j["wall_clock"] = nullptr;
  return j;
}

inline EvalReport report_from_json(const nlohmann::json& j) {
  try {
    EvalReport r;
    r.task_tag = j.at("task_tag").get<std::string>();
    r.num_layers = j.at("num_layers").get<int>();
    r.num_instances = j.at("num_instances").get<std::size_t>();
    r.accuracy = j.at("accuracy").get<double>();
    r.dense_accuracy = j.at("dense_accuracy").get<double>();
    r.avg_exit_layer = j.at("avg_exit_layer").get<double>();
    r.exit_layer_variance = j.at("exit_layer_variance").get<double>();
    r.pruning_ratio = j.at("pruning_ratio").get<double>();
    r.flops_ratio = j.at("flops_ratio").get<double>();
    if (j.contains("wall_clock") && !j["wall_clock"].is_null()) {
      const auto& w = j["wall_clock"];
      r.wall_clock = WallClock{w.at("dense_wall_time").get<double>(),
                               w.at("adaptive_wall_time").get<double>(),
                               w.at("speedup").get<double>()};
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::kParse, std::string("report: ") + e.what());
  }
}

/// CSV column order (fixed).
inline constexpr const char* kReportCsvHeader =
    "task_tag,num_layers,num_instances,accuracy,dense_accuracy,avg_exit_layer,"
    "exit_layer_variance,pruning_ratio,flops_ratio,dense_wall_time,"
    "adaptive_wall_time,speedup";

inline std::string report_render(const std::vector<EvalReport>& reports, ReportFormat format) {
  std::ostringstream os;
  switch (format) {
    case ReportFormat::kJson: {
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& r : reports) arr.push_back(report_to_json(r));
      os << arr.dump(2) << '\n';
      break;
    }
    case ReportFormat::kCsv: {
      os << kReportCsvHeader << '\n';
      for (const auto& r : reports) {
        os << r.task_tag << ',' << r.num_layers << ',' << r.num_instances << ','
           << exact(r.accuracy) << ',' << exact(r.dense_accuracy) << ','
           << exact(r.avg_exit_layer) << ',' << exact(r.exit_layer_variance) << ','
           << exact(r.pruning_ratio) << ',' << exact(r.flops_ratio) << ',';
        if (r.wall_clock)
          os << exact(r.wall_clock->dense_seconds) << ',' << exact(r.wall_clock->adaptive_seconds)
             << ',' << exact(r.wall_clock->speedup);
        else
          os << ",,";
        os << '\n';
      }
      break;
    }
    case ReportFormat::kTable: {
      char line[256];
      std::snprintf(line, sizeof line, "%-12s %8s %8s %8s %8s %8s %8s %9s %9s %8s\n", "Task",
                    "Acc", "DenseAcc", "#Avg.L", "Var", "P.Ratio", "FLOPs", "Dense(s)",
                    "Ada(s)", "Speedup");
      os << line;
      for (const auto& r : reports) {
        const std::string dense_s = r.wall_clock ? fixed2(r.wall_clock->dense_seconds) : "-";
        const std::string ada_s = r.wall_clock ? fixed2(r.wall_clock->adaptive_seconds) : "-";
        const std::string speed = r.wall_clock ? fixed2(r.wall_clock->speedup) + "x" : "-";
        std::snprintf(line, sizeof line, "%-12s %8s %8s %8s %8s %8s %8s %9s %9s %8s\n",
                      r.task_tag.c_str(), fixed2(100.0 * r.accuracy).c_str(),
                      fixed2(100.0 * r.dense_accuracy).c_str(), fixed2(r.avg_exit_layer).c_str(),
                      fixed2(r.exit_layer_variance).c_str(), fixed2(100.0 * r.pruning_ratio).c_str(),
                      fixed2(100.0 * r.flops_ratio).c_str(), dense_s.c_str(), ada_s.c_str(),
                      speed.c_str());
        os << line;
      }
      break;
    }
  }
  return os.str();
}

inline std::string report_render(const EvalReport& report, ReportFormat format) {
  if (format == ReportFormat::kJson) return report_to_json(report).dump(2) + "\n";
  return report_render(std::vector<EvalReport>{report}, format);
}

/// Accepts a single report object or an array of them.
inline std::vector<EvalReport> reports_from_json(const nlohmann::json& j) {
  std::vector<EvalReport> out;
  if (j.is_array())
    for (const auto& x : j) out.push_back(report_from_json(x));
  else
    out.push_back(report_from_json(j));
  return out;
}

}  // namespace adainfer
