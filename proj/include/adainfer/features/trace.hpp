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
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "adainfer/core/error.hpp"
#include "adainfer/features/features.hpp"
#include "adainfer/model/forward.hpp"

namespace adainfer {

// Trace JSONL, version 1. Line 1 is a header object
//   {"format":"adainfer-trace","version":1,"num_layers":L,
//    "vocab_size":V,"model_id":"..."}
// and every following line is one TraceRecord with exactly the field names
// of the struct below. gold_target is null when the instance is unlabeled.

inline constexpr const char* kTraceFormat = "adainfer-trace";
inline constexpr int kTraceVersion = 1;

struct TraceHeader {
  int num_layers = 0;
  int vocab_size = 0;
  std::string model_id;

  bool operator==(const TraceHeader&) const = default;
};

struct TraceRecord {
  std::string instance_id;
  std::string task_tag;
  int num_layers = 0;
  std::vector<double> gap, top_prob, cos_attn, cos_mlp, cos_hidden;
  std::vector<TokenId> argmax;
  TokenId final_prediction = 0;
  std::optional<TokenId> gold_target;

  bool operator==(const TraceRecord&) const = default;
};

struct TraceFile {
  TraceHeader header;
  std::vector<TraceRecord> records;
};

struct TraceViolation {
  std::size_t line = 0;  // 1-based line in the file; 0 when not file-backed
  std::string field;
  std::string message;
};

inline TraceRecord make_trace(std::string instance_id, std::string task_tag,
                              std::span<const BlockSnapshot> snapshots,
                              std::optional<TokenId> gold,
                              const FeatureOptions& options = {},
                              std::span<const double> embedding_last = {}) {
  require(!snapshots.empty(), "trace: no snapshots");
  TraceRecord r;
  r.instance_id = std::move(instance_id);
  r.task_tag = std::move(task_tag);
  r.num_layers = static_cast<int>(snapshots.size());
  for (const auto& fv : extract_all(snapshots, options, embedding_last)) {
    r.gap.push_back(fv.gap);
    r.top_prob.push_back(fv.top_prob);
    r.cos_attn.push_back(fv.cos_attn);
    r.cos_mlp.push_back(fv.cos_mlp);
    r.cos_hidden.push_back(fv.cos_hidden);
  }
  for (const auto& s : snapshots)
    r.argmax.push_back(static_cast<TokenId>(s.prediction()));
  r.final_prediction = r.argmax.back();
  r.gold_target = gold;
  return r;
}

/// Per-layer FeatureVectors stored in a (validated) record.
inline std::vector<FeatureVector> trace_features(const TraceRecord& r) {
  std::vector<FeatureVector> out(static_cast<std::size_t>(r.num_layers));
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k].layer_index = static_cast<int>(k) + 1;
    out[k].gap = r.gap[k];
    out[k].top_prob = r.top_prob[k];
    out[k].cos_attn = r.cos_attn[k];
    out[k].cos_mlp = r.cos_mlp[k];
    out[k].cos_hidden = r.cos_hidden[k];
  }
  return out;
}

inline nlohmann::json trace_header_to_json(const TraceHeader& h) {
  return {{"format", kTraceFormat},
          {"version", kTraceVersion},
          {"num_layers", h.num_layers},
          {"vocab_size", h.vocab_size},
          {"model_id", h.model_id}};
}

inline nlohmann::json trace_to_json(const TraceRecord& r) {
  nlohmann::json j = {{"instance_id", r.instance_id},
                      {"task_tag", r.task_tag},
                      {"num_layers", r.num_layers},
                      {"gap", r.gap},
                      {"top_prob", r.top_prob},
                      {"cos_attn", r.cos_attn},
                      {"cos_mlp", r.cos_mlp},
                      {"cos_hidden", r.cos_hidden},
                      {"argmax", r.argmax},
                      {"final_prediction", r.final_prediction}};
  j["gold_target"] = r.gold_target ? nlohmann::json(*r.gold_target) : nlohmann::json();
  return j;
}

/// Structural parse only; value checks live in validate_trace_record().
inline TraceRecord trace_from_json(const nlohmann::json& j) {
  try {
    TraceRecord r;
    r.instance_id = j.at("instance_id").get<std::string>();
    r.task_tag = j.at("task_tag").get<std::string>();
    r.num_layers = j.at("num_layers").get<int>();
    r.gap = j.at("gap").get<std::vector<double>>();
    r.top_prob = j.at("top_prob").get<std::vector<double>>();
    r.cos_attn = j.at("cos_attn").get<std::vector<double>>();
    r.cos_mlp = j.at("cos_mlp").get<std::vector<double>>();
    r.cos_hidden = j.at("cos_hidden").get<std::vector<double>>();
    r.argmax = j.at("argmax").get<std::vector<TokenId>>();
    r.final_prediction = j.at("final_prediction").get<TokenId>();
    const auto& gold = j.at("gold_target");
    if (!gold.is_null()) r.gold_target = gold.get<TokenId>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::kParse, std::string("trace record: ") + e.what());
  }
}

inline TraceHeader trace_header_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != kTraceFormat)
      throw Error(ErrorCategory::kParse, "trace header: format must be adainfer-trace");
    if (j.at("version") != kTraceVersion)
      throw Error(ErrorCategory::kParse, "trace header: unsupported version");
    TraceHeader h;
    h.num_layers = j.at("num_layers").get<int>();
    h.vocab_size = j.at("vocab_size").get<int>();
    h.model_id = j.at("model_id").get<std::string>();
    return h;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::kParse, std::string("trace header: ") + e.what());
  }
}

/// Range slack for values that may have passed through float32.
inline constexpr double kTraceSlack = 1e-6;

inline std::vector<TraceViolation> validate_trace_record(
    const TraceRecord& r, const TraceHeader& header, std::size_t line = 0) {
  std::vector<TraceViolation> out;
  auto fail = [&](std::string field, std::string message) {
    out.push_back({line, std::move(field), std::move(message)});
  };
  if (r.num_layers != header.num_layers)
    fail("num_layers", "does not match header num_layers");
  const auto n = static_cast<std::size_t>(std::max(r.num_layers, 0));
  auto check_len = [&](const char* name, std::size_t size) {
    if (size != n)
      fail(name, "length " + std::to_string(size) + " != num_layers " +
                     std::to_string(n));
    return size == n;
  };
  const bool gap_ok = check_len("gap", r.gap.size());
  const bool top_ok = check_len("top_prob", r.top_prob.size());
  check_len("cos_attn", r.cos_attn.size());
  check_len("cos_mlp", r.cos_mlp.size());
  check_len("cos_hidden", r.cos_hidden.size());
  const bool argmax_ok = check_len("argmax", r.argmax.size());

  auto check_range = [&](const char* name, const std::vector<double>& v,
                         double lo, double hi) {
    for (std::size_t k = 0; k < v.size(); ++k)
      if (!std::isfinite(v[k]) || v[k] < lo - kTraceSlack || v[k] > hi + kTraceSlack) {
        fail(name, "layer " + std::to_string(k + 1) + " value out of range");
        return;
      }
  };
  check_range("gap", r.gap, 0.0, 1.0);
  check_range("top_prob", r.top_prob, 0.0, 1.0);
  check_range("cos_attn", r.cos_attn, -1.0, 1.0);
  check_range("cos_mlp", r.cos_mlp, -1.0, 1.0);
  check_range("cos_hidden", r.cos_hidden, -1.0, 1.0);
  if (gap_ok && top_ok)
    for (std::size_t k = 0; k < n; ++k)
      if (r.gap[k] > r.top_prob[k] + kTraceSlack) {
        fail("gap", "layer " + std::to_string(k + 1) + " gap exceeds top_prob");
        break;
      }
  const auto vocab = static_cast<TokenId>(std::max(header.vocab_size, 0));
  for (TokenId t : r.argmax)
    if (t >= vocab) {
      fail("argmax", "token id out of vocabulary");
      break;
    }
  if (argmax_ok && n > 0 && r.final_prediction != r.argmax.back())
    fail("final_prediction", "differs from last argmax entry");
  if (r.gold_target && *r.gold_target >= vocab)
    fail("gold_target", "token id out of vocabulary");
  return out;
}

/// Parses and validates a trace stream. Structural problems on a line are
/// reported as violations of field "<line>" rather than thrown.
inline std::vector<TraceViolation> validate_trace_stream(std::istream& in,
                                                         TraceFile* parsed = nullptr) {
  std::vector<TraceViolation> out;
  std::string line;
  std::size_t lineno = 0;
  TraceFile file;
  if (!std::getline(in, line)) {
    out.push_back({1, "header", "missing header line"});
    return out;
  }
  ++lineno;
  try {
    file.header = trace_header_from_json(nlohmann::json::parse(line));
  } catch (const std::exception& e) {
    out.push_back({1, "header", e.what()});
    return out;
  }
  if (file.header.num_layers < 1) out.push_back({1, "num_layers", "must be >= 1"});
  if (file.header.vocab_size < 2) out.push_back({1, "vocab_size", "must be >= 2"});
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      TraceRecord r = trace_from_json(nlohmann::json::parse(line));
      auto v = validate_trace_record(r, file.header, lineno);
      out.insert(out.end(), v.begin(), v.end());
      file.records.push_back(std::move(r));
    } catch (const std::exception& e) {
      out.push_back({lineno, "record", e.what()});
    }
  }
  if (parsed) *parsed = std::move(file);
  return out;
}

inline std::vector<TraceViolation> validate_trace_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::kIo, "cannot read " + path);
  return validate_trace_stream(in);
}

inline std::string format_violation(const TraceViolation& v) {
  std::ostringstream os;
  os << "line " << v.line << ": " << v.field << ": " << v.message;
  return os.str();
}

inline TraceFile read_trace_stream(std::istream& in) {
  TraceFile file;
  const auto violations = validate_trace_stream(in, &file);
  if (!violations.empty())
    throw Error(ErrorCategory::kParse,
                "trace: " + format_violation(violations.front()) + " (" +
                    std::to_string(violations.size()) + " violation(s))");
  return file;
}

inline TraceFile read_trace_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::kIo, "cannot read " + path);
  return read_trace_stream(in);
}

inline void write_trace_stream(std::ostream& out, const TraceFile& file) {
  out << trace_header_to_json(file.header).dump() << '\n';
  for (const auto& r : file.records) out << trace_to_json(r).dump() << '\n';
}

inline void write_trace_file(const std::string& path, const TraceFile& file) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCategory::kIo, "cannot write " + path);
  write_trace_stream(out, file);
}

}  // namespace adainfer
