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

#include <chrono>
#include <exception>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "adainfer/core/error.hpp"
#include "adainfer/core/parallel.hpp"
#include "adainfer/cost/cost_model.hpp"
#include "adainfer/features/trace.hpp"
#include "adainfer/model/corpus.hpp"
#include "adainfer/model/forward.hpp"
#include "adainfer/runtime/adaptive.hpp"

namespace adainfer {

struct WallClock {
  double dense_seconds = 0.0;
  double adaptive_seconds = 0.0;
  double speedup = 0.0;  // dense / adaptive

  bool operator==(const WallClock&) const = default;
};

struct EvalReport {
  std::string task_tag;
  int num_layers = 0;
  std::size_t num_instances = 0;
  double accuracy = 0.0;
  double dense_accuracy = 0.0;
  double avg_exit_layer = 0.0;
  double exit_layer_variance = 0.0;  // population variance
  double pruning_ratio = 0.0;
  double flops_ratio = 0.0;
  std::optional<WallClock> wall_clock;  // never part of deterministic output

  bool operator==(const EvalReport&) const = default;
};

/// Per-instance result of one evaluation run.
struct InstanceResult {
  int exit_layer = 0;
  TokenId adaptive_prediction = 0;
  TokenId dense_prediction = 0;
  std::optional<TokenId> gold;
};

/// Aggregates per-instance results. `cost` supplies h, s and V; its layer
/// count is forced to `num_layers`.
inline EvalReport summarize(const std::string& tag, int num_layers,
                            const std::vector<InstanceResult>& results,
                            CostParams cost) {
  require(!results.empty(), "eval: no instances");
  EvalReport r;
  r.task_tag = tag;
  r.num_layers = num_layers;
  r.num_instances = results.size();
  std::size_t hits = 0, dense_hits = 0;
  double sum = 0.0;
  for (const auto& x : results) {
    require(x.gold.has_value(), "eval: unlabeled instance (gold target required)");
    hits += x.adaptive_prediction == *x.gold ? 1 : 0;
    dense_hits += x.dense_prediction == *x.gold ? 1 : 0;
    sum += x.exit_layer;
  }
  const double n = static_cast<double>(results.size());
  r.accuracy = hits / n;
  r.dense_accuracy = dense_hits / n;
  r.avg_exit_layer = sum / n;
  double var = 0.0;
  for (const auto& x : results)
    var += (x.exit_layer - r.avg_exit_layer) * (x.exit_layer - r.avg_exit_layer);
  r.exit_layer_variance = var / n;
  r.pruning_ratio = pruning_ratio(r.avg_exit_layer, num_layers);
  cost.layers = static_cast<std::uint64_t>(num_layers);
  r.flops_ratio = flops_ratio(r.avg_exit_layer, cost);
  return r;
}

inline std::vector<InstanceResult> replay_all(const std::vector<TraceRecord>& traces,
                                              const ExitPolicy& policy) {
  std::vector<InstanceResult> out;
  out.reserve(traces.size());
  for (const auto& t : traces) {
    const auto o = replay_trace(t, policy);
    out.push_back({o.exit_layer, o.predicted_token, t.final_prediction, t.gold_target});
  }
  return out;
}

/// Model-free evaluation over recorded traces.
inline EvalReport run_eval(const std::vector<TraceRecord>& traces,
                           const ExitPolicy& policy, const CostParams& cost,
                           const std::string& tag = "all") {
  require(!traces.empty(), "eval: empty trace set");
  const int L = traces.front().num_layers;
  for (const auto& t : traces) {
    require(t.num_layers == L, "eval: traces have mixed num_layers");
    require(t.gold_target.has_value(), "eval: unlabeled trace " + t.instance_id);
  }
  return summarize(tag, L, replay_all(traces, policy), cost);
}

/// One report for the whole set followed by one per task_tag (sorted).
inline std::vector<EvalReport> run_eval_by_tag(const std::vector<TraceRecord>& traces,
                                               const ExitPolicy& policy,
                                               const CostParams& cost) {
  std::vector<EvalReport> out{run_eval(traces, policy, cost, "all")};
  std::map<std::string, std::vector<TraceRecord>> groups;
  for (const auto& t : traces) groups[t.task_tag].push_back(t);
  if (groups.size() > 1)
    for (const auto& [tag, group] : groups) out.push_back(run_eval(group, policy, cost, tag));
  return out;
}

/// Runs the adaptive loop and the dense pass for every instance
/// (parallel across instances, results in corpus order).
inline std::vector<InstanceResult> run_model(const Model& model,
                                             const std::vector<Instance>& corpus,
                                             const ExitPolicy& policy,
                                             unsigned threads = 1) {
  std::vector<InstanceResult> out(corpus.size());
  std::vector<std::exception_ptr> errors(corpus.size());
  parallel_for(corpus.size(), threads, [&](std::size_t i) {
    try {
      const auto o = adainfer_forward(model, corpus[i].tokens, policy);
      out[i] = {o.exit_layer, o.predicted_token,
                forward_dense(model, corpus[i].tokens).prediction, corpus[i].gold};
    } catch (...) {
      errors[i] = std::current_exception();
    }
  });
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

/// Mean prompt length, rounded, as the cost-model sequence length.
inline CostParams corpus_cost_params(const Model& model, const std::vector<Instance>& corpus) {
  double len = 0.0;
  for (const auto& inst : corpus) len += static_cast<double>(inst.tokens.size());
  const auto s = static_cast<std::size_t>(std::max(1.0, std::round(len / corpus.size())));
  return model_cost_params(model.config, s);
}

inline EvalReport run_eval(const Model& model, const std::vector<Instance>& corpus,
                           const ExitPolicy& policy, const std::string& tag = "all",
                           unsigned threads = 1) {
  require(!corpus.empty(), "eval: empty corpus");
  for (const auto& inst : corpus)
    require(inst.gold.has_value(), "eval: unlabeled instance");
  return summarize(tag, model.config.num_layers, run_model(model, corpus, policy, threads),
                   corpus_cost_params(model, corpus));
}

struct WallClockOptions {
  int warmup_iterations = 1;
  int repeats = 5;
};

/// Times the dense pass and the adaptive loop on one thread, batch size 1.
/// Warm-up passes over the dataset are not timed. Each timed repeat visits
/// every instance once and runs both sides back to back on it, alternating
/// which side goes first; a side's time is the sum over instances of its
/// fastest repeat, so short stalls hit neither side's total.
inline WallClock wall_clock_compare(const Model& model, const std::vector<Instance>& corpus,
                                    const ExitPolicy& policy,
                                    const WallClockOptions& options = {}) {
  require(!corpus.empty(), "wall clock: empty dataset");
  require(options.warmup_iterations >= 1, "wall clock: at least one warm-up iteration required");
  require(options.repeats >= 1, "wall clock: repeats must be >= 1");
  volatile std::size_t sink = 0;
  auto dense = [&](const Instance& inst) {
    sink = sink + forward_dense(model, inst.tokens).prediction;
  };
  auto adaptive = [&](const Instance& inst) {
    sink = sink + adainfer_forward(model, inst.tokens, policy).predicted_token;
  };
  auto time = [](auto&& f, const Instance& inst) {
    const auto t0 = std::chrono::steady_clock::now();
    f(inst);
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  for (int i = 0; i < options.warmup_iterations; ++i) {
    for (const auto& inst : corpus) dense(inst);
    for (const auto& inst : corpus) adaptive(inst);
  }
  std::vector<double> best_dense(corpus.size(), 1e300), best_adaptive(corpus.size(), 1e300);
  for (int r = 0; r < options.repeats; ++r) {
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      double d = 0.0, a = 0.0;
      if ((i + static_cast<std::size_t>(r)) % 2 == 0) {
        d = time(dense, corpus[i]);
        a = time(adaptive, corpus[i]);
      } else {
        a = time(adaptive, corpus[i]);
        d = time(dense, corpus[i]);
      }
      best_dense[i] = std::min(best_dense[i], d);
      best_adaptive[i] = std::min(best_adaptive[i], a);
    }
  }
  WallClock w;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    w.dense_seconds += best_dense[i];
    w.adaptive_seconds += best_adaptive[i];
  }
  w.speedup = w.dense_seconds / w.adaptive_seconds;
  return w;
}

/// Static baseline over a model: every instance runs the first
/// `keep_layers` blocks.
inline EvalReport run_truncated_eval(const Model& model, const std::vector<Instance>& corpus,
                                     int keep_layers, const std::string& tag = "all",
                                     unsigned threads = 1) {
  require(!corpus.empty(), "eval: empty corpus");
  for (const auto& inst : corpus)
    require(inst.gold.has_value(), "eval: unlabeled instance");
  std::vector<InstanceResult> out(corpus.size());
  std::vector<std::exception_ptr> errors(corpus.size());
  parallel_for(corpus.size(), threads, [&](std::size_t i) {
    try {
      const auto t = truncated_forward(model, corpus[i].tokens, keep_layers);
      out[i] = {t.layers_used, t.prediction, forward_dense(model, corpus[i].tokens).prediction,
                corpus[i].gold};
    } catch (...) {
      errors[i] = std::current_exception();
    }
  });
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return summarize(tag, model.config.num_layers, out, corpus_cost_params(model, corpus));
}

/// Static baseline over traces: the prediction is the recorded argmax at
/// layer `keep_layers`.
inline EvalReport run_truncated_eval(const std::vector<TraceRecord>& traces, int keep_layers,
                                     const CostParams& cost, const std::string& tag = "all") {
  require(!traces.empty(), "eval: empty trace set");
  const int L = traces.front().num_layers;
  require(keep_layers >= 1 && keep_layers <= L, "truncated: keep_layers must lie in [1, L]");
  std::vector<InstanceResult> out;
  out.reserve(traces.size());
  for (const auto& t : traces) {
    require(t.num_layers == L, "eval: traces have mixed num_layers");
    require(t.gold_target.has_value(), "eval: unlabeled trace " + t.instance_id);
    out.push_back({keep_layers, t.argmax[static_cast<std::size_t>(keep_layers - 1)],
                   t.final_prediction, t.gold_target});
  }
  return summarize(tag, L, out, cost);
}

/// Records one trace per instance from the instrumented forward pass.
/// Instance ids are "<prefix><index>".
inline std::vector<TraceRecord> capture_traces(const Model& model,
                                               const std::vector<Instance>& corpus,
                                               const std::string& task_tag,
                                               const std::string& id_prefix = "",
                                               const FeatureOptions& options = {}) {
  require(!corpus.empty(), "capture: empty corpus");
  std::vector<TraceRecord> out;
  out.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    ForwardPass pass(model, corpus[i].tokens);
    std::vector<BlockSnapshot> snaps;
    while (!pass.finished()) snaps.push_back(pass.step());
    out.push_back(make_trace(id_prefix + std::to_string(i), task_tag, snaps, corpus[i].gold,
                             options, pass.embedding_last()));
  }
  return out;
}

}  // namespace adainfer
