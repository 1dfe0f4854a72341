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

// adainfer command-line harness. Every subcommand reads one config file
// (--config) plus optional --set key.path=value overrides. Failures print
// {"error":{"category":...,"message":...}} on stderr and exit with the
// category's code.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "adainfer.hpp"

namespace {

using namespace adainfer;
using nlohmann::json;

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::kIo, "cannot read " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorCategory::kIo, "sha256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

/// Writes to `path`, or stdout when the path is empty or "-".
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text << std::flush;
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCategory::kIo, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCategory::kIo, "write failed: " + path);
}

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  HarnessConfig cfg;

  void load() { cfg = load_config(config, overrides); }
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "Harness config file (JSON)")->required();
  sub->add_option("--set", c.overrides, "Config override key.path=value (repeatable)");
}

std::vector<Instance> train_corpus(const HarnessConfig& c, int vocab) {
  return make_copy_corpus(c.corpus.train_instances, c.corpus.seq_len, vocab, c.seed + 2);
}

std::vector<Instance> eval_corpus(const HarnessConfig& c, int vocab) {
  return make_copy_corpus(c.corpus.eval_instances, c.corpus.seq_len, vocab, c.seed + 3);
}

std::vector<Instance> split_corpus(const HarnessConfig& c, int vocab, const std::string& split) {
  if (split == "train") return train_corpus(c, vocab);
  if (split == "eval") return eval_corpus(c, vocab);
  throw_invalid("split must be train or eval, got " + split);
}

std::string model_id(const std::string& model_path) {
  return "toy-" + sha256_hex(read_bytes(model_path)).substr(0, 16);
}

// ---- train-toy ------------------------------------------------------------

struct TrainToyArgs {
  Common common;
  std::string out;
};

void run_train_toy(TrainToyArgs& a) {
  a.common.load();
  const auto& c = a.common.cfg;
  const auto data = train_corpus(c, c.model.vocab_size);
  TrainReport report;
  const auto model = train_toy(data, init_model(c.model, c.seed), c.training, &report);
  save_model(model, a.out);
  const auto held_out = eval_corpus(c, c.model.vocab_size);
  const json j = {{"model", a.out},
                  {"steps", c.training.steps},
                  {"initial_loss", report.initial_loss},
                  {"final_loss", report.final_loss},
                  {"train_accuracy", report.train_accuracy},
                  {"eval_dense_accuracy", dense_accuracy(model, held_out)}};
  emit("", j.dump(2) + "\n");
}

// ---- sweep ----------------------------------------------------------------

struct SweepArgs {
  Common common;
  std::string model;
  std::string split = "eval";
  std::string format = "json";
  std::string out;
};

void run_sweep(SweepArgs& a) {
  a.common.load();
  const auto model = load_model(a.model);
  const auto data = split_corpus(a.common.cfg, model.config.vocab_size, a.split);
  const auto acc = layerwise_accuracy_sweep(data, model);
  if (a.format == "csv") {
    std::ostringstream os;
    os << "layer,accuracy\n";
    for (std::size_t k = 0; k < acc.size(); ++k) os << k + 1 << ',' << exact(acc[k]) << '\n';
    emit(a.out, os.str());
  } else if (a.format == "json") {
    emit(a.out, json({{"split", a.split}, {"layer_accuracy", acc}}).dump(2) + "\n");
  } else {
    throw_invalid("sweep: format must be json or csv");
  }
}

// ---- synth ----------------------------------------------------------------

struct SynthArgs {
  Common common;
  std::string out;
  std::string from_model;
  std::string split = "eval";
  std::string tag = "copy";
};

void run_synth(SynthArgs& a) {
  a.common.load();
  const auto& c = a.common.cfg;
  TraceFile file;
  if (a.from_model.empty()) {
    file = synth_trace_file(c.synth);
  } else {
    const auto model = load_model(a.from_model);
    const auto corpus = split_corpus(c, model.config.vocab_size, a.split);
    file.header = {model.config.num_layers, model.config.vocab_size, model_id(a.from_model)};
    file.records = capture_traces(model, corpus, a.tag, a.split + "-", c.feature_options);
  }
  write_trace_file(a.out, file);
  emit("", json({{"traces", a.out},
                 {"records", file.records.size()},
                 {"num_layers", file.header.num_layers},
                 {"model_id", file.header.model_id}})
               .dump(2) +
               "\n");
}

// ---- build-dataset --------------------------------------------------------

struct DatasetArgs {
  Common common;
  std::string traces;
  std::string model;
  std::string split = "train";
  std::string out;
};

void run_build_dataset(DatasetArgs& a) {
  a.common.load();
  const auto& c = a.common.cfg;
  std::vector<LabeledExample> data;
  if (!a.traces.empty()) {
    data = build_dataset(read_trace_file(a.traces).records, c.label_mode);
  } else {
    const auto model = load_model(a.model);
    data = build_dataset(split_corpus(c, model.config.vocab_size, a.split), model, c.label_mode,
                         c.feature_options);
  }
  write_dataset(a.out, data);
  std::size_t positives = 0;
  for (const auto& e : data) positives += e.label == 1 ? 1 : 0;
  emit("", json({{"dataset", a.out},
                 {"label_mode", std::string(reference_mode_name(c.label_mode))},
                 {"examples", data.size()},
                 {"positives", positives}})
               .dump(2) +
               "\n");
}

// ---- train-classifier -----------------------------------------------------

struct ClassifierArgs {
  Common common;
  std::string dataset;
  std::string kind;
  std::string out;
};

void run_train_classifier(ClassifierArgs& a) {
  a.common.load();
  const auto& c = a.common.cfg;
  const std::string kind = a.kind.empty() ? c.classifier.kind : a.kind;
  const auto data = read_dataset(a.dataset);
  require(!data.empty(), "train-classifier: empty dataset");
  TrainingMetadata meta;
  meta.dataset_digest = "sha256:" + sha256_hex(read_bytes(a.dataset));
  meta.num_examples = data.size();
  json summary = {{"kind", kind}, {"examples", data.size()}, {"dataset_digest", meta.dataset_digest}};
  ExitDecider decider;
  if (kind == "svm") {
    meta.seed = c.classifier.svm.seed;
    SvmTrainReport report;
    decider = svm_train(data, c.classifier.svm, c.classifier.features, &report);
    summary["training_accuracy"] = report.training_accuracy;
    summary["final_objective"] = report.epoch_objective.back();
  } else if (kind == "crf") {
    CrfTrainReport report;
    auto m = crf_train(group_sequences(data), c.classifier.crf, c.classifier.features, &report);
    m.decode = c.classifier.crf_decode;
    m.marginal_threshold = c.classifier.crf_marginal_threshold;
    decider = std::move(m);
    summary["final_log_likelihood"] = report.epoch_log_likelihood.back();
  } else if (kind == "gap_rule") {
    decider = GapRule{c.classifier.gap_threshold};
    summary["threshold"] = c.classifier.gap_threshold;
  } else {
    throw_invalid("train-classifier: kind must be svm, crf or gap_rule");
  }
  save_decider(a.out, decider, meta);
  summary["classifier"] = a.out;
  emit("", summary.dump(2) + "\n");
}

// ---- eval -----------------------------------------------------------------

struct EvalArgs {
  Common common;
  std::string traces;
  std::string model;
  std::string prompts;
  std::string classifier;
  std::string policy = "adaptive";
  std::string tag;
  std::vector<int> truncate_last;
  bool by_tag = false;
  bool wall_clock = false;
  unsigned threads = 0;
  std::string format = "json";
  std::string out;
};

ExitPolicy make_policy(const EvalArgs& a, const HarnessConfig& c) {
  ExitPolicy p;
  p.min_exit_layer = c.min_exit_layer;
  p.features = c.feature_options;
  if (a.policy == "adaptive") {
    require(!a.classifier.empty(), "eval: policy adaptive needs --classifier");
    p.decider = load_decider(a.classifier);
  } else if (a.policy == "always_dense") {
    p.decider = AlwaysDense{};
  } else if (a.policy == "oracle") {
    p.decider = OracleLabels{};
  } else if (a.policy == "gap_rule") {
    p.decider = GapRule{c.classifier.gap_threshold};
  } else {
    throw_invalid("eval: policy must be adaptive, always_dense, oracle or gap_rule");
  }
  return p;
}

void run_eval_cmd(EvalArgs& a) {
  a.common.load();
  const auto& c = a.common.cfg;
  const auto format = report_format_from_name(a.format);
  require(a.traces.empty() != a.model.empty(), "eval: give exactly one of --traces or --model");
  const auto policy = make_policy(a, c);
  const unsigned threads = a.threads ? a.threads : c.threads;
  std::vector<EvalReport> reports;
  if (!a.traces.empty()) {
    require(!a.wall_clock, "eval: --wall-clock needs --model");
    require(a.prompts.empty(), "eval: --prompts needs --model");
    const auto traces = read_trace_file(a.traces).records;
    if (a.by_tag) {
      reports = run_eval_by_tag(traces, policy, c.cost);
    } else {
      reports.push_back(run_eval(traces, policy, c.cost, a.tag.empty() ? "all" : a.tag));
    }
    for (int k : a.truncate_last)
      reports.push_back(run_truncated_eval(traces, traces.front().num_layers - k, c.cost,
                                           "drop_last_" + std::to_string(k)));
  } else {
    require(!a.by_tag, "eval: --by-tag needs --traces");
    const auto model = load_model(a.model);
    const auto corpus = a.prompts.empty()
                            ? eval_corpus(c, model.config.vocab_size)
                            : read_prompts_file(a.prompts, model.config.vocab_size);
    reports.push_back(run_eval(model, corpus, policy, a.tag.empty() ? "copy" : a.tag, threads));
    if (a.wall_clock) reports.back().wall_clock = wall_clock_compare(model, corpus, policy, c.wall_clock);
    for (int k : a.truncate_last)
      reports.push_back(run_truncated_eval(model, corpus, model.config.num_layers - k,
                                           "drop_last_" + std::to_string(k), threads));
  }
  emit(a.out, report_render(reports, format));
}

// ---- cost -----------------------------------------------------------------

struct CostArgs {
  Common common;
  double exit_layer = 0.0;
  std::string dataset;
};

void run_cost(CostArgs& a) {
  a.common.load();
  const auto& c = a.common.cfg;
  const double l_prime = a.exit_layer > 0.0   ? a.exit_layer
                         : c.cost_exit_layer > 0 ? c.cost_exit_layer
                                                 : static_cast<double>(c.cost.layers);
  json j = {{"params", cost_params_to_json(c.cost)},
            {"exit_layer", l_prime},
            {"report", cost_report_to_json(cost_report(c.cost, l_prime))}};
  if (!a.dataset.empty()) {
    const auto data = read_dataset(a.dataset);
    require(!data.empty(), "cost: empty dataset");
    const auto chains = group_sequences(data);
    const auto S = (data.size() + chains.size() / 2) / chains.size();
    j["classifier"] = classifier_profile_to_json(classifier_cost_profile(
        c.classifier.kind, data.size(), c.classifier.features.size(), std::max<std::size_t>(S, 1)));
  }
  emit("", j.dump(2) + "\n");
}

// ---- export-report --------------------------------------------------------

struct ExportArgs {
  std::string in;
  std::string format = "table";
  std::string out;
};

void run_export(ExportArgs& a) {
  const auto format = report_format_from_name(a.format);
  json j;
  try {
    j = json::parse(read_bytes(a.in));
  } catch (const json::exception& e) {
    throw Error(ErrorCategory::kParse, a.in + ": " + e.what());
  }
  emit(a.out, report_render(reports_from_json(j), format));
}

// ---- validate-trace -------------------------------------------------------

struct ValidateArgs {
  std::string in;
};

void run_validate(ValidateArgs& a) {
  const auto violations = validate_trace_file(a.in);
  for (const auto& v : violations) std::cout << format_violation(v) << '\n';
  if (!violations.empty())
    throw Error(ErrorCategory::kInvalidInput,
                a.in + ": " + std::to_string(violations.size()) + " trace violation(s)");
  std::cout << "ok: " << read_trace_file(a.in).records.size() << " records\n";
}

// ---- trajectory -----------------------------------------------------------

struct TrajectoryArgs {
  std::string traces;
  std::string out;
};

void run_trajectory(TrajectoryArgs& a) {
  emit(a.out, trajectory_csv(feature_trajectory_report(read_trace_file(a.traces).records)));
}

void print_error(std::string_view category, const std::string& message) {
  std::cerr << json({{"error", {{"category", std::string(category)}, {"message", message}}}}).dump()
            << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adainfer: early-exit inference harness"};
  app.require_subcommand(1);

  TrainToyArgs train_toy_args;
  auto* train_toy_cmd = app.add_subcommand("train-toy", "Train the toy transformer");
  add_common(train_toy_cmd, train_toy_args.common);
  train_toy_cmd->add_option("--out", train_toy_args.out, "Model output path")->required();
  train_toy_cmd->callback([&] { run_train_toy(train_toy_args); });

  SweepArgs sweep_args;
  auto* sweep_cmd = app.add_subcommand("sweep", "Layer-wise probe accuracy");
  add_common(sweep_cmd, sweep_args.common);
  sweep_cmd->add_option("--model", sweep_args.model)->required();
  sweep_cmd->add_option("--split", sweep_args.split, "train or eval");
  sweep_cmd->add_option("--format", sweep_args.format, "json or csv");
  sweep_cmd->add_option("--out", sweep_args.out);
  sweep_cmd->callback([&] { run_sweep(sweep_args); });

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "Write a trace JSONL file");
  add_common(synth_cmd, synth_args.common);
  synth_cmd->add_option("--out", synth_args.out)->required();
  synth_cmd->add_option("--from-model", synth_args.from_model,
                        "Capture traces from this model instead of the synthetic generator");
  synth_cmd->add_option("--split", synth_args.split, "Corpus split for --from-model");
  synth_cmd->add_option("--tag", synth_args.tag, "Task tag for captured traces");
  synth_cmd->callback([&] { run_synth(synth_args); });

  DatasetArgs dataset_args;
  auto* dataset_cmd = app.add_subcommand("build-dataset", "Label per-layer feature vectors");
  add_common(dataset_cmd, dataset_args.common);
  auto* ds_traces = dataset_cmd->add_option("--traces", dataset_args.traces);
  auto* ds_model = dataset_cmd->add_option("--model", dataset_args.model);
  ds_traces->excludes(ds_model);
  dataset_cmd->add_option("--split", dataset_args.split, "Corpus split for --model");
  dataset_cmd->add_option("--out", dataset_args.out)->required();
  dataset_cmd->callback([&] {
    require(!dataset_args.traces.empty() || !dataset_args.model.empty(),
            "build-dataset: give --traces or --model");
    run_build_dataset(dataset_args);
  });

  ClassifierArgs clf_args;
  auto* clf_cmd = app.add_subcommand("train-classifier", "Fit an exit classifier");
  add_common(clf_cmd, clf_args.common);
  clf_cmd->add_option("--dataset", clf_args.dataset)->required();
  clf_cmd->add_option("--kind", clf_args.kind, "svm, crf or gap_rule (default from config)");
  clf_cmd->add_option("--out", clf_args.out)->required();
  clf_cmd->callback([&] { run_train_classifier(clf_args); });

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate an exit policy");
  add_common(eval_cmd, eval_args.common);
  eval_cmd->add_option("--traces", eval_args.traces);
  eval_cmd->add_option("--model", eval_args.model);
  eval_cmd->add_option("--prompts", eval_args.prompts, "Token prompt file for --model");
  eval_cmd->add_option("--classifier", eval_args.classifier);
  eval_cmd->add_option("--policy", eval_args.policy, "adaptive, always_dense, oracle, gap_rule");
  eval_cmd->add_option("--tag", eval_args.tag, "Main report tag (default all, or copy with --model)");
  eval_cmd->add_option("--truncate-last", eval_args.truncate_last,
                       "Static baselines dropping the last k layers")
      ->delimiter(',');
  eval_cmd->add_flag("--by-tag", eval_args.by_tag, "Per task_tag reports (traces)");
  eval_cmd->add_flag("--wall-clock", eval_args.wall_clock, "Time dense vs adaptive (model)");
  eval_cmd->add_option("--threads", eval_args.threads, "Worker threads (default from config)");
  eval_cmd->add_option("--format", eval_args.format, "table, json or csv");
  eval_cmd->add_option("--out", eval_args.out);
  eval_cmd->callback([&] { run_eval_cmd(eval_args); });

  CostArgs cost_args;
  auto* cost_cmd = app.add_subcommand("cost", "Analytical FLOPs report");
  add_common(cost_cmd, cost_args.common);
  cost_cmd->add_option("--exit-layer", cost_args.exit_layer, "Average exit layer l'");
  cost_cmd->add_option("--dataset", cost_args.dataset, "Adds a classifier cost profile");
  cost_cmd->callback([&] { run_cost(cost_args); });

  ExportArgs export_args;
  auto* export_cmd = app.add_subcommand("export-report", "Re-render a JSON report");
  export_cmd->add_option("--in", export_args.in)->required();
  export_cmd->add_option("--format", export_args.format, "table, json or csv");
  export_cmd->add_option("--out", export_args.out);
  export_cmd->callback([&] { run_export(export_args); });

  ValidateArgs validate_args;
  auto* validate_cmd = app.add_subcommand("validate-trace", "Check a trace JSONL file");
  validate_cmd->add_option("--in", validate_args.in)->required();
  validate_cmd->callback([&] { run_validate(validate_args); });

  TrajectoryArgs trajectory_args;
  auto* trajectory_cmd = app.add_subcommand("trajectory", "Per-layer feature statistics (CSV)");
  trajectory_cmd->add_option("--traces", trajectory_args.traces)->required();
  trajectory_cmd->add_option("--out", trajectory_args.out);
  trajectory_cmd->callback([&] { run_trajectory(trajectory_args); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error(category_name(ErrorCategory::kInvalidInput), e.what());
    return exit_code(ErrorCategory::kInvalidInput);
  } catch (const Error& e) {
    print_error(category_name(e.category()), e.what());
    return exit_code(e.category());
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
  return 0;
}
