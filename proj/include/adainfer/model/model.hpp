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

#include <cstdint>
#include <fstream>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "adainfer/core/error.hpp"
#include "adainfer/core/linalg.hpp"
#include "adainfer/core/rng.hpp"

namespace adainfer {

using TokenId = std::uint32_t;

/// Whether intermediate probes see the final LayerNorm before the LM head.
/// The last layer always uses the model's real output path, so both modes
/// agree with the dense prediction at layer L.
enum class ProbeNorm {
  kFinalNormEveryProbe,
  kRawIntermediate,
};

struct ModelConfig {
  int num_layers = 2;
  int hidden_size = 8;
  int num_heads = 2;
  int vocab_size = 16;
  int max_seq_len = 16;
  int mlp_expansion = 4;
  ProbeNorm probe_norm = ProbeNorm::kFinalNormEveryProbe;

  int head_dim() const { return hidden_size / num_heads; }
  int mlp_size() const { return hidden_size * mlp_expansion; }

  void validate() const {
    require(num_layers >= 1, "config: num_layers must be >= 1");
    require(hidden_size >= 1, "config: hidden_size must be >= 1");
    require(num_heads >= 1 && hidden_size % num_heads == 0,
            "config: num_heads must divide hidden_size");
    require(vocab_size >= 2, "config: vocab_size must be >= 2");
    require(max_seq_len >= 1, "config: max_seq_len must be >= 1");
    require(mlp_expansion >= 1, "config: mlp_expansion must be >= 1");
  }

  bool operator==(const ModelConfig&) const = default;
};

struct LayerWeights {
  Vector ln1_gamma, ln1_beta;
  Matrix wq, wk, wv, wo;  // h x h
  Vector ln2_gamma, ln2_beta;
  Matrix w_up;    // mlp x h
  Matrix w_down;  // h x mlp

  bool operator==(const LayerWeights&) const = default;
};

struct ModelWeights {
  Matrix token_embedding;     // V x h
  Matrix position_embedding;  // S x h
  std::vector<LayerWeights> layers;
  Vector final_gamma, final_beta;
  Matrix head_weight;  // V x h
  Vector head_bias;    // V

  bool operator==(const ModelWeights&) const = default;
};

struct Model {
  ModelConfig config;
  ModelWeights weights;
  std::uint64_t seed = 0;

  bool operator==(const Model&) const = default;
};

/// Every trainable array in a fixed order. Used by the optimizer and by
/// the checkpoint finiteness check.
inline std::vector<std::span<double>> parameter_spans(ModelWeights& w) {
  std::vector<std::span<double>> out;
  auto add = [&](auto& container) { out.emplace_back(container); };
  add(w.token_embedding.data);
  add(w.position_embedding.data);
  for (auto& l : w.layers) {
    add(l.ln1_gamma);
    add(l.ln1_beta);
    add(l.wq.data);
    add(l.wk.data);
    add(l.wv.data);
    add(l.wo.data);
    add(l.ln2_gamma);
    add(l.ln2_beta);
    add(l.w_up.data);
    add(l.w_down.data);
  }
  add(w.final_gamma);
  add(w.final_beta);
  add(w.head_weight.data);
  add(w.head_bias);
  return out;
}

inline std::vector<std::span<const double>> parameter_spans(
    const ModelWeights& w) {
  std::vector<std::span<const double>> out;
  for (auto s : parameter_spans(const_cast<ModelWeights&>(w))) out.push_back(s);
  return out;
}

inline ModelWeights zeros_like(const ModelConfig& c) {
  const auto h = static_cast<std::size_t>(c.hidden_size);
  const auto m = static_cast<std::size_t>(c.mlp_size());
  const auto v = static_cast<std::size_t>(c.vocab_size);
  const auto s = static_cast<std::size_t>(c.max_seq_len);
  ModelWeights w;
  w.token_embedding = Matrix(v, h);
  w.position_embedding = Matrix(s, h);
  w.layers.resize(static_cast<std::size_t>(c.num_layers));
  for (auto& l : w.layers) {
    l.ln1_gamma = Vector(h, 0.0);
    l.ln1_beta = Vector(h, 0.0);
    l.wq = l.wk = l.wv = l.wo = Matrix(h, h);
    l.ln2_gamma = Vector(h, 0.0);
    l.ln2_beta = Vector(h, 0.0);
    l.w_up = Matrix(m, h);
    l.w_down = Matrix(h, m);
  }
  w.final_gamma = Vector(h, 0.0);
  w.final_beta = Vector(h, 0.0);
  w.head_weight = Matrix(v, h);
  w.head_bias = Vector(v, 0.0);
  return w;
}

/// Deterministic initialization. Draw order is the parameter_spans() order;
/// every matrix entry is Normal(0, scale) with
///   embeddings 1.0 (tokens), 0.3 (positions),
///   attention and up-projection 1/sqrt(h), down-projection 0.5/sqrt(mlp),
///   head 1/sqrt(h).
/// LayerNorm gains start at 1, biases at 0.
inline Model init_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Model model{config, zeros_like(config), seed};
  Rng rng(seed);
  auto fill = [&](Matrix& m, double scale) {
    for (double& x : m.data) x = rng.normal(0.0, scale);
  };
  const double h = config.hidden_size;
  const double mlp = config.mlp_size();
  auto& w = model.weights;
  fill(w.token_embedding, 1.0);
  fill(w.position_embedding, 0.3);
  for (auto& l : w.layers) {
    std::fill(l.ln1_gamma.begin(), l.ln1_gamma.end(), 1.0);
    fill(l.wq, 1.0 / std::sqrt(h));
    fill(l.wk, 1.0 / std::sqrt(h));
    fill(l.wv, 1.0 / std::sqrt(h));
    fill(l.wo, 1.0 / std::sqrt(h));
    std::fill(l.ln2_gamma.begin(), l.ln2_gamma.end(), 1.0);
    fill(l.w_up, 1.0 / std::sqrt(h));
    fill(l.w_down, 0.5 / std::sqrt(mlp));
  }
  std::fill(w.final_gamma.begin(), w.final_gamma.end(), 1.0);
  fill(w.head_weight, 1.0 / std::sqrt(h));
  return model;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O (JSON container, format "adainfer-weights", version 1).

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
  return {{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}};
}

inline Matrix matrix_from_json(const nlohmann::json& j, std::size_t rows,
                               std::size_t cols, const std::string& name) {
  Matrix m;
  m.rows = j.at("rows").get<std::size_t>();
  m.cols = j.at("cols").get<std::size_t>();
  m.data = j.at("data").get<std::vector<double>>();
  if (m.rows != rows || m.cols != cols || m.data.size() != rows * cols)
    throw Error(ErrorCategory::kParse, "checkpoint: bad shape for " + name);
  return m;
}

inline Vector vector_from_json(const nlohmann::json& j, std::size_t n,
                               const std::string& name) {
  auto v = j.get<Vector>();
  if (v.size() != n)
    throw Error(ErrorCategory::kParse, "checkpoint: bad length for " + name);
  return v;
}

}  // namespace detail

inline std::string_view probe_norm_name(ProbeNorm p) {
  return p == ProbeNorm::kFinalNormEveryProbe ? "final_norm_every_probe"
                                              : "raw_intermediate";
}

inline ProbeNorm probe_norm_from_name(std::string_view name) {
  if (name == "final_norm_every_probe") return ProbeNorm::kFinalNormEveryProbe;
  if (name == "raw_intermediate") return ProbeNorm::kRawIntermediate;
  throw_invalid("unknown probe_norm: " + std::string(name));
}

inline nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"num_layers", c.num_layers},     {"hidden_size", c.hidden_size},
          {"num_heads", c.num_heads},       {"vocab_size", c.vocab_size},
          {"max_seq_len", c.max_seq_len},   {"mlp_expansion", c.mlp_expansion},
          {"probe_norm", probe_norm_name(c.probe_norm)}};
}

/// Missing keys keep the defaults of `base`.
inline ModelConfig config_from_json(const nlohmann::json& j,
                                    ModelConfig base = {}) {
  base.num_layers = j.value("num_layers", base.num_layers);
  base.hidden_size = j.value("hidden_size", base.hidden_size);
  base.num_heads = j.value("num_heads", base.num_heads);
  base.vocab_size = j.value("vocab_size", base.vocab_size);
  base.max_seq_len = j.value("max_seq_len", base.max_seq_len);
  base.mlp_expansion = j.value("mlp_expansion", base.mlp_expansion);
  if (j.contains("probe_norm"))
    base.probe_norm = probe_norm_from_name(j.at("probe_norm").get<std::string>());
  base.validate();
  return base;
}

inline nlohmann::json model_to_json(const Model& model) {
  const auto& w = model.weights;
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : w.layers) {
    layers.push_back({{"ln1_gamma", l.ln1_gamma},
                      {"ln1_beta", l.ln1_beta},
                      {"wq", detail::matrix_to_json(l.wq)},
                      {"wk", detail::matrix_to_json(l.wk)},
                      {"wv", detail::matrix_to_json(l.wv)},
                      {"wo", detail::matrix_to_json(l.wo)},
                      {"ln2_gamma", l.ln2_gamma},
                      {"ln2_beta", l.ln2_beta},
                      {"w_up", detail::matrix_to_json(l.w_up)},
                      {"w_down", detail::matrix_to_json(l.w_down)}});
  }
  return {{"format", "adainfer-weights"},
          {"version", 1},
          {"config", config_to_json(model.config)},
          {"init", {{"prng", Rng::kAlgorithm}, {"seed", model.seed}}},
          {"weights",
           {{"token_embedding", detail::matrix_to_json(w.token_embedding)},
            {"position_embedding", detail::matrix_to_json(w.position_embedding)},
            {"layers", layers},
            {"final_gamma", w.final_gamma},
            {"final_beta", w.final_beta},
            {"head_weight", detail::matrix_to_json(w.head_weight)},
            {"head_bias", w.head_bias}}}};
}

inline Model model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "adainfer-weights")
      throw Error(ErrorCategory::kParse, "checkpoint: wrong format tag");
    if (j.at("version") != 1)
      throw Error(ErrorCategory::kParse, "checkpoint: unsupported version");
    Model model;
    model.config = config_from_json(j.at("config"));
    model.seed = j.at("init").at("seed").get<std::uint64_t>();
    const auto& c = model.config;
    const auto h = static_cast<std::size_t>(c.hidden_size);
    const auto m = static_cast<std::size_t>(c.mlp_size());
    const auto v = static_cast<std::size_t>(c.vocab_size);
    const auto s = static_cast<std::size_t>(c.max_seq_len);
    const auto& jw = j.at("weights");
    auto& w = model.weights;
    using detail::matrix_from_json;
    using detail::vector_from_json;
    w.token_embedding = matrix_from_json(jw.at("token_embedding"), v, h, "token_embedding");
    w.position_embedding = matrix_from_json(jw.at("position_embedding"), s, h, "position_embedding");
    const auto& jl = jw.at("layers");
    if (jl.size() != static_cast<std::size_t>(c.num_layers))
      throw Error(ErrorCategory::kParse, "checkpoint: layer count mismatch");
    for (const auto& x : jl) {
      LayerWeights l;
      l.ln1_gamma = vector_from_json(x.at("ln1_gamma"), h, "ln1_gamma");
      l.ln1_beta = vector_from_json(x.at("ln1_beta"), h, "ln1_beta");
      l.wq = matrix_from_json(x.at("wq"), h, h, "wq");
      l.wk = matrix_from_json(x.at("wk"), h, h, "wk");
      l.wv = matrix_from_json(x.at("wv"), h, h, "wv");
      l.wo = matrix_from_json(x.at("wo"), h, h, "wo");
      l.ln2_gamma = vector_from_json(x.at("ln2_gamma"), h, "ln2_gamma");
      l.ln2_beta = vector_from_json(x.at("ln2_beta"), h, "ln2_beta");
      l.w_up = matrix_from_json(x.at("w_up"), m, h, "w_up");
      l.w_down = matrix_from_json(x.at("w_down"), h, m, "w_down");
      w.layers.push_back(std::move(l));
    }
    w.final_gamma = vector_from_json(jw.at("final_gamma"), h, "final_gamma");
    w.final_beta = vector_from_json(jw.at("final_beta"), h, "final_beta");
    w.head_weight = matrix_from_json(jw.at("head_weight"), v, h, "head_weight");
    w.head_bias = vector_from_json(jw.at("head_bias"), v, "head_bias");
    for (auto span : parameter_spans(w))
      if (!all_finite(span))
        throw Error(ErrorCategory::kParse, "checkpoint: non-finite weight");
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::kParse, std::string("checkpoint: ") + e.what());
  }
}

inline void save_model(const Model& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCategory::kIo, "cannot write " + path);
  out << model_to_json(model).dump() << '\n';
}

inline Model load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::kIo, "cannot read " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::kParse, path + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace adainfer
