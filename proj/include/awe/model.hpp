// awe/model.hpp

// Copyright 2026  The awe-qbe Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Residual CNN acoustic word embedder.
//
//   Conv1 (7x7, stride 2) -> ReLU -> max-pool 2x2
//   -> 4 stages of basic residual blocks (conv3x3 -> ReLU -> conv3x3, plus
//      identity or 1x1 projection skip, then ReLU)
//   -> masked global average pooling (the embedding)
//   -> fully connected layer over the word vocabulary.
//
// Training minimises, per (anchor, partner) pair of the same word spoken by
// different speakers,
//   L = CE(anchor) + CE(partner) + alpha * MSE(e_anchor, e_partner),
// averaged over the batch.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "json.hpp"

#include "awe/common.hpp"
#include "awe/corpus.hpp"
#include "awe/features.hpp"
#include "awe/tensorkit.hpp"

namespace awe {

using Embedding = std::vector<float>;

enum class SoftmaxMode { kOne, kBlock };

inline const char* to_string(SoftmaxMode m) { return m == SoftmaxMode::kOne ? "one" : "block"; }

inline SoftmaxMode softmax_mode_from(std::string_view s) {
  if (s == "one") return SoftmaxMode::kOne;
  if (s == "block") return SoftmaxMode::kBlock;
  throw ValidationError(str_cat("softmax mode '", s, "' is not one|block"));
}

struct ModelConfig {
  std::size_t input_dim = 64;
  std::vector<std::size_t> stage_channels{8, 16, 32, 64};
  std::vector<std::size_t> stage_blocks{1, 1, 1, 1};
  std::vector<bool> stage_downsample{false, true, true, true};
  tk::BlockLayout block_layout;
  SoftmaxMode softmax_mode = SoftmaxMode::kOne;
  double alpha = 0.8;
  double lr0 = 0.1;
  double momentum = 0.9;
  std::size_t epochs = 80;
  std::size_t batch_size = 16;
  std::size_t lr_patience = 5;
  double lr_factor = 0.5;
  double min_lr = 1e-4;
  bool input_mean_norm = false;
  // Zero the last conv of each residual branch at init.
  bool zero_init_residual = false;
  // Global gradient-norm clip; 0 disables.
  double grad_clip_norm = 1.0;
  std::uint64_t seed = 1;

  std::size_t num_outputs() const { return block_layout.total(); }
  std::size_t embedding_dim() const { return stage_channels.empty() ? 0 : stage_channels.back(); }

  bool operator==(const ModelConfig&) const = default;
};

// Channels/blocks as in the full-size ResNet table.
inline ModelConfig full_scale_config(tk::BlockLayout layout) {
  ModelConfig cfg;
  cfg.stage_channels = {64, 128, 256, 512};
  cfg.stage_blocks = {3, 4, 6, 3};
  cfg.block_layout = std::move(layout);
  return cfg;
}

inline tk::BlockLayout layout_from_manifest(const Manifest& m) {
  tk::BlockLayout layout;
  std::size_t begin = 0;
  for (int lang = 0; lang < 2; ++lang) {
    std::size_t n = 0;
    for (const auto& w : m.vocabulary) {
      if (w.language_id != lang) continue;
      if (static_cast<std::size_t>(w.word_id) != begin + n)
        throw ValidationError("vocabulary word ids are not grouped by language");
      ++n;
    }
    if (n > 0) layout.blocks.emplace_back(begin, begin + n);
    begin += n;
  }
  return layout;
}

inline void validate(const ModelConfig& c) {
  auto require = [](bool ok, const char* field, const std::string& why) {
    if (!ok) throw ValidationError(str_cat("ModelConfig.", field, ": ", why));
  };
  require(c.input_dim >= 1, "input_dim", "must be >= 1");
  require(c.stage_channels.size() == 4, "stage_channels", "need 4 stages");
  require(c.stage_blocks.size() == 4, "stage_blocks", "need 4 stages");
  require(c.stage_downsample.size() == 4, "stage_downsample", "need 4 stages");
  for (std::size_t s = 0; s < 4; ++s) {
    require(c.stage_channels[s] >= 1, "stage_channels", "channels must be >= 1");
    require(c.stage_blocks[s] >= 1, "stage_blocks", "blocks must be >= 1");
  }
  c.block_layout.validate();
  require(c.alpha >= 0, "alpha", "must be >= 0");
  require(c.lr0 > 0, "lr0", "must be > 0");
  require(c.momentum >= 0 && c.momentum < 1, "momentum", "must be in [0,1)");
  require(c.epochs >= 1, "epochs", "must be >= 1");
  require(c.batch_size >= 1, "batch_size", "must be >= 1");
  require(c.lr_factor > 0 && c.lr_factor < 1, "lr_factor", "must be in (0,1)");
  require(c.min_lr > 0, "min_lr", "must be > 0");
  require(c.grad_clip_norm >= 0, "grad_clip_norm", "must be >= 0");
}

inline nlohmann::json to_json(const ModelConfig& c) {
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& [b, e] : c.block_layout.blocks) blocks.push_back({b, e});
  std::vector<bool> ds = c.stage_downsample;
  return {{"input_dim", c.input_dim},
          {"stage_channels", c.stage_channels},
          {"stage_blocks", c.stage_blocks},
          {"stage_downsample", ds},
          {"block_layout", blocks},
          {"softmax_mode", to_string(c.softmax_mode)},
          {"alpha", c.alpha},
          {"lr0", c.lr0},
          {"momentum", c.momentum},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr_patience", c.lr_patience},
          {"lr_factor", c.lr_factor},
          {"min_lr", c.min_lr},
          {"input_mean_norm", c.input_mean_norm},
          {"zero_init_residual", c.zero_init_residual},
          {"grad_clip_norm", c.grad_clip_norm},
          {"seed", c.seed}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig c = {}) {
  auto field = [&](const char* key, auto& v) {
    if (j.contains(key)) v = j.at(key).get<std::decay_t<decltype(v)>>();
  };
  field("input_dim", c.input_dim);
  field("stage_channels", c.stage_channels);
  field("stage_blocks", c.stage_blocks);
  if (j.contains("stage_downsample")) c.stage_downsample = j.at("stage_downsample").get<std::vector<bool>>();
  if (j.contains("block_layout")) {
    c.block_layout.blocks.clear();
    for (const auto& b : j.at("block_layout"))
      c.block_layout.blocks.emplace_back(b.at(0).get<std::size_t>(), b.at(1).get<std::size_t>());
  }
  if (j.contains("softmax_mode")) c.softmax_mode = softmax_mode_from(j.at("softmax_mode").get<std::string>());
  field("alpha", c.alpha);
  field("lr0", c.lr0);
  field("momentum", c.momentum);
  field("epochs", c.epochs);
  field("batch_size", c.batch_size);
  field("lr_patience", c.lr_patience);
  field("lr_factor", c.lr_factor);
  field("min_lr", c.min_lr);
  field("input_mean_norm", c.input_mean_norm);
  field("zero_init_residual", c.zero_init_residual);
  field("grad_clip_norm", c.grad_clip_norm);
  field("seed", c.seed);
  return c;
}

// ---------------------------------------------------------------------------
// Parameters.

struct ParamSpec {
  std::string name;
  tk::Shape shape;
  std::size_t fan_in;  // 0 for biases
};

inline constexpr std::size_t kConv1Kernel = 7;
inline constexpr std::size_t kConv1Stride = 2;
inline constexpr std::size_t kPoolSize = 2;

inline std::string block_prefix(std::size_t stage, std::size_t block) {
  return str_cat("res", stage + 1, ".", block, ".");
}

inline bool block_has_projection(const ModelConfig& c, std::size_t stage, std::size_t block,
                                 std::size_t in_ch) {
  const bool strided = block == 0 && c.stage_downsample[stage];
  return strided || in_ch != c.stage_channels[stage];
}

// Canonical parameter order; file format and optimizer state follow it.
inline std::vector<ParamSpec> param_specs(const ModelConfig& c) {
  std::vector<ParamSpec> specs;
  auto conv = [&](const std::string& name, std::size_t out, std::size_t in, std::size_t k) {
    specs.push_back({name + "weight", {out, in, k, k}, in * k * k});
    specs.push_back({name + "bias", {out}, 0});
  };
  conv("conv1.", c.stage_channels[0], 1, kConv1Kernel);
  std::size_t ch = c.stage_channels[0];
  for (std::size_t s = 0; s < 4; ++s)
    for (std::size_t k = 0; k < c.stage_blocks[s]; ++k) {
      const std::string p = block_prefix(s, k);
      const std::size_t out = c.stage_channels[s];
      conv(p + "conv_a.", out, ch, 3);
      conv(p + "conv_b.", out, out, 3);
      if (block_has_projection(c, s, k, ch)) conv(p + "proj.", out, ch, 1);
      ch = out;
    }
  specs.push_back({"fc.weight", {c.num_outputs(), ch}, ch});
  specs.push_back({"fc.bias", {c.num_outputs()}, 0});
  return specs;
}

template <typename T>
struct NetworkParams {
  std::vector<std::pair<std::string, tk::Tensor<T>>> tensors;  // param_specs order
  std::size_t embedding_dim = 0;

  const tk::Tensor<T>& get(std::string_view name) const {
    for (const auto& [n, t] : tensors)
      if (n == name) return t;
    throw ValidationError(str_cat("no parameter named '", name, "'"));
  }
  tk::Tensor<T>& get(std::string_view name) {
    return const_cast<tk::Tensor<T>&>(std::as_const(*this).get(name));
  }
  std::size_t index_of(std::string_view name) const {
    for (std::size_t i = 0; i < tensors.size(); ++i)
      if (tensors[i].first == name) return i;
    throw ValidationError(str_cat("no parameter named '", name, "'"));
  }
  std::size_t num_values() const {
    std::size_t n = 0;
    for (const auto& [_, t] : tensors) n += t.size();
    return n;
  }

  template <typename U>
  NetworkParams<U> cast() const {
    NetworkParams<U> out;
    out.embedding_dim = embedding_dim;
    for (const auto& [n, t] : tensors) out.tensors.emplace_back(n, t.template cast<U>());
    return out;
  }

  bool all_finite() const {
    return std::all_of(tensors.begin(), tensors.end(), [](const auto& p) { return p.second.all_finite(); });
  }

  bool operator==(const NetworkParams&) const = default;
};

// He-uniform weights, zero biases. Values are drawn in double so that the
// float and double instantiations agree up to rounding.
template <typename T = float>
NetworkParams<T> build_network(const ModelConfig& cfg) {
  validate(cfg);
  std::mt19937_64 rng(cfg.seed);
  NetworkParams<T> p;
  p.embedding_dim = cfg.embedding_dim();
  for (const auto& spec : param_specs(cfg)) {
    tk::Tensor<T> t(spec.shape);
    const bool zeroed = cfg.zero_init_residual && spec.name.ends_with("conv_b.weight");
    if (spec.fan_in > 0 && !zeroed) {
      const double bound = std::sqrt(6.0 / static_cast<double>(spec.fan_in));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (auto& v : t.data) v = static_cast<T>(dist(rng));
    }
    p.tensors.emplace_back(spec.name, std::move(t));
  }
  return p;
}

// ---------------------------------------------------------------------------
// Forward pass.

template <typename T>
struct Batch {
  tk::Tensor<T> features;  // [B, 1, D, T_max]
  std::vector<std::size_t> lengths;
  std::vector<int> langs;
  std::vector<int> targets;
};

// Minimum number of input frames the stack accepts.
inline std::size_t min_input_frames(const ModelConfig& c) {
  // Every conv is padded to at least half its kernel and the pool keeps
  // partial windows, so any non-empty input survives to the GAP layer.
  (void)c;
  return 1;
}

template <typename T>
Batch<T> make_batch(std::span<const FeatureSequence* const> seqs, const ModelConfig& cfg) {
  if (seqs.empty()) throw ValidationError("make_batch: empty batch");
  std::size_t t_max = 0;
  for (const auto* s : seqs) {
    if (s->dim != cfg.input_dim)
      throw ShapeError(str_cat("feature dim ", s->dim, " does not match model input_dim ", cfg.input_dim));
    if (s->num_frames < min_input_frames(cfg))
      throw TooShortError(str_cat("sequence of ", s->num_frames, " frames; network minimum is ",
                                  min_input_frames(cfg)));
    t_max = std::max(t_max, s->num_frames);
  }
  const std::size_t D = cfg.input_dim;
  Batch<T> batch;
  batch.features = tk::Tensor<T>(tk::Shape{seqs.size(), 1, D, t_max});
  for (std::size_t b = 0; b < seqs.size(); ++b) {
    const FeatureSequence& s = *seqs[b];
    std::vector<double> mean(D, 0.0);
    if (cfg.input_mean_norm) {
      for (std::size_t t = 0; t < s.num_frames; ++t)
        for (std::size_t k = 0; k < D; ++k) mean[k] += s(t, k);
      for (auto& m : mean) m /= static_cast<double>(s.num_frames);
    }
    for (std::size_t t = 0; t < s.num_frames; ++t)
      for (std::size_t k = 0; k < D; ++k)
        batch.features.at(b, 0, k, t) = static_cast<T>(s(t, k) - mean[k]);
    batch.lengths.push_back(s.num_frames);
  }
  return batch;
}

template <typename T>
std::vector<tk::NodeId> register_params(tk::Graph<T>& g, const NetworkParams<T>& p) {
  std::vector<tk::NodeId> ids;
  ids.reserve(p.tensors.size());
  for (const auto& [_, t] : p.tensors) ids.push_back(g.param(t));
  return ids;
}

struct ForwardNodes {
  tk::NodeId embedding = tk::kNoNode;  // [B, d]
  tk::NodeId logits = tk::kNoNode;     // [B, num_outputs]
};

template <typename T>
ForwardNodes forward(tk::Graph<T>& g, const NetworkParams<T>& p, const std::vector<tk::NodeId>& pid,
                     const ModelConfig& cfg, tk::NodeId input, std::span<const std::size_t> lengths) {
  auto node = [&](const std::string& name) { return pid[p.index_of(name)]; };
  const tk::Tensor<T>& in = g.value(input);
  if (in.rank() != 4 || in.dim(1) != 1 || in.dim(2) != cfg.input_dim)
    throw ShapeError(str_cat("forward: input ", tk::shape_str(in.shape), " for input_dim ", cfg.input_dim));

  tk::Conv2dGeometry geo1{kConv1Stride, kConv1Stride, kConv1Kernel / 2, kConv1Kernel / 2};
  tk::Activation x = tk::conv2d(g, input, node("conv1.weight"), node("conv1.bias"), geo1, lengths);
  x.node = tk::relu(g, x.node);
  x = tk::max_pool2d(g, x.node, kPoolSize, kPoolSize, x.valid_t);

  std::size_t ch = cfg.stage_channels[0];
  for (std::size_t s = 0; s < 4; ++s)
    for (std::size_t k = 0; k < cfg.stage_blocks[s]; ++k) {
      const std::string pre = block_prefix(s, k);
      const std::size_t stride = (k == 0 && cfg.stage_downsample[s]) ? 2 : 1;
      tk::Conv2dGeometry geo_a{stride, stride, 1, 1};
      tk::Activation h = tk::conv2d(g, x.node, node(pre + "conv_a.weight"), node(pre + "conv_a.bias"), geo_a, x.valid_t);
      h.node = tk::relu(g, h.node);
      h = tk::conv2d(g, h.node, node(pre + "conv_b.weight"), node(pre + "conv_b.bias"), tk::Conv2dGeometry{1, 1, 1, 1}, h.valid_t);
      tk::NodeId skip = x.node;
      if (block_has_projection(cfg, s, k, ch)) {
        tk::Conv2dGeometry geo_p{stride, stride, 0, 0};
        skip = tk::conv2d(g, x.node, node(pre + "proj.weight"), node(pre + "proj.bias"), geo_p, x.valid_t).node;
      }
      x.node = tk::relu(g, tk::add(g, h.node, skip));
      x.valid_t = h.valid_t;
      ch = cfg.stage_channels[s];
    }

  ForwardNodes out;
  out.embedding = tk::gap_masked(g, x.node, x.valid_t);
  out.logits = tk::linear(g, out.embedding, node("fc.weight"), node("fc.bias"));
  return out;
}

struct ForwardResult {
  tk::Tensor<float> embeddings;  // [B, d]
  tk::Tensor<float> logits;      // [B, num_outputs]
};

// Gradient-free forward of a batch of sequences.
template <typename T>
ForwardResult forward(const NetworkParams<T>& p, const ModelConfig& cfg,
                      std::span<const FeatureSequence* const> seqs) {
  Batch<T> batch = make_batch<T>(seqs, cfg);
  tk::Graph<T> g(false);
  const auto pid = register_params(g, p);
  const tk::NodeId input = g.constant(std::move(batch.features));
  const ForwardNodes fw = forward(g, p, pid, cfg, input, batch.lengths);
  return {g.value(fw.embedding).template cast<float>(), g.value(fw.logits).template cast<float>()};
}

template <typename T>
Embedding extract_embedding(const NetworkParams<T>& p, const ModelConfig& cfg, const FeatureSequence& seq) {
  const FeatureSequence* one[] = {&seq};
  const ForwardResult r = forward(p, cfg, std::span<const FeatureSequence* const>(one));
  return Embedding(r.embeddings.data.begin(), r.embeddings.data.end());
}

// Embeds many sequences, grouping up to `chunk` per forward pass.
template <typename T>
std::vector<Embedding> extract_embeddings(const NetworkParams<T>& p, const ModelConfig& cfg,
                                          std::span<const FeatureSequence> seqs, std::size_t chunk = 16) {
  std::vector<Embedding> out;
  out.reserve(seqs.size());
  std::vector<const FeatureSequence*> ptrs;
  for (std::size_t i = 0; i < seqs.size(); i += chunk) {
    ptrs.clear();
    for (std::size_t j = i; j < std::min(seqs.size(), i + chunk); ++j) ptrs.push_back(&seqs[j]);
    const ForwardResult r = forward(p, cfg, std::span<const FeatureSequence* const>(ptrs));
    const std::size_t d = r.embeddings.dim(1);
    for (std::size_t b = 0; b < ptrs.size(); ++b)
      out.emplace_back(r.embeddings.data.begin() + static_cast<std::ptrdiff_t>(b * d),
                       r.embeddings.data.begin() + static_cast<std::ptrdiff_t>((b + 1) * d));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Joint objective.

inline double total_loss(double ce1, double ce2, double mse, double alpha) { return ce1 + ce2 + alpha * mse; }

struct LossNodes {
  tk::NodeId total = tk::kNoNode;  // scalar: batch mean of per-pair losses
  tk::NodeId ce1 = tk::kNoNode;    // [B]
  tk::NodeId ce2 = tk::kNoNode;    // [B]
  tk::NodeId mse = tk::kNoNode;    // [B]
};

template <typename T>
LossNodes total_loss(tk::Graph<T>& g, tk::NodeId logits1, tk::NodeId logits2, std::span<const int> targets1,
                     std::span<const int> targets2, tk::NodeId e1, tk::NodeId e2, T alpha,
                     const tk::BlockLayout* layout = nullptr, std::span<const int> langs1 = {},
                     std::span<const int> langs2 = {}) {
  LossNodes n;
  n.ce1 = tk::softmax_cross_entropy(g, logits1, targets1, layout, langs1);
  n.ce2 = tk::softmax_cross_entropy(g, logits2, targets2, layout, langs2);
  n.mse = tk::row_mse(g, e1, e2);
  const tk::NodeId per_pair = tk::add(g, tk::add(g, n.ce1, n.ce2), tk::scale(g, n.mse, alpha));
  n.total = tk::mean(g, per_pair);
  return n;
}

// ---------------------------------------------------------------------------
// Training.

struct EpochStats {
  std::size_t epoch = 0;
  double total_loss = 0;
  double ce_loss = 0;   // mean per pair of CE(anchor) + CE(partner)
  double mse_loss = 0;  // mean per pair
  double accuracy = 0;  // over anchors and partners
  double lr = 0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  double final_accuracy() const { return epochs.empty() ? 0.0 : epochs.back().accuracy; }
};

inline nlohmann::json to_json(const TrainReport& r) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : r.epochs)
    arr.push_back({{"epoch", e.epoch},
                   {"total_loss", e.total_loss},
                   {"ce_loss", e.ce_loss},
                   {"mse_loss", e.mse_loss},
                   {"accuracy", e.accuracy},
                   {"lr", e.lr}});
  return {{"epochs", arr}};
}

struct TrainResult {
  NetworkParams<float> params;
  TrainReport report;
};

using EpochCallback = std::function<void(const EpochStats&)>;

inline int predicted_label(std::span<const float> logits, const ModelConfig& cfg, int lang) {
  std::size_t lo = 0, hi = logits.size();
  if (cfg.softmax_mode == SoftmaxMode::kBlock) std::tie(lo, hi) = cfg.block_layout.blocks.at(static_cast<std::size_t>(lang));
  std::size_t best = lo;
  for (std::size_t i = lo + 1; i < hi; ++i)
    if (logits[i] > logits[best]) best = i;
  return static_cast<int>(best);
}

inline TrainResult train(const ModelConfig& cfg, std::span<const WordInstance> instances,
                         const EpochCallback& on_epoch = nullptr) {
  validate(cfg);
  if (instances.empty()) throw ValidationError("train: no training instances");
  for (const auto& inst : instances) {
    if (inst.word_id < 0 || static_cast<std::size_t>(inst.word_id) >= cfg.num_outputs())
      throw ValidationError(str_cat("train: word_id ", inst.word_id, " outside the output layer"));
    if (cfg.softmax_mode == SoftmaxMode::kBlock) {
      const auto [lo, hi] = cfg.block_layout.blocks.at(static_cast<std::size_t>(inst.language_id));
      if (static_cast<std::size_t>(inst.word_id) < lo || static_cast<std::size_t>(inst.word_id) >= hi)
        throw ValidationError(str_cat("train: word ", inst.word_id, " not in block of language ", inst.language_id));
    }
  }

  TrainResult result{build_network<float>(cfg), {}};
  NetworkParams<float>& params = result.params;
  std::vector<std::vector<float>> velocity;
  for (const auto& [_, t] : params.tensors) velocity.emplace_back(t.size(), 0.0f);

  const PairSampler sampler(instances);
  std::set<int> warned_words;
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(instances.size());
  const tk::BlockLayout* layout = cfg.softmax_mode == SoftmaxMode::kBlock ? &cfg.block_layout : nullptr;
  const auto alpha = static_cast<float>(cfg.alpha);

  double lr = cfg.lr0;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t bad_epochs = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    double sum_total = 0, sum_ce = 0, sum_mse = 0;
    std::size_t pairs = 0, correct = 0, seen = 0, batch_index = 0;

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      const std::size_t B = std::min(cfg.batch_size, order.size() - start);
      std::vector<const FeatureSequence*> seqs(2 * B);
      std::vector<int> targets(2 * B), langs(2 * B);
      for (std::size_t i = 0; i < B; ++i) {
        const std::size_t a = order[start + i];
        std::size_t partner = a;
        if (sampler.has_partner(a)) {
          partner = sampler.partner(a, rng);
        } else if (warned_words.insert(instances[a].word_id).second) {
          log_warning(str_cat("word ", instances[a].word_id,
                              " has a single training speaker; its partner falls back to the anchor"));
        }
        for (auto [slot, idx] : {std::pair{i, a}, std::pair{B + i, partner}}) {
          seqs[slot] = &instances[idx].features;
          targets[slot] = instances[idx].word_id;
          langs[slot] = instances[idx].language_id;
        }
      }

      Batch<float> batch = make_batch<float>(seqs, cfg);
      tk::Graph<float> g(true);
      const auto pid = register_params(g, params);
      const tk::NodeId input = g.constant(std::move(batch.features));
      const ForwardNodes fw = forward(g, params, pid, cfg, input, batch.lengths);
      const std::span<const int> tg(targets), lg(langs);
      const LossNodes loss = total_loss<float>(
          g, tk::slice_rows(g, fw.logits, 0, B), tk::slice_rows(g, fw.logits, B, 2 * B), tg.subspan(0, B),
          tg.subspan(B, B), tk::slice_rows(g, fw.embedding, 0, B), tk::slice_rows(g, fw.embedding, B, 2 * B),
          alpha, layout, lg.subspan(0, B), lg.subspan(B, B));
      const double total = g.value(loss.total)[0];
      if (!std::isfinite(total))
        throw NumericError(str_cat("non-finite loss at epoch ", epoch + 1, ", batch ", batch_index + 1));
      g.backward(loss.total);
      double sq_norm = 0.0;
      for (std::size_t i = 0; i < params.tensors.size(); ++i) {
        const tk::Tensor<float>* grad = g.grad(pid[i]);
        if (!grad) continue;
        if (!grad->all_finite())
          throw NumericError(str_cat("non-finite gradient for ", params.tensors[i].first, " at epoch ",
                                     epoch + 1, ", batch ", batch_index + 1));
        for (float v : grad->data) sq_norm += static_cast<double>(v) * v;
      }
      const double norm = std::sqrt(sq_norm);
      const float clip = cfg.grad_clip_norm > 0 && norm > cfg.grad_clip_norm
                             ? static_cast<float>(cfg.grad_clip_norm / norm)
                             : 1.0f;
      for (std::size_t i = 0; i < params.tensors.size(); ++i) {
        if (!g.grad(pid[i])) continue;
        tk::Tensor<float>* grad = &g.grad_mut(pid[i]);
        if (clip != 1.0f)
          for (float& v : grad->data) v *= clip;
        tk::sgd_nesterov_step<float>(params.tensors[i].second.data, grad->data, velocity[i],
                                     static_cast<float>(lr), static_cast<float>(cfg.momentum));
      }

      const auto& ce1 = g.value(loss.ce1);
      const auto& ce2 = g.value(loss.ce2);
      const auto& mse = g.value(loss.mse);
      for (std::size_t i = 0; i < B; ++i) {
        sum_ce += static_cast<double>(ce1[i]) + ce2[i];
        sum_mse += mse[i];
      }
      sum_total += total * static_cast<double>(B);
      pairs += B;
      const auto& logits = g.value(fw.logits);
      const std::size_t n_out = logits.dim(1);
      for (std::size_t i = 0; i < 2 * B; ++i) {
        std::span<const float> row(logits.ptr() + i * n_out, n_out);
        correct += predicted_label(row, cfg, langs[i]) == targets[i];
        ++seen;
      }
    }

    EpochStats st;
    st.epoch = epoch + 1;
    st.total_loss = sum_total / static_cast<double>(pairs);
    st.ce_loss = sum_ce / static_cast<double>(pairs);
    st.mse_loss = sum_mse / static_cast<double>(pairs);
    st.accuracy = static_cast<double>(correct) / static_cast<double>(seen);
    st.lr = lr;
    result.report.epochs.push_back(st);
    if (on_epoch) on_epoch(st);

    // Reduce on plateau.
    if (st.total_loss < best_loss) {
      best_loss = st.total_loss;
      bad_epochs = 0;
    } else if (++bad_epochs >= cfg.lr_patience) {
      lr = std::max(cfg.min_lr, lr * cfg.lr_factor);
      bad_epochs = 0;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Model file: "AWEM", u32 version, u32 json length, JSON config, u32 tensor
// count, then per tensor: u32 name length, name, u32 rank, u32 dims..., f32
// data. Little-endian throughout.

inline constexpr std::uint32_t kModelVersion = 1;

inline std::string encode_model(const NetworkParams<float>& p, const ModelConfig& cfg,
                                const nlohmann::json& provenance = nullptr) {
  ByteWriter w;
  w.raw("AWEM");
  w.u32(kModelVersion);
  nlohmann::json header{{"config", to_json(cfg)}};
  if (!provenance.is_null()) header["provenance"] = provenance;
  const std::string js = header.dump();
  w.u32(static_cast<std::uint32_t>(js.size()));
  w.raw(js);
  w.u32(static_cast<std::uint32_t>(p.tensors.size()));
  for (const auto& [name, t] : p.tensors) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.raw(name);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape) w.u32(static_cast<std::uint32_t>(d));
    for (float v : t.data) w.f32(v);
  }
  return w.bytes();
}

inline void save_model(const NetworkParams<float>& p, const ModelConfig& cfg, const std::filesystem::path& path,
                       const nlohmann::json& provenance = nullptr) {
  write_file(path, encode_model(p, cfg, provenance));
}

struct LoadedModel {
  NetworkParams<float> params;
  ModelConfig config;
};

inline LoadedModel decode_model(std::string_view bytes, const std::string& where) {
  if (bytes.size() < 8 || bytes.substr(0, 4) != "AWEM")
    throw IoError(str_cat(where, ": not an AWEM model file (truncated or bad magic)"));
  ByteReader r(bytes.substr(4), where);
  const auto version = r.u32();
  if (version != kModelVersion)
    throw IncompatibleModel(str_cat(where, ": model format version ", version, ", expected ", kModelVersion));
  const std::size_t js_len = r.u32();
  LoadedModel m;
  try {
    m.config = model_config_from_json(nlohmann::json::parse(r.raw(js_len)).at("config"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(str_cat(where, ": corrupt config block: ", e.what()));
  }
  validate(m.config);
  const auto specs = param_specs(m.config);
  const std::size_t count = r.u32();
  if (count != specs.size())
    throw IncompatibleModel(str_cat(where, ": ", count, " tensors, config implies ", specs.size()));
  m.params.embedding_dim = m.config.embedding_dim();
  for (const auto& spec : specs) {
    const std::string name(r.raw(r.u32()));
    if (name != spec.name)
      throw IncompatibleModel(str_cat(where, ": tensor '", name, "' where '", spec.name, "' was expected"));
    tk::Shape shape(r.u32());
    for (auto& d : shape) d = r.u32();
    if (shape != spec.shape)
      throw IncompatibleModel(str_cat(where, ": tensor '", name, "' has shape ", tk::shape_str(shape),
                                      ", config implies ", tk::shape_str(spec.shape)));
    tk::Tensor<float> t(shape);
    for (auto& v : t.data) v = r.f32();
    m.params.tensors.emplace_back(name, std::move(t));
  }
  if (r.remaining() != 0) throw IoError(str_cat(where, ": ", r.remaining(), " trailing bytes"));
  return m;
}

inline LoadedModel load_model(const std::filesystem::path& path) {
  return decode_model(read_file(path), path.string());
}

}  // namespace awe
