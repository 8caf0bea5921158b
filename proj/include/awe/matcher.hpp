// awe/matcher.hpp

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

// Embedding-based keyword search. Each utterance is cut into fixed-length
// windows, every window is embedded, and the cosine cost against a fused
// keyword embedding is smoothed with a trailing moving average. The utterance
// score is the minimum of the smoothed trace.

#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "json.hpp"

#include "awe/common.hpp"
#include "awe/corpus.hpp"
#include "awe/features.hpp"
#include "awe/model.hpp"
#include "awe/ranking.hpp"

namespace awe {

struct WindowConfig {
  double window_seconds = 0.8;
  std::size_t stride_frames = 5;
  std::size_t sma_len = 5;
  bool operator==(const WindowConfig&) const = default;
};

inline void validate(const WindowConfig& c) {
  if (!(c.window_seconds > 0) || !std::isfinite(c.window_seconds))
    throw ValidationError("WindowConfig.window_seconds: must be > 0");
  if (c.stride_frames < 1) throw ValidationError("WindowConfig.stride_frames: must be >= 1");
  if (c.sma_len < 1) throw ValidationError("WindowConfig.sma_len: must be >= 1");
}

inline std::size_t window_frames(const WindowConfig& c, double frame_shift) {
  validate(c);
  if (!(frame_shift > 0)) throw ValidationError("window_frames: frame_shift must be > 0");
  const double w = std::round(c.window_seconds / frame_shift);
  if (w < 1) throw ValidationError(str_cat("window of ", c.window_seconds, " s is shorter than one frame"));
  return static_cast<std::size_t>(w);
}

inline nlohmann::json to_json(const WindowConfig& c) {
  return {{"window_seconds", c.window_seconds}, {"stride_frames", c.stride_frames}, {"sma_len", c.sma_len}};
}

inline WindowConfig window_config_from_json(const nlohmann::json& j, WindowConfig c = {}) {
  if (j.contains("window_seconds")) c.window_seconds = j.at("window_seconds").get<double>();
  if (j.contains("stride_frames")) c.stride_frames = j.at("stride_frames").get<std::size_t>();
  if (j.contains("sma_len")) c.sma_len = j.at("sma_len").get<std::size_t>();
  validate(c);
  return c;
}

struct Window {
  std::size_t start_frame = 0;
  FeatureSequence features;
};

inline std::vector<Window> window_segments(const FeatureSequence& seq, const WindowConfig& cfg) {
  if (seq.num_frames == 0) throw ValidationError("window_segments: empty sequence");
  const std::size_t w = window_frames(cfg, seq.frame_shift);
  std::vector<Window> out;
  for (std::size_t start = 0; start < seq.num_frames; start += cfg.stride_frames) {
    const std::size_t end = std::min(seq.num_frames, start + w);
    out.push_back({start, pad_or_clip(seq.slice(start, end), w)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Costs

// 1 - cos(a, b). A zero-norm operand yields 1.0 and sets *zero_norm.
inline double cosine_distance(std::span<const float> a, std::span<const float> b, bool* zero_norm = nullptr) {
  if (a.size() != b.size())
    throw ShapeError(str_cat("cosine_distance: dim mismatch ", a.size(), " vs ", b.size()));
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0 || nb == 0) {
    if (zero_norm) *zero_norm = true;
    return 1.0;
  }
  const double c = dot / (std::sqrt(na) * std::sqrt(nb));
  return 1.0 - std::clamp(c, -1.0, 1.0);
}

struct CostTrace {
  double min_cost = 0.0;
  std::size_t argmin = 0;  // 0-based
  std::vector<double> trace;
  bool zero_norm_warning = false;
};

inline CostTrace cosine_cost(const Embedding& x, std::span<const Embedding> ys) {
  if (ys.empty()) throw ValidationError("cosine_cost: no candidate embeddings");
  CostTrace r;
  r.trace.reserve(ys.size());
  for (const auto& y : ys) r.trace.push_back(cosine_distance(x, y, &r.zero_norm_warning));
  r.argmin = static_cast<std::size_t>(std::min_element(r.trace.begin(), r.trace.end()) - r.trace.begin());
  r.min_cost = r.trace[r.argmin];
  return r;
}

// Trailing simple moving average; the first k-1 outputs average what exists.
inline std::vector<double> sma(std::span<const double> trace, std::size_t k) {
  if (k < 1) throw ValidationError("sma: k must be >= 1");
  std::vector<double> out(trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const std::size_t n = std::min(i + 1, k);
    double s = 0;
    for (std::size_t j = i + 1 - n; j <= i; ++j) s += trace[j];
    out[i] = s / static_cast<double>(n);
  }
  return out;
}

inline Embedding fuse_templates_mean(std::span<const Embedding> embs) {
  if (embs.empty()) throw ValidationError("fuse_templates_mean: no templates");
  const std::size_t d = embs.front().size();
  std::vector<double> acc(d, 0.0);
  for (const auto& e : embs) {
    if (e.size() != d) throw ShapeError(str_cat("fuse_templates_mean: dim mismatch ", e.size(), " vs ", d));
    for (std::size_t i = 0; i < d; ++i) acc[i] += e[i];
  }
  Embedding out(d);
  for (std::size_t i = 0; i < d; ++i) out[i] = static_cast<float>(acc[i] / static_cast<double>(embs.size()));
  return out;
}

// ---------------------------------------------------------------------------
// Queries and search

struct KeywordQuery {
  int keyword_id = 0;
  std::vector<Embedding> templates;
  Embedding fused;
};

// Pads or clips each template to the window length, embeds it, and fuses.
template <typename T>
KeywordQuery make_query(int keyword_id, std::span<const FeatureSequence> templates, const NetworkParams<T>& params,
                        const ModelConfig& mcfg, const WindowConfig& wcfg) {
  if (templates.empty()) throw ValidationError(str_cat("keyword ", keyword_id, ": no templates"));
  std::vector<FeatureSequence> fitted;
  fitted.reserve(templates.size());
  for (const auto& t : templates) fitted.push_back(pad_or_clip(t, window_frames(wcfg, t.frame_shift)));
  KeywordQuery q;
  q.keyword_id = keyword_id;
  q.templates = extract_embeddings(params, mcfg, std::span<const FeatureSequence>(fitted));
  q.fused = fuse_templates_mean(q.templates);
  return q;
}

struct ScoreTrace {
  int keyword_id = 0;
  int utterance_id = 0;
  std::vector<std::size_t> starts;  // window start frames
  std::vector<double> costs;        // raw cosine costs
  std::vector<double> smoothed;     // after the moving average
};

struct SearchOutput {
  std::vector<RankedList> rankings;  // one per query, in query order
  std::vector<ScoreTrace> traces;    // query-major, utterance order within
  bool zero_norm_warning = false;
};

// Utterance score from a smoothed trace: minimum, first index on ties.
inline RankedEntry score_trace(int utterance_id, const std::vector<std::size_t>& starts,
                               const std::vector<double>& smoothed) {
  const auto it = std::min_element(smoothed.begin(), smoothed.end());
  return {utterance_id, *it, starts[static_cast<std::size_t>(it - smoothed.begin())]};
}

template <typename T>
SearchOutput search(std::span<const KeywordQuery> queries, std::span<const Utterance> utterances,
                    const NetworkParams<T>& params, const ModelConfig& mcfg, const WindowConfig& wcfg,
                    std::size_t threads = 1) {
  validate(wcfg);
  for (const auto& q : queries) {
    if (q.templates.empty()) throw ValidationError(str_cat("keyword ", q.keyword_id, ": no templates"));
    if (q.fused.size() != params.embedding_dim)
      throw ShapeError(str_cat("keyword ", q.keyword_id, ": embedding dim ", q.fused.size(), " but model has ",
                               params.embedding_dim));
  }

  // Per utterance: window starts and window embeddings, computed once.
  struct Embedded {
    std::vector<std::size_t> starts;
    std::vector<Embedding> windows;
  };
  std::vector<Embedded> emb(utterances.size());
  parallel_for(utterances.size(), threads, [&](std::size_t u) {
    auto wins = window_segments(utterances[u].features, wcfg);
    std::vector<FeatureSequence> feats;
    feats.reserve(wins.size());
    for (auto& w : wins) {
      emb[u].starts.push_back(w.start_frame);
      feats.push_back(std::move(w.features));
    }
    emb[u].windows = extract_embeddings(params, mcfg, std::span<const FeatureSequence>(feats));
  });

  SearchOutput out;
  for (const auto& q : queries) {
    RankedList list;
    list.keyword_id = q.keyword_id;
    for (std::size_t u = 0; u < utterances.size(); ++u) {
      ScoreTrace tr;
      tr.keyword_id = q.keyword_id;
      tr.utterance_id = utterances[u].utterance_id;
      tr.starts = emb[u].starts;
      CostTrace c = cosine_cost(q.fused, emb[u].windows);
      out.zero_norm_warning = out.zero_norm_warning || c.zero_norm_warning;
      tr.costs = std::move(c.trace);
      tr.smoothed = sma(tr.costs, wcfg.sma_len);
      list.entries.push_back(score_trace(tr.utterance_id, tr.starts, tr.smoothed));
      out.traces.push_back(std::move(tr));
    }
    sort_canonical(list);
    out.rankings.push_back(std::move(list));
  }
  if (out.zero_norm_warning) log_warning("search: zero-norm embedding encountered; cost set to 1.0");
  return out;
}

// Trace dump: "AWET" u32 version, u32 count, then per trace keyword id,
// utterance id, length n, n start frames (u32), n raw costs (f32), n smoothed
// costs (f32).
inline std::string encode_traces(std::span<const ScoreTrace> traces) {
  ByteWriter w;
  w.raw("AWET");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(traces.size()));
  for (const auto& t : traces) {
    w.u32(static_cast<std::uint32_t>(t.keyword_id));
    w.u32(static_cast<std::uint32_t>(t.utterance_id));
    w.u32(static_cast<std::uint32_t>(t.costs.size()));
    for (auto s : t.starts) w.u32(static_cast<std::uint32_t>(s));
    for (auto c : t.costs) w.f32(static_cast<float>(c));
    for (auto c : t.smoothed) w.f32(static_cast<float>(c));
  }
  return w.bytes();
}

}  // namespace awe
