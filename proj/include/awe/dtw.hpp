// awe/dtw.hpp

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

#pragma once

#include <limits>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "awe/common.hpp"
#include "awe/corpus.hpp"
#include "awe/features.hpp"
#include "awe/matcher.hpp"
#include "awe/ranking.hpp"

namespace awe {

using WarpPath = std::vector<std::pair<std::size_t, std::size_t>>;

struct DtwResult {
  double cost = 0.0;
  WarpPath path;
  // Matched content span [span_begin, span_end). Whole range for global DTW.
  std::size_t span_begin = 0;
  std::size_t span_end = 0;
  // cost / number of query frames.
  double normalized_cost = 0.0;
};

// Dense row-major local-cost matrix, rows = query/first frames.
struct CostMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
};

inline double local_cost(std::span<const float> a, std::span<const float> b) { return cosine_distance(a, b); }

inline CostMatrix cost_matrix(const FeatureSequence& a, const FeatureSequence& b) {
  if (a.num_frames == 0 || b.num_frames == 0) throw ValidationError("dtw: empty input sequence");
  if (a.dim != b.dim) throw ShapeError(str_cat("dtw: feature dim mismatch ", a.dim, " vs ", b.dim));
  CostMatrix c{a.num_frames, b.num_frames, std::vector<double>(a.num_frames * b.num_frames)};
  for (std::size_t i = 0; i < a.num_frames; ++i)
    for (std::size_t j = 0; j < b.num_frames; ++j) c(i, j) = local_cost(a.row(i), b.row(j));
  return c;
}

namespace detail {

// Walks back from (i, j) to row 0 (subsequence) or to (0, 0) (global),
// preferring the diagonal, then (1,0), then (0,1) on equal accumulated cost.
inline WarpPath backtrace(const CostMatrix& acc, std::size_t i, std::size_t j, bool free_start) {
  WarpPath path{{i, j}};
  while (i > 0 || j > 0) {
    if (i == 0) {
      if (free_start) break;
      --j;
    } else if (j == 0) {
      --i;
    } else {
      const double d = acc(i - 1, j - 1), v = acc(i - 1, j), h = acc(i, j - 1);
      if (d <= v && d <= h) {
        --i;
        --j;
      } else if (v <= h) {
        --i;
      } else {
        --j;
      }
    }
    path.emplace_back(i, j);
  }
  std::reverse(path.begin(), path.end());
  return path;
}

// Accumulated-cost DP. With free_start, row 0 carries only its local cost
// so a match may begin at any content column.
inline CostMatrix accumulate(const CostMatrix& c, bool free_start) {
  CostMatrix acc{c.rows, c.cols, std::vector<double>(c.data.size())};
  for (std::size_t i = 0; i < c.rows; ++i)
    for (std::size_t j = 0; j < c.cols; ++j) {
      double best;
      if (i == 0 && j == 0) {
        best = 0.0;
      } else if (i == 0) {
        best = free_start ? 0.0 : acc(0, j - 1);
      } else if (j == 0) {
        best = acc(i - 1, 0);
      } else {
        best = std::min({acc(i - 1, j - 1), acc(i - 1, j), acc(i, j - 1)});
      }
      acc(i, j) = (i == 0 && (j == 0 || free_start)) ? c(i, j) : c(i, j) + best;
    }
  return acc;
}

}  // namespace detail

inline DtwResult dtw_from_cost(const CostMatrix& c) {
  if (c.rows == 0 || c.cols == 0) throw ValidationError("dtw: empty input sequence");
  const CostMatrix acc = detail::accumulate(c, false);
  DtwResult r;
  r.cost = acc(c.rows - 1, c.cols - 1);
  r.path = detail::backtrace(acc, c.rows - 1, c.cols - 1, false);
  r.span_begin = 0;
  r.span_end = c.cols;
  r.normalized_cost = r.cost / static_cast<double>(c.rows);
  return r;
}

inline DtwResult sdtw_from_cost(const CostMatrix& c) {
  if (c.rows == 0 || c.cols == 0) throw ValidationError("sdtw: empty input sequence");
  const CostMatrix acc = detail::accumulate(c, true);
  std::size_t end = 0;
  for (std::size_t j = 1; j < c.cols; ++j)
    if (acc(c.rows - 1, j) < acc(c.rows - 1, end)) end = j;
  DtwResult r;
  r.cost = acc(c.rows - 1, end);
  r.path = detail::backtrace(acc, c.rows - 1, end, true);
  r.span_begin = r.path.front().second;
  r.span_end = end + 1;
  r.normalized_cost = r.cost / static_cast<double>(c.rows);
  return r;
}

inline DtwResult dtw(const FeatureSequence& a, const FeatureSequence& b) { return dtw_from_cost(cost_matrix(a, b)); }

inline DtwResult sdtw(const FeatureSequence& query, const FeatureSequence& content) {
  return sdtw_from_cost(cost_matrix(query, content));
}

// Averages, for each frame of the main template, every frame aligned to it
// across all templates (the main frame itself included).
inline FeatureSequence fuse_templates_dtw(std::span<const FeatureSequence> templates, std::size_t main_index = 0) {
  if (templates.empty()) throw ValidationError("fuse_templates_dtw: no templates");
  if (main_index >= templates.size())
    throw ValidationError(str_cat("fuse_templates_dtw: main_index ", main_index, " out of range"));
  const FeatureSequence& main = templates[main_index];
  const std::size_t t_len = main.num_frames, d = main.dim;
  std::vector<double> sum(t_len * d);
  std::vector<std::size_t> count(t_len, 1);
  for (std::size_t t = 0; t < t_len; ++t)
    for (std::size_t k = 0; k < d; ++k) sum[t * d + k] = main(t, k);
  for (std::size_t n = 0; n < templates.size(); ++n) {
    if (n == main_index) continue;
    const FeatureSequence& other = templates[n];
    for (const auto& [t, u] : dtw(main, other).path) {
      ++count[t];
      for (std::size_t k = 0; k < d; ++k) sum[t * d + k] += other(u, k);
    }
  }
  FeatureSequence out = main;
  for (std::size_t t = 0; t < t_len; ++t)
    for (std::size_t k = 0; k < d; ++k)
      out.data[t * d + k] = static_cast<float>(sum[t * d + k] / static_cast<double>(count[t]));
  return out;
}

enum class Fusion { kNone, kDtw };

inline const char* to_string(Fusion f) { return f == Fusion::kNone ? "none" : "dtw"; }

inline Fusion fusion_from(std::string_view s) {
  if (s == "none") return Fusion::kNone;
  if (s == "dtw") return Fusion::kDtw;
  throw ValidationError(str_cat("unknown fusion mode '", s, "' (expected none|dtw)"));
}

struct KeywordTemplates {
  int keyword_id = 0;
  std::vector<FeatureSequence> templates;
};

inline std::vector<RankedList> sdtw_search(std::span<const KeywordTemplates> keywords,
                                           std::span<const Utterance> utterances, Fusion fusion,
                                           std::size_t main_index = 0, std::size_t threads = 1) {
  // Queries actually matched for each keyword.
  std::vector<std::vector<FeatureSequence>> queries(keywords.size());
  for (std::size_t k = 0; k < keywords.size(); ++k) {
    const auto& kw = keywords[k];
    if (kw.templates.empty()) throw ValidationError(str_cat("keyword ", kw.keyword_id, ": no templates"));
    if (fusion == Fusion::kDtw)
      queries[k].push_back(fuse_templates_dtw(kw.templates, main_index));
    else
      queries[k] = kw.templates;
  }

  const std::size_t nu = utterances.size();
  std::vector<RankedEntry> cells(keywords.size() * nu);
  parallel_for(cells.size(), threads, [&](std::size_t idx) {
    const std::size_t k = idx / nu, u = idx % nu;
    RankedEntry best{utterances[u].utterance_id, std::numeric_limits<double>::infinity(), 0};
    for (const auto& q : queries[k]) {
      const DtwResult r = sdtw(q, utterances[u].features);
      if (r.normalized_cost < best.score) best = {best.utterance_id, r.normalized_cost, r.span_begin};
    }
    cells[idx] = best;
  });

  std::vector<RankedList> out(keywords.size());
  for (std::size_t k = 0; k < keywords.size(); ++k) {
    out[k].keyword_id = keywords[k].keyword_id;
    out[k].entries.assign(cells.begin() + static_cast<std::ptrdiff_t>(k * nu),
                          cells.begin() + static_cast<std::ptrdiff_t>((k + 1) * nu));
    sort_canonical(out[k]);
  }
  return out;
}

}  // namespace awe
