// awe/tensorkit/ops.hpp

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

// Differentiable ops over Graph<T>.
//
// Feature maps are [B,C,F,T] with a per-item count of valid time steps.
// Every op that consumes a feature map treats positions t >= valid[b] as
// zero and writes exact zeros there, so a padded batch item produces the
// same values as the same item forwarded alone.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "awe/tensorkit/graph.hpp"
#include "awe/tensorkit/tensor.hpp"

namespace awe::tk {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// A feature-map node together with its per-item valid lengths along T.
struct Activation {
  NodeId node = kNoNode;
  std::vector<std::size_t> valid_t;
};

struct Conv2dGeometry {
  std::size_t stride_f = 1, stride_t = 1;
  std::size_t pad_f = 0, pad_t = 0;
};

inline std::size_t conv_out_len(std::size_t n, std::size_t k, std::size_t stride, std::size_t pad) {
  return (n + 2 * pad - k) / stride + 1;
}

namespace detail {

inline std::vector<std::size_t> full_lengths(std::size_t batch, std::size_t t) {
  return std::vector<std::size_t>(batch, t);
}

inline void check_valid(std::span<const std::size_t> valid, std::size_t batch, std::size_t t,
                        const char* op) {
  if (valid.size() != batch)
    throw ValidationError(str_cat(op, ": ", valid.size(), " valid lengths for batch of ", batch));
  for (std::size_t v : valid)
    if (v < 1 || v > t) throw ValidationError(str_cat(op, ": valid length ", v, " outside [1,", t, "]"));
}

}  // namespace detail

// Cross-correlation. `bias` may be kNoNode. Empty `valid_t` means every item
// uses the full time extent.
template <typename T>
Activation conv2d(Graph<T>& g, NodeId x, NodeId w, NodeId bias, const Conv2dGeometry& geo,
                  std::span<const std::size_t> valid_t = {}) {
  const Tensor<T>& in = g.value(x);
  const Tensor<T>& wt = g.value(w);
  if (in.rank() != 4 || wt.rank() != 4 || in.dim(1) != wt.dim(1))
    throw ShapeError(str_cat("conv2d: input ", shape_str(in.shape), " vs weight ", shape_str(wt.shape)));
  if (geo.stride_f < 1 || geo.stride_t < 1) throw ShapeError("conv2d: stride must be >= 1");
  const std::size_t B = in.dim(0), C = in.dim(1), F = in.dim(2), Tn = in.dim(3);
  const std::size_t O = wt.dim(0), kF = wt.dim(2), kT = wt.dim(3);
  if (bias != kNoNode && g.value(bias).shape != Shape{O})
    throw ShapeError(str_cat("conv2d: bias ", shape_str(g.value(bias).shape), " for ", O, " filters"));
  if (F + 2 * geo.pad_f < kF || Tn + 2 * geo.pad_t < kT)
    throw ShapeError(str_cat("conv2d: input ", shape_str(in.shape), " smaller than kernel ",
                             shape_str(wt.shape), " after padding"));
  std::vector<std::size_t> valid = valid_t.empty() ? detail::full_lengths(B, Tn)
                                                   : std::vector<std::size_t>(valid_t.begin(), valid_t.end());
  detail::check_valid(valid, B, Tn, "conv2d");

  const std::size_t Fo = conv_out_len(F, kF, geo.stride_f, geo.pad_f);
  const std::size_t To = conv_out_len(Tn, kT, geo.stride_t, geo.pad_t);
  const std::size_t K = C * kF * kT;
  std::vector<std::size_t> valid_out(B);
  for (std::size_t b = 0; b < B; ++b) {
    if (valid[b] + 2 * geo.pad_t < kT)
      throw TooShortError(str_cat("conv2d: item ", b, " has ", valid[b], " valid frames, kernel needs ",
                                  kT - std::min(kT, 2 * geo.pad_t)));
    valid_out[b] = conv_out_len(valid[b], kT, geo.stride_t, geo.pad_t);
  }

  const bool need_grad = g.any_requires_grad({x, w, bias});
  auto saved_cols = std::make_shared<std::vector<std::vector<T>>>(need_grad ? B : 0);
  Tensor<T> out(Shape{B, O, Fo, To});
  Eigen::Map<const RowMat<T>> W(wt.ptr(), static_cast<Eigen::Index>(O), static_cast<Eigen::Index>(K));

  std::vector<T> cols_buf;
  RowMat<T> res;
  for (std::size_t b = 0; b < B; ++b) {
    const std::size_t Tv = valid[b], Tov = valid_out[b], P = Fo * Tov;
    std::vector<T>& cols = need_grad ? (*saved_cols)[b] : cols_buf;
    cols.assign(K * P, T(0));
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t i = 0; i < kF; ++i)
        for (std::size_t j = 0; j < kT; ++j) {
          T* row = cols.data() + ((c * kF + i) * kT + j) * P;
          for (std::size_t fo = 0; fo < Fo; ++fo) {
            const std::ptrdiff_t f = static_cast<std::ptrdiff_t>(fo * geo.stride_f + i) -
                                     static_cast<std::ptrdiff_t>(geo.pad_f);
            if (f < 0 || f >= static_cast<std::ptrdiff_t>(F)) continue;
            const T* src = &in.data[((b * C + c) * F + static_cast<std::size_t>(f)) * Tn];
            for (std::size_t to = 0; to < Tov; ++to) {
              const std::ptrdiff_t t = static_cast<std::ptrdiff_t>(to * geo.stride_t + j) -
                                       static_cast<std::ptrdiff_t>(geo.pad_t);
              if (t >= 0 && t < static_cast<std::ptrdiff_t>(Tv)) row[fo * Tov + to] = src[t];
            }
          }
        }
    Eigen::Map<const RowMat<T>> X(cols.data(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(P));
    res.noalias() = W * X;
    for (std::size_t o = 0; o < O; ++o) {
      const T bo = bias != kNoNode ? g.value(bias)[o] : T(0);
      for (std::size_t fo = 0; fo < Fo; ++fo) {
        T* dst = &out.data[((b * O + o) * Fo + fo) * To];
        for (std::size_t to = 0; to < Tov; ++to)
          dst[to] = res(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(fo * Tov + to)) + bo;
      }
    }
  }

  auto backward = [x, w, bias, saved_cols, valid, valid_out, geo, B, C, F, Tn, O, kF, kT, Fo, To,
                   K](Graph<T>& gr, const Tensor<T>& gout) {
    const Tensor<T>& wt2 = gr.value(w);
    Eigen::Map<const RowMat<T>> Wm(wt2.ptr(), static_cast<Eigen::Index>(O), static_cast<Eigen::Index>(K));
    RowMat<T> dY, dX;
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t Tv = valid[b], Tov = valid_out[b], P = Fo * Tov;
      dY.resize(static_cast<Eigen::Index>(O), static_cast<Eigen::Index>(P));
      for (std::size_t o = 0; o < O; ++o)
        for (std::size_t fo = 0; fo < Fo; ++fo) {
          const T* src = &gout.data[((b * O + o) * Fo + fo) * To];
          for (std::size_t to = 0; to < Tov; ++to)
            dY(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(fo * Tov + to)) = src[to];
        }
      const auto& cols = (*saved_cols)[b];
      Eigen::Map<const RowMat<T>> X(cols.data(), static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(P));
      if (gr.requires_grad(w)) {
        Eigen::Map<RowMat<T>> dW(gr.grad_mut(w).ptr(), static_cast<Eigen::Index>(O), static_cast<Eigen::Index>(K));
        dW.noalias() += dY * X.transpose();
      }
      if (bias != kNoNode && gr.requires_grad(bias)) {
        auto& db = gr.grad_mut(bias);
        for (std::size_t o = 0; o < O; ++o) db[o] += dY.row(static_cast<Eigen::Index>(o)).sum();
      }
      if (gr.requires_grad(x)) {
        dX.noalias() = Wm.transpose() * dY;
        auto& gx = gr.grad_mut(x);
        for (std::size_t c = 0; c < C; ++c)
          for (std::size_t i = 0; i < kF; ++i)
            for (std::size_t j = 0; j < kT; ++j) {
              const T* row = dX.data() + ((c * kF + i) * kT + j) * P;
              for (std::size_t fo = 0; fo < Fo; ++fo) {
                const std::ptrdiff_t f = static_cast<std::ptrdiff_t>(fo * geo.stride_f + i) -
                                         static_cast<std::ptrdiff_t>(geo.pad_f);
                if (f < 0 || f >= static_cast<std::ptrdiff_t>(F)) continue;
                T* dst = &gx.data[((b * C + c) * F + static_cast<std::size_t>(f)) * Tn];
                for (std::size_t to = 0; to < Tov; ++to) {
                  const std::ptrdiff_t t = static_cast<std::ptrdiff_t>(to * geo.stride_t + j) -
                                           static_cast<std::ptrdiff_t>(geo.pad_t);
                  if (t >= 0 && t < static_cast<std::ptrdiff_t>(Tv)) dst[t] += row[fo * Tov + to];
                }
              }
            }
      }
    }
  };
  const NodeId id = g.record(std::move(out), {x, w, bias}, std::move(backward));
  return {id, std::move(valid_out)};
}

template <typename T>
NodeId relu(Graph<T>& g, NodeId x) {
  const Tensor<T>& in = g.value(x);
  Tensor<T> out(in.shape);
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > T(0) ? in[i] : T(0);
  return g.record(std::move(out), {x}, [x](Graph<T>& gr, const Tensor<T>& gout) {
    const Tensor<T>& in2 = gr.value(x);
    auto& gx = gr.grad_mut(x);
    for (std::size_t i = 0; i < gout.size(); ++i)
      if (in2[i] > T(0)) gx[i] += gout[i];
  });
}

template <typename T>
NodeId add(Graph<T>& g, NodeId a, NodeId b) {
  const Tensor<T>& va = g.value(a);
  const Tensor<T>& vb = g.value(b);
  if (va.shape != vb.shape)
    throw ShapeError(str_cat("add: ", shape_str(va.shape), " vs ", shape_str(vb.shape)));
  Tensor<T> out(va.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] + vb[i];
  return g.record(std::move(out), {a, b}, [a, b](Graph<T>& gr, const Tensor<T>& gout) {
    for (NodeId p : {a, b}) {
      if (!gr.requires_grad(p)) continue;
      auto& gp = gr.grad_mut(p);
      for (std::size_t i = 0; i < gout.size(); ++i) gp[i] += gout[i];
    }
  });
}

template <typename T>
NodeId scale(Graph<T>& g, NodeId a, T s) {
  Tensor<T> out = g.value(a);
  for (auto& v : out.data) v *= s;
  return g.record(std::move(out), {a}, [a, s](Graph<T>& gr, const Tensor<T>& gout) {
    auto& ga = gr.grad_mut(a);
    for (std::size_t i = 0; i < gout.size(); ++i) ga[i] += s * gout[i];
  });
}

// Mean of all entries, as a [1] tensor.
template <typename T>
NodeId mean(Graph<T>& g, NodeId a) {
  const Tensor<T>& in = g.value(a);
  if (in.size() == 0) throw ShapeError("mean: empty tensor");
  T acc = 0;
  for (T v : in.data) acc += v;
  const T inv = T(1) / static_cast<T>(in.size());
  return g.record(Tensor<T>(Shape{1}, acc * inv), {a}, [a, inv](Graph<T>& gr, const Tensor<T>& gout) {
    auto& ga = gr.grad_mut(a);
    for (auto& v : ga.data) v += gout[0] * inv;
  });
}

// Rows [begin, end) along dimension 0.
template <typename T>
NodeId slice_rows(Graph<T>& g, NodeId x, std::size_t begin, std::size_t end) {
  const Tensor<T>& in = g.value(x);
  if (in.rank() < 1 || begin > end || end > in.dim(0))
    throw ShapeError(str_cat("slice_rows: [", begin, ",", end, ") of ", shape_str(in.shape)));
  Shape s = in.shape;
  s[0] = end - begin;
  const std::size_t stride = in.size() / std::max<std::size_t>(in.dim(0), 1);
  Tensor<T> out(s);
  std::copy(in.data.begin() + static_cast<std::ptrdiff_t>(begin * stride),
            in.data.begin() + static_cast<std::ptrdiff_t>(end * stride), out.data.begin());
  return g.record(std::move(out), {x}, [x, begin, stride](Graph<T>& gr, const Tensor<T>& gout) {
    auto& gx = gr.grad_mut(x);
    for (std::size_t i = 0; i < gout.size(); ++i) gx[begin * stride + i] += gout[i];
  });
}

// Max pooling with partial windows kept at the edges ("ceil mode"); along T
// only positions < valid are considered.
template <typename T>
Activation max_pool2d(Graph<T>& g, NodeId x, std::size_t k, std::size_t stride,
                      std::span<const std::size_t> valid_t = {}) {
  const Tensor<T>& in = g.value(x);
  if (in.rank() != 4 || k < 1 || stride < 1)
    throw ShapeError(str_cat("max_pool2d: input ", shape_str(in.shape)));
  const std::size_t B = in.dim(0), C = in.dim(1), F = in.dim(2), Tn = in.dim(3);
  std::vector<std::size_t> valid = valid_t.empty() ? detail::full_lengths(B, Tn)
                                                   : std::vector<std::size_t>(valid_t.begin(), valid_t.end());
  detail::check_valid(valid, B, Tn, "max_pool2d");
  auto pooled_len = [k, stride](std::size_t n) { return (std::max(n, k) - k + stride - 1) / stride + 1; };
  const std::size_t Fo = pooled_len(F), To = pooled_len(Tn);
  std::vector<std::size_t> valid_out(B);
  for (std::size_t b = 0; b < B; ++b) valid_out[b] = pooled_len(valid[b]);

  Tensor<T> out(Shape{B, C, Fo, To});
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.size(), std::numeric_limits<std::size_t>::max());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t fo = 0; fo < Fo; ++fo)
        for (std::size_t to = 0; to < valid_out[b]; ++to) {
          T best = -std::numeric_limits<T>::infinity();
          std::size_t best_idx = 0;
          for (std::size_t i = fo * stride; i < std::min(F, fo * stride + k); ++i)
            for (std::size_t j = to * stride; j < std::min(valid[b], to * stride + k); ++j) {
              const std::size_t idx = ((b * C + c) * F + i) * Tn + j;
              if (in[idx] > best) {
                best = in[idx];
                best_idx = idx;
              }
            }
          const std::size_t oidx = ((b * C + c) * Fo + fo) * To + to;
          out[oidx] = best;
          (*argmax)[oidx] = best_idx;
        }
  const NodeId id = g.record(std::move(out), {x}, [x, argmax](Graph<T>& gr, const Tensor<T>& gout) {
    auto& gx = gr.grad_mut(x);
    for (std::size_t i = 0; i < gout.size(); ++i)
      if ((*argmax)[i] != std::numeric_limits<std::size_t>::max()) gx[(*argmax)[i]] += gout[i];
  });
  return {id, std::move(valid_out)};
}

// [B,C,F,T] -> [B,C]: mean over all f and over t < valid[b].
template <typename T>
NodeId gap_masked(Graph<T>& g, NodeId x, std::span<const std::size_t> valid_t) {
  const Tensor<T>& in = g.value(x);
  if (in.rank() != 4) throw ShapeError(str_cat("gap_masked: input ", shape_str(in.shape)));
  const std::size_t B = in.dim(0), C = in.dim(1), F = in.dim(2), Tn = in.dim(3);
  std::vector<std::size_t> valid = valid_t.empty() ? detail::full_lengths(B, Tn)
                                                   : std::vector<std::size_t>(valid_t.begin(), valid_t.end());
  detail::check_valid(valid, B, Tn, "gap_masked");
  Tensor<T> out(Shape{B, C});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c) {
      T acc = 0;
      for (std::size_t f = 0; f < F; ++f) {
        const T* row = &in.data[((b * C + c) * F + f) * Tn];
        for (std::size_t t = 0; t < valid[b]; ++t) acc += row[t];
      }
      out.at(b, c) = acc / static_cast<T>(F * valid[b]);
    }
  return g.record(std::move(out), {x}, [x, valid, C, F, Tn](Graph<T>& gr, const Tensor<T>& gout) {
    auto& gx = gr.grad_mut(x);
    for (std::size_t b = 0; b < valid.size(); ++b)
      for (std::size_t c = 0; c < C; ++c) {
        const T v = gout.at(b, c) / static_cast<T>(F * valid[b]);
        for (std::size_t f = 0; f < F; ++f) {
          T* row = &gx.data[((b * C + c) * F + f) * Tn];
          for (std::size_t t = 0; t < valid[b]; ++t) row[t] += v;
        }
      }
  });
}

// x:[B,In], w:[Out,In], b:[Out] -> [B,Out].
template <typename T>
NodeId linear(Graph<T>& g, NodeId x, NodeId w, NodeId bias) {
  const Tensor<T>& in = g.value(x);
  const Tensor<T>& wt = g.value(w);
  if (in.rank() != 2 || wt.rank() != 2 || in.dim(1) != wt.dim(1))
    throw ShapeError(str_cat("linear: input ", shape_str(in.shape), " vs weight ", shape_str(wt.shape)));
  const auto B = static_cast<Eigen::Index>(in.dim(0));
  const auto In = static_cast<Eigen::Index>(in.dim(1));
  const auto Out = static_cast<Eigen::Index>(wt.dim(0));
  if (bias != kNoNode && g.value(bias).shape != Shape{wt.dim(0)})
    throw ShapeError(str_cat("linear: bias ", shape_str(g.value(bias).shape)));
  Tensor<T> out(Shape{in.dim(0), wt.dim(0)});
  Eigen::Map<const RowMat<T>> X(in.ptr(), B, In);
  Eigen::Map<const RowMat<T>> W(wt.ptr(), Out, In);
  Eigen::Map<RowMat<T>> Y(out.ptr(), B, Out);
  Y.noalias() = X * W.transpose();
  if (bias != kNoNode)
    for (Eigen::Index r = 0; r < B; ++r)
      for (Eigen::Index c = 0; c < Out; ++c) Y(r, c) += g.value(bias)[static_cast<std::size_t>(c)];
  return g.record(std::move(out), {x, w, bias}, [x, w, bias, B, In, Out](Graph<T>& gr, const Tensor<T>& gout) {
    Eigen::Map<const RowMat<T>> dY(gout.ptr(), B, Out);
    if (gr.requires_grad(w)) {
      Eigen::Map<const RowMat<T>> X(gr.value(x).ptr(), B, In);
      Eigen::Map<RowMat<T>> dW(gr.grad_mut(w).ptr(), Out, In);
      dW.noalias() += dY.transpose() * X;
    }
    if (bias != kNoNode && gr.requires_grad(bias)) {
      auto& db = gr.grad_mut(bias);
      for (Eigen::Index c = 0; c < Out; ++c) db[static_cast<std::size_t>(c)] += dY.col(c).sum();
    }
    if (gr.requires_grad(x)) {
      Eigen::Map<const RowMat<T>> W(gr.value(w).ptr(), Out, In);
      Eigen::Map<RowMat<T>> dX(gr.grad_mut(x).ptr(), B, In);
      dX.noalias() += dY * W;
    }
  });
}

// ---------------------------------------------------------------------------
// Softmax family. `layout == nullptr` means one softmax over all outputs.

namespace detail {

inline std::pair<std::size_t, std::size_t> active_block(const BlockLayout* layout, std::size_t n,
                                                        int lang) {
  if (!layout) return {0, n};
  if (lang < 0 || static_cast<std::size_t>(lang) >= layout->blocks.size())
    throw ValidationError(str_cat("language id ", lang, " has no block in layout"));
  if (layout->total() != n)
    throw ShapeError(str_cat("layout covers ", layout->total(), " outputs, activations have ", n));
  return layout->blocks[static_cast<std::size_t>(lang)];
}

template <typename T>
void softmax_range(const T* a, T* y, std::size_t lo, std::size_t hi) {
  T mx = a[lo];
  for (std::size_t i = lo + 1; i < hi; ++i) mx = std::max(mx, a[i]);
  T z = 0;
  for (std::size_t i = lo; i < hi; ++i) z += std::exp(a[i] - mx);
  for (std::size_t i = lo; i < hi; ++i) y[i] = std::exp(a[i] - mx) / z;
}

}  // namespace detail

// Interval softmax: normalised over the item's language block, zero elsewhere.
template <typename T>
Tensor<T> block_softmax(const Tensor<T>& a, const BlockLayout& layout, std::span<const int> lang) {
  if (a.rank() != 2 || lang.size() != a.dim(0))
    throw ShapeError(str_cat("block_softmax: activations ", shape_str(a.shape), " with ", lang.size(),
                             " language ids"));
  const std::size_t B = a.dim(0), N = a.dim(1);
  Tensor<T> y(a.shape);
  for (std::size_t b = 0; b < B; ++b) {
    const auto [lo, hi] = detail::active_block(&layout, N, lang[b]);
    detail::softmax_range(a.ptr() + b * N, y.ptr() + b * N, lo, hi);
  }
  return y;
}

template <typename T>
NodeId block_softmax(Graph<T>& g, NodeId a, const BlockLayout& layout, std::span<const int> lang) {
  Tensor<T> y = block_softmax(g.value(a), layout, lang);
  auto probs = std::make_shared<Tensor<T>>(y);
  return g.record(std::move(y), {a}, [a, probs](Graph<T>& gr, const Tensor<T>& gout) {
    auto& ga = gr.grad_mut(a);
    const std::size_t B = probs->dim(0), N = probs->dim(1);
    for (std::size_t b = 0; b < B; ++b) {
      T dot = 0;
      for (std::size_t i = 0; i < N; ++i) dot += probs->at(b, i) * gout.at(b, i);
      // Outside the block y == 0, so the gradient there is exactly 0.
      for (std::size_t i = 0; i < N; ++i) ga.at(b, i) += probs->at(b, i) * (gout.at(b, i) - dot);
    }
  });
}

// Per-item -log softmax(logits)[target] over the active block, fused and
// max-stabilised. Returns a [B] node.
template <typename T>
NodeId softmax_cross_entropy(Graph<T>& g, NodeId logits, std::span<const int> targets,
                             const BlockLayout* layout = nullptr, std::span<const int> lang = {}) {
  const Tensor<T>& a = g.value(logits);
  if (a.rank() != 2 || targets.size() != a.dim(0) || (layout && lang.size() != a.dim(0)))
    throw ShapeError(str_cat("softmax_cross_entropy: logits ", shape_str(a.shape), " with ",
                             targets.size(), " targets"));
  const std::size_t B = a.dim(0), N = a.dim(1);
  auto probs = std::make_shared<Tensor<T>>(a.shape);
  Tensor<T> loss(Shape{B});
  std::vector<int> tgt(targets.begin(), targets.end());
  for (std::size_t b = 0; b < B; ++b) {
    const auto [lo, hi] = detail::active_block(layout, N, layout ? lang[b] : 0);
    const int t = tgt[b];
    if (t < static_cast<int>(lo) || t >= static_cast<int>(hi))
      throw ValidationError(str_cat("label/language mismatch: target ", t, " outside active block [", lo,
                                    ",", hi, ") of item ", b));
    const T* row = a.ptr() + b * N;
    T mx = row[lo];
    for (std::size_t i = lo + 1; i < hi; ++i) mx = std::max(mx, row[i]);
    T z = 0;
    for (std::size_t i = lo; i < hi; ++i) z += std::exp(row[i] - mx);
    const T log_z = mx + std::log(z);
    loss[b] = log_z - row[t];
    for (std::size_t i = lo; i < hi; ++i) probs->at(b, i) = std::exp(row[i] - log_z);
  }
  return g.record(std::move(loss), {logits}, [logits, probs, tgt](Graph<T>& gr, const Tensor<T>& gout) {
    auto& ga = gr.grad_mut(logits);
    const std::size_t N = probs->dim(1);
    for (std::size_t b = 0; b < tgt.size(); ++b) {
      for (std::size_t i = 0; i < N; ++i) ga.at(b, i) += gout[b] * probs->at(b, i);
      ga.at(b, static_cast<std::size_t>(tgt[b])) -= gout[b];
    }
  });
}

// Row-wise mean squared difference: [B,d] x [B,d] -> [B].
template <typename T>
NodeId row_mse(Graph<T>& g, NodeId e1, NodeId e2) {
  const Tensor<T>& a = g.value(e1);
  const Tensor<T>& b = g.value(e2);
  if (a.shape != b.shape || a.rank() != 2)
    throw ShapeError(str_cat("mse: ", shape_str(a.shape), " vs ", shape_str(b.shape)));
  const std::size_t B = a.dim(0), d = a.dim(1);
  Tensor<T> out(Shape{B});
  for (std::size_t r = 0; r < B; ++r) {
    T acc = 0;
    for (std::size_t k = 0; k < d; ++k) {
      const T diff = a.at(r, k) - b.at(r, k);
      acc += diff * diff;
    }
    out[r] = acc / static_cast<T>(d);
  }
  return g.record(std::move(out), {e1, e2}, [e1, e2, B, d](Graph<T>& gr, const Tensor<T>& gout) {
    const Tensor<T>& a2 = gr.value(e1);
    const Tensor<T>& b2 = gr.value(e2);
    for (std::size_t r = 0; r < B; ++r)
      for (std::size_t k = 0; k < d; ++k) {
        const T v = T(2) / static_cast<T>(d) * (a2.at(r, k) - b2.at(r, k)) * gout[r];
        if (gr.requires_grad(e1)) gr.grad_mut(e1).at(r, k) += v;
        if (gr.requires_grad(e2)) gr.grad_mut(e2).at(r, k) -= v;
      }
  });
}

template <typename T>
T mse(std::span<const T> e1, std::span<const T> e2) {
  if (e1.size() != e2.size() || e1.empty())
    throw ShapeError(str_cat("mse: sizes ", e1.size(), " vs ", e2.size()));
  T acc = 0;
  for (std::size_t i = 0; i < e1.size(); ++i) acc += (e1[i] - e2[i]) * (e1[i] - e2[i]);
  return acc / static_cast<T>(e1.size());
}

}  // namespace awe::tk
