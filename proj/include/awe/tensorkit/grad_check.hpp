// awe/tensorkit/grad_check.hpp

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

#include <algorithm>
#include <cmath>

#include "awe/tensorkit/graph.hpp"

namespace awe::tk {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Compares the analytic gradient of a scalar loss w.r.t. `param` with central
// differences, coordinate by coordinate. `build(Graph<double>&)` must register
// `param` via Graph::param and return the loss node; it is called once with
// gradients enabled and twice per coordinate without.
//
// Relative error per coordinate is |a - n| / max(|a|, |n|, floor).
template <typename Build>
GradCheckResult grad_check_detailed(Build&& build, Tensor<double>& param, double h = 1e-5,
                                    double floor = 1e-7) {
  auto eval = [&]() {
    Graph<double> g(false);
    const double v = g.value(build(g))[0];
    if (!std::isfinite(v)) throw NumericError("grad_check: loss is not finite");
    return v;
  };

  Graph<double> g(true);
  const NodeId root = build(g);
  if (!std::isfinite(g.value(root)[0])) throw NumericError("grad_check: loss is not finite");
  g.backward(root);
  NodeId pid = kNoNode;
  for (NodeId i = 0; i < g.size(); ++i)
    if (&g.value(i) == &param) pid = i;
  if (pid == kNoNode) throw ValidationError("grad_check: param was not registered in the graph");
  const Tensor<double>* ga = g.grad(pid);
  const Tensor<double> analytic = ga ? *ga : Tensor<double>(param.shape);

  GradCheckResult res;
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double saved = param[i];
    param[i] = saved + h;
    const double up = eval();
    param[i] = saved - h;
    const double down = eval();
    param[i] = saved;
    const double numeric = (up - down) / (2 * h);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    const double rel = std::abs(analytic[i] - numeric) / denom;
    if (rel > res.max_rel_error || i == 0) res = {rel, i, analytic[i], numeric};
  }
  return res;
}

template <typename Build>
double grad_check(Build&& build, Tensor<double>& param, double h = 1e-5, double floor = 1e-7) {
  return grad_check_detailed(std::forward<Build>(build), param, h, floor).max_rel_error;
}

}  // namespace awe::tk
