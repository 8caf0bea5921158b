// awe/tensorkit/optim.hpp

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

#include <span>

#include "awe/common.hpp"

namespace awe::tk {

// SGD with Nesterov momentum, in the look-ahead form
//   v     <- mu * v - lr * g
//   theta <- theta + mu * v - lr * g
// which is equivalent to evaluating the gradient at theta + mu * v.
template <typename T>
void sgd_nesterov_step(std::span<T> params, std::span<const T> grads, std::span<T> velocity, T lr,
                       T momentum = T(0.9)) {
  if (params.size() != grads.size() || params.size() != velocity.size())
    throw ShapeError(str_cat("sgd_nesterov_step: params ", params.size(), ", grads ", grads.size(),
                             ", velocity ", velocity.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    velocity[i] = momentum * velocity[i] - lr * grads[i];
    params[i] += momentum * velocity[i] - lr * grads[i];
  }
}

}  // namespace awe::tk
