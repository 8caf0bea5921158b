// awe/tensorkit/graph.hpp

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

// Reverse-mode tape. Nodes are appended in topological order by construction,
// so backward() is a single reverse sweep.

#pragma once

#include <functional>
#include <initializer_list>
#include <limits>
#include <vector>

#include "awe/tensorkit/tensor.hpp"

namespace awe::tk {

using NodeId = std::size_t;
inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

template <typename T>
class Graph {
 public:
  // Receives the node's accumulated output gradient; accumulates into parents.
  using BackwardFn = std::function<void(Graph&, const Tensor<T>&)>;

  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool grad_enabled() const { return grad_enabled_; }

  NodeId constant(Tensor<T> v) {
    nodes_.push_back(Node{std::move(v), nullptr, {}, false, false, nullptr});
    return nodes_.size() - 1;
  }

  // Trainable leaf. `v` is referenced, not copied, and must outlive the graph.
  NodeId param(const Tensor<T>& v) {
    nodes_.push_back(Node{{}, &v, {}, grad_enabled_, false, nullptr});
    return nodes_.size() - 1;
  }

  bool requires_grad(NodeId id) const { return id != kNoNode && nodes_[id].requires_grad; }

  bool any_requires_grad(std::initializer_list<NodeId> ids) const {
    if (!grad_enabled_) return false;
    for (NodeId id : ids)
      if (requires_grad(id)) return true;
    return false;
  }

  // Appends an op output. `fn` is dropped when no parent needs a gradient.
  NodeId record(Tensor<T> value, std::initializer_list<NodeId> parents, BackwardFn fn) {
    const bool rg = any_requires_grad(parents);
    nodes_.push_back(Node{std::move(value), nullptr, {}, rg, false, rg ? std::move(fn) : nullptr});
    return nodes_.size() - 1;
  }

  const Tensor<T>& value(NodeId id) const {
    const Node& n = nodes_.at(id);
    return n.ref ? *n.ref : n.owned;
  }

  // Null when no gradient reached this node.
  const Tensor<T>* grad(NodeId id) const {
    const Node& n = nodes_.at(id);
    return n.has_grad ? &n.grad : nullptr;
  }

  // Zero-initialised on first access.
  Tensor<T>& grad_mut(NodeId id) {
    Node& n = nodes_.at(id);
    if (!n.has_grad) {
      n.grad = Tensor<T>(value(id).shape);
      n.has_grad = true;
    }
    return n.grad;
  }

  void backward(NodeId root) {
    if (value(root).size() != 1)
      throw ShapeError(str_cat("backward root must be scalar, got ", shape_str(value(root).shape)));
    if (!requires_grad(root)) return;
    grad_mut(root).data[0] = T(1);
    for (NodeId i = root + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.has_grad && n.backward) n.backward(*this, n.grad);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> owned;
    const Tensor<T>* ref;
    Tensor<T> grad;
    bool requires_grad;
    bool has_grad;
    BackwardFn backward;
  };

  bool grad_enabled_;
  std::vector<Node> nodes_;
};

}  // namespace awe::tk
