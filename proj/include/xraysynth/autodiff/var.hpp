/*
 * Copyright 2026 The xraysynth Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#pragma once

// Reverse-mode automatic differentiation over Tensor values.
//
// Every primitive records a node holding its output, its inputs and a
// backward rule. Backward rules are themselves written in terms of recorded
// primitives, so running `grad(..., create_graph = true)` yields gradients
// that can be differentiated again (needed for the R1 penalty, which
// differentiates a squared input-gradient norm with respect to parameters).

#include <functional>
#include <memory>
#include <vector>

#include "xraysynth/autodiff/tensor.hpp"

namespace xrs::ad {

template <class T>
class Var;

template <class T>
struct Node {
  Tensor<T> value;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<Var<T>> inputs;
  // One gradient per input; an undefined Var means "no contribution".
  std::function<std::vector<Var<T>>(const Node& self, const Var<T>& grad_out)> backward;
};

template <class T>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Var constant(Tensor<T> value);
  static Var leaf(Tensor<T> value, bool requires_grad = true);

  bool defined() const { return static_cast<bool>(node_); }
  const Tensor<T>& value() const { return node_->value; }
  /// In-place access for parameter updates. Only valid on leaves.
  Tensor<T>& mutable_value();
  const Shape& shape() const { return node_->value.shape(); }
  int64_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const char* op() const { return node_->op; }
  T item() const;
  Var detach() const { return constant(node_->value); }

  Node<T>* node_ptr() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

// ---- global switches (thread-local) ---------------------------------------

/// Whether primitives record graph nodes. Off inside plain backward passes and
/// under NoGrad.
bool grad_enabled();

class GradMode {
 public:
  explicit GradMode(bool enabled);
  ~GradMode();
  GradMode(const GradMode&) = delete;
  GradMode& operator=(const GradMode&) = delete;

 private:
  bool previous_;
};

struct NoGrad : GradMode {
  NoGrad() : GradMode(false) {}
};

/// When on, every primitive checks its output and throws NonFiniteError
/// naming itself on the first NaN/Inf.
bool finite_checks_enabled();

class FiniteChecks {
 public:
  explicit FiniteChecks(bool enabled);
  ~FiniteChecks();
  FiniteChecks(const FiniteChecks&) = delete;
  FiniteChecks& operator=(const FiniteChecks&) = delete;

 private:
  bool previous_;
};

/// Highest derivative order the engine will build. 2 by default; setting 1
/// emulates a first-order-only facility (create_graph requests then throw).
int max_derivative_order();
void set_max_derivative_order(int order);

/// True if squared input-gradient norms can be differentiated with respect to
/// parameters, i.e. exact R1 is possible.
bool double_backward_available();

// ---- recording -------------------------------------------------------------

template <class T>
using BackwardFn = std::function<std::vector<Var<T>>(const Node<T>&, const Var<T>&)>;

/// Wraps a freshly computed value as the output of primitive `op`. Records a
/// node only if grad mode is on and some input requires a gradient.
template <class T>
Var<T> record(const char* op, Tensor<T> value, std::vector<Var<T>> inputs, BackwardFn<T> backward);

/// Gradients of the scalar `output` with respect to each of `wrt`. Inputs the
/// output does not depend on get a zero tensor. With `create_graph` the
/// returned gradients are themselves differentiable.
template <class T>
std::vector<Var<T>> grad(const Var<T>& output, const std::vector<Var<T>>& wrt,
                         bool create_graph = false);

extern template class Var<float>;
extern template class Var<double>;

}  // namespace xrs::ad
