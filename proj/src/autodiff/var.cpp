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


#include "xraysynth/autodiff/var.hpp"

#include <string>
#include <unordered_map>
#include <unordered_set>

#include "xraysynth/autodiff/ops.hpp"

namespace xrs::ad {

namespace {
thread_local bool t_grad_enabled = true;
thread_local bool t_finite_checks = false;
int g_max_order = 2;
}  // namespace

bool grad_enabled() { return t_grad_enabled; }
GradMode::GradMode(bool enabled) : previous_(t_grad_enabled) { t_grad_enabled = enabled; }
GradMode::~GradMode() { t_grad_enabled = previous_; }

bool finite_checks_enabled() { return t_finite_checks; }
FiniteChecks::FiniteChecks(bool enabled) : previous_(t_finite_checks) { t_finite_checks = enabled; }
FiniteChecks::~FiniteChecks() { t_finite_checks = previous_; }

int max_derivative_order() { return g_max_order; }
void set_max_derivative_order(int order) {
  if (order < 1) throw ContractError("derivative order must be >= 1");
  g_max_order = order;
}
bool double_backward_available() { return g_max_order >= 2; }

template <class T>
Var<T> Var<T>::constant(Tensor<T> value) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->op = "constant";
  return Var(std::move(n));
}

template <class T>
Var<T> Var<T>::leaf(Tensor<T> value, bool requires_grad) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  n->op = "leaf";
  return Var(std::move(n));
}

template <class T>
Tensor<T>& Var<T>::mutable_value() {
  if (!node_->inputs.empty()) throw ContractError("mutable_value: not a leaf");
  return node_->value;
}

template <class T>
T Var<T>::item() const {
  if (size() != 1)
    throw ContractError("item: expected one element, got shape " + to_string(shape()));
  return node_->value[0];
}

template <class T>
Var<T> record(const char* op, Tensor<T> value, std::vector<Var<T>> inputs, BackwardFn<T> backward) {
  if (t_finite_checks && !value.all_finite())
    throw NonFiniteError(std::string("non-finite output from primitive '") + op + "'");
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->op = op;
  bool needs = false;
  if (t_grad_enabled)
    for (const auto& in : inputs) needs = needs || in.requires_grad();
  if (needs) {
    n->requires_grad = true;
    n->inputs = std::move(inputs);
    n->backward = std::move(backward);
  }
  return Var<T>(std::move(n));
}

template <class T>
std::vector<Var<T>> grad(const Var<T>& output, const std::vector<Var<T>>& wrt, bool create_graph) {
  if (output.size() != 1)
    throw ContractError("grad: output must be a scalar, got shape " + to_string(output.shape()));
  if (create_graph && !double_backward_available())
    throw ContractError("grad: create_graph requested but the engine is limited to first order");

  // Iterative post-order DFS over nodes that require gradients.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  if (output.requires_grad()) {
    std::vector<std::pair<Node<T>*, size_t>> stack{{output.node_ptr(), 0}};
    visited.insert(output.node_ptr());
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->inputs.size()) {
        Node<T>* child = node->inputs[next++].node_ptr();
        if (child && child->requires_grad && visited.insert(child).second)
          stack.push_back({child, 0});
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
  }

  std::unordered_map<Node<T>*, Var<T>> grads;
  if (output.requires_grad())
    grads[output.node_ptr()] = Var<T>::constant(Tensor<T>(output.shape(), T(1)));

  GradMode mode(create_graph);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (!node->backward) continue;
    auto found = grads.find(node);
    if (found == grads.end()) continue;
    const Var<T> g = found->second;
    auto input_grads = node->backward(*node, g);
    for (size_t i = 0; i < node->inputs.size(); ++i) {
      const Var<T>& in = node->inputs[i];
      if (!in.requires_grad() || i >= input_grads.size() || !input_grads[i].defined()) continue;
      if (input_grads[i].shape() != in.shape())
        throw ContractError(std::string("grad: backward of '") + node->op +
                            "' produced shape " + to_string(input_grads[i].shape()) +
                            " for input of shape " + to_string(in.shape()));
      auto slot = grads.find(in.node_ptr());
      if (slot == grads.end())
        grads.emplace(in.node_ptr(), input_grads[i]);
      else
        slot->second = add(slot->second, input_grads[i]);
    }
  }

  std::vector<Var<T>> result;
  result.reserve(wrt.size());
  for (const auto& w : wrt) {
    auto found = grads.find(w.node_ptr());
    if (found != grads.end())
      result.push_back(found->second);
    else
      result.push_back(Var<T>::constant(Tensor<T>(w.shape(), T(0))));
  }
  return result;
}

template class Var<float>;
template class Var<double>;
template Var<float> record<float>(const char*, Tensor<float>, std::vector<Var<float>>,
                                  BackwardFn<float>);
template Var<double> record<double>(const char*, Tensor<double>, std::vector<Var<double>>,
                                    BackwardFn<double>);
template std::vector<Var<float>> grad<float>(const Var<float>&, const std::vector<Var<float>>&,
                                             bool);
template std::vector<Var<double>> grad<double>(const Var<double>&,
                                               const std::vector<Var<double>>&, bool);

}  // namespace xrs::ad
