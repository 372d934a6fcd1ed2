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


#include "xraysynth/autodiff/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace xrs::ad {

int64_t numel(const Shape& shape) {
  int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <class T>
Tensor<T>::Tensor(Shape shape, T fill) : shape_(std::move(shape)) {
  for (auto d : shape_)
    if (d <= 0) throw ContractError("Tensor: non-positive extent in shape " + to_string(shape_));
  data_.assign(static_cast<size_t>(numel(shape_)), fill);
}

template <class T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  for (auto d : shape_)
    if (d <= 0) throw ContractError("Tensor: non-positive extent in shape " + to_string(shape_));
  if (numel(shape_) != static_cast<int64_t>(data_.size()))
    throw ContractError("Tensor: shape " + to_string(shape_) + " does not match " +
                        std::to_string(data_.size()) + " values");
}

template <class T>
int64_t Tensor<T>::dim(int axis) const {
  if (axis < 0) axis += rank();
  if (axis < 0 || axis >= rank())
    throw ContractError("Tensor::dim: axis out of range for shape " + to_string(shape_));
  return shape_[static_cast<size_t>(axis)];
}

template <class T>
Tensor<T> Tensor<T>::reshaped(Shape shape) const {
  if (numel(shape) != size())
    throw ContractError("reshape: cannot view " + to_string(shape_) + " as " + to_string(shape));
  return Tensor(std::move(shape), data_);
}

template <class T>
bool Tensor<T>::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

template <class T>
void Tensor<T>::fill(T v) {
  std::fill(data_.begin(), data_.end(), v);
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace xrs::ad
