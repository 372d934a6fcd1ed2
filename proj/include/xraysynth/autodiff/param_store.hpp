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

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "xraysynth/autodiff/var.hpp"

namespace xrs::ad {

using xrs::FormatError;

struct InitSpec {
  enum class Kind { kZeros, kConstant, kNormal };
  Kind kind = Kind::kZeros;
  double value = 0.0;  // constant value, or standard deviation for kNormal

  static InitSpec zeros() { return {Kind::kZeros, 0.0}; }
  static InitSpec constant(double v) { return {Kind::kConstant, v}; }
  static InitSpec normal(double stddev) { return {Kind::kNormal, stddev}; }
  /// He/Kaiming normal for leaky-rectifier layers.
  static InitSpec he(int64_t fan_in, double slope = 0.2);
};

/// Named, shaped parameter collection with checkpoint serialization.
///
/// Entries keep insertion order, which is also the on-disk order. Each
/// entry's initial values depend only on the store's creation seed and the
/// entry name, so adding a parameter never perturbs the others.
///
/// On disk a store is a directory with `manifest.json` (names, shapes, dtype,
/// byte offsets, creation seed, free-form metadata) and `params.f32`
/// (little-endian float32, concatenated in manifest order).
template <class T>
class ParamStore {
 public:
  explicit ParamStore(uint64_t seed = 0) : seed_(seed) {}

  /// Throws ContractError if `name` already exists.
  Var<T> create(const std::string& name, Shape shape, InitSpec init, bool trainable = true);

  bool contains(std::string_view name) const;
  const Var<T>& get(std::string_view name) const;
  bool trainable(std::string_view name) const;
  const std::vector<std::string>& names() const { return names_; }
  size_t size() const { return names_.size(); }
  uint64_t seed() const { return seed_; }

  /// Trainable entries whose names start with `prefix`, in insertion order.
  std::vector<Var<T>> parameters(std::string_view prefix = "") const;
  std::vector<std::string> parameter_names(std::string_view prefix = "") const;

  void set_value(std::string_view name, const Tensor<T>& value);

  /// 64-bit FNV-1a digest over names and raw values of entries under `prefix`.
  uint64_t fingerprint(std::string_view prefix = "") const;

  nlohmann::json& meta() { return meta_; }
  const nlohmann::json& meta() const { return meta_; }

  void save(const std::filesystem::path& dir) const;
  static ParamStore load(const std::filesystem::path& dir);

  /// Copies values of every entry of `other` into the same-named entry here.
  /// Names and shapes must match exactly.
  template <class U>
  void assign_values_from(const ParamStore<U>& other);

 private:
  struct Entry {
    Var<T> var;
    bool trainable = true;
  };
  const Entry& entry(std::string_view name) const;

  uint64_t seed_ = 0;
  std::vector<std::string> names_;
  std::unordered_map<std::string, Entry> entries_;
  nlohmann::json meta_ = nlohmann::json::object();
};

uint64_t fnv1a64(const void* data, size_t bytes, uint64_t h = 0xcbf29ce484222325ULL);
uint64_t splitmix64(uint64_t x);

extern template class ParamStore<float>;
extern template class ParamStore<double>;

}  // namespace xrs::ad
