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


#include "xraysynth/autodiff/param_store.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

namespace xrs::ad {

namespace fs = std::filesystem;

uint64_t fnv1a64(const void* data, size_t bytes, uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

InitSpec InitSpec::he(int64_t fan_in, double slope) {
  const double gain = std::sqrt(2.0 / (1.0 + slope * slope));
  return normal(gain / std::sqrt(static_cast<double>(std::max<int64_t>(fan_in, 1))));
}

template <class T>
Var<T> ParamStore<T>::create(const std::string& name, Shape shape, InitSpec init, bool trainable) {
  if (entries_.count(name)) throw ContractError("ParamStore: duplicate parameter name '" + name + "'");
  Tensor<T> value(std::move(shape));
  switch (init.kind) {
    case InitSpec::Kind::kZeros:
      break;
    case InitSpec::Kind::kConstant:
      value.fill(static_cast<T>(init.value));
      break;
    case InitSpec::Kind::kNormal: {
      std::mt19937_64 rng(splitmix64(seed_ ^ fnv1a64(name.data(), name.size())));
      std::normal_distribution<double> dist(0.0, init.value);
      for (auto& v : value.values()) v = static_cast<T>(dist(rng));
      break;
    }
  }
  auto var = Var<T>::leaf(std::move(value), trainable);
  names_.push_back(name);
  entries_.emplace(name, Entry{var, trainable});
  return var;
}

template <class T>
const typename ParamStore<T>::Entry& ParamStore<T>::entry(std::string_view name) const {
  auto it = entries_.find(std::string(name));
  if (it == entries_.end())
    throw ContractError("ParamStore: no parameter named '" + std::string(name) + "'");
  return it->second;
}

template <class T>
bool ParamStore<T>::contains(std::string_view name) const {
  return entries_.count(std::string(name)) != 0;
}

template <class T>
const Var<T>& ParamStore<T>::get(std::string_view name) const {
  return entry(name).var;
}

template <class T>
bool ParamStore<T>::trainable(std::string_view name) const {
  return entry(name).trainable;
}

template <class T>
std::vector<Var<T>> ParamStore<T>::parameters(std::string_view prefix) const {
  std::vector<Var<T>> out;
  for (const auto& n : names_) {
    const auto& e = entries_.at(n);
    if (e.trainable && n.starts_with(prefix)) out.push_back(e.var);
  }
  return out;
}

template <class T>
std::vector<std::string> ParamStore<T>::parameter_names(std::string_view prefix) const {
  std::vector<std::string> out;
  for (const auto& n : names_)
    if (entries_.at(n).trainable && n.starts_with(prefix)) out.push_back(n);
  return out;
}

template <class T>
void ParamStore<T>::set_value(std::string_view name, const Tensor<T>& value) {
  auto var = entry(name).var;
  if (var.shape() != value.shape())
    throw ContractError("ParamStore::set_value: shape mismatch for '" + std::string(name) + "': " +
                        to_string(var.shape()) + " vs " + to_string(value.shape()));
  var.mutable_value() = value;
}

template <class T>
uint64_t ParamStore<T>::fingerprint(std::string_view prefix) const {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& n : names_) {
    if (!n.starts_with(prefix)) continue;
    const auto& t = entries_.at(n).var.value();
    h = fnv1a64(n.data(), n.size(), h);
    h = fnv1a64(t.data(), static_cast<size_t>(t.size()) * sizeof(T), h);
  }
  return h;
}

namespace {

void write_le_f32(std::ofstream& os, const float* data, size_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * 4));
  } else {
    for (size_t i = 0; i < count; ++i) {
      uint32_t u = std::bit_cast<uint32_t>(data[i]);
      u = __builtin_bswap32(u);
      os.write(reinterpret_cast<const char*>(&u), 4);
    }
  }
}

void read_le_f32(std::ifstream& is, float* data, size_t count) {
  is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * 4));
  if constexpr (std::endian::native != std::endian::little) {
    for (size_t i = 0; i < count; ++i)
      data[i] = std::bit_cast<float>(__builtin_bswap32(std::bit_cast<uint32_t>(data[i])));
  }
}

}  // namespace

template <class T>
void ParamStore<T>::save(const fs::path& dir) const {
  fs::create_directories(dir);
  nlohmann::json manifest;
  manifest["format"] = "xraysynth-params";
  manifest["version"] = 1;
  manifest["dtype"] = "f32";
  manifest["creation_seed"] = seed_;
  nlohmann::json entries = nlohmann::json::array();
  uint64_t offset = 0;
  for (const auto& n : names_) {
    const auto& e = entries_.at(n);
    const auto& t = e.var.value();
    entries.push_back({{"name", n},
                       {"shape", t.shape()},
                       {"offset", offset},
                       {"count", t.size()},
                       {"trainable", e.trainable}});
    offset += static_cast<uint64_t>(t.size()) * 4;
  }
  manifest["entries"] = std::move(entries);
  manifest["total_bytes"] = offset;
  manifest["meta"] = meta_;

  {
    std::ofstream os(dir / "manifest.json", std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("ParamStore::save: cannot write " + (dir / "manifest.json").string());
    os << manifest.dump(2) << '\n';
  }
  std::ofstream os(dir / "params.f32", std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("ParamStore::save: cannot write " + (dir / "params.f32").string());
  std::vector<float> buf;
  for (const auto& n : names_) {
    const auto& t = entries_.at(n).var.value();
    buf.assign(t.data(), t.data() + t.size());
    write_le_f32(os, buf.data(), buf.size());
  }
  if (!os) throw FormatError("ParamStore::save: write failed in " + dir.string());
}

template <class T>
ParamStore<T> ParamStore<T>::load(const fs::path& dir) {
  std::ifstream ms(dir / "manifest.json");
  if (!ms) throw FormatError("ParamStore::load: missing " + (dir / "manifest.json").string());
  nlohmann::json manifest;
  try {
    ms >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("ParamStore::load: bad manifest: ") + e.what());
  }
  if (manifest.value("dtype", "") != "f32")
    throw FormatError("ParamStore::load: unsupported dtype in " + dir.string());
  ParamStore store(manifest.at("creation_seed").get<uint64_t>());
  store.meta_ = manifest.value("meta", nlohmann::json::object());

  std::ifstream ps(dir / "params.f32", std::ios::binary);
  if (!ps) throw FormatError("ParamStore::load: missing " + (dir / "params.f32").string());
  ps.seekg(0, std::ios::end);
  const auto file_bytes = static_cast<uint64_t>(ps.tellg());
  ps.seekg(0);
  const auto total = manifest.at("total_bytes").get<uint64_t>();
  if (file_bytes != total)
    throw FormatError("ParamStore::load: params.f32 has " + std::to_string(file_bytes) +
                      " bytes, manifest says " + std::to_string(total));

  std::vector<float> buf;
  uint64_t expected_offset = 0;
  for (const auto& e : manifest.at("entries")) {
    const auto name = e.at("name").get<std::string>();
    const auto shape = e.at("shape").get<Shape>();
    const auto offset = e.at("offset").get<uint64_t>();
    if (offset != expected_offset)
      throw FormatError("ParamStore::load: non-contiguous offset for '" + name + "'");
    const auto count = static_cast<size_t>(numel(shape));
    buf.resize(count);
    read_le_f32(ps, buf.data(), count);
    if (!ps) throw FormatError("ParamStore::load: truncated data for '" + name + "'");
    std::vector<T> vals(buf.begin(), buf.end());
    const bool trainable = e.value("trainable", true);
    if (store.entries_.count(name)) throw FormatError("ParamStore::load: duplicate name '" + name + "'");
    store.names_.push_back(name);
    store.entries_.emplace(name, Entry{Var<T>::leaf(Tensor<T>(shape, std::move(vals)), trainable),
                                       trainable});
    expected_offset += count * 4;
  }
  return store;
}

template <class T>
template <class U>
void ParamStore<T>::assign_values_from(const ParamStore<U>& other) {
  for (const auto& n : other.names()) {
    if (!contains(n)) throw ContractError("ParamStore::assign_values_from: unknown entry '" + n + "'");
    set_value(n, other.get(n).value().template cast<T>());
  }
}

template class ParamStore<float>;
template class ParamStore<double>;
template void ParamStore<float>::assign_values_from<float>(const ParamStore<float>&);
template void ParamStore<float>::assign_values_from<double>(const ParamStore<double>&);
template void ParamStore<double>::assign_values_from<float>(const ParamStore<float>&);
template void ParamStore<double>::assign_values_from<double>(const ParamStore<double>&);

}  // namespace xrs::ad
