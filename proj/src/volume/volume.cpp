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


#include "xraysynth/volume/volume.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>

#include "json.hpp"

namespace xrs::vol {

namespace fs = std::filesystem;
using nlohmann::json;

Volume::Volume(std::array<int64_t, 3> s, std::array<double, 3> spacing, float fill)
    : shape(s), spacing_mm(spacing) {
  for (auto d : s)
    if (d <= 0) throw ContractError("Volume: non-positive extent");
  for (auto sp : spacing)
    if (!(sp > 0.0)) throw ContractError("Volume: spacing must be > 0");
  voxels.assign(static_cast<size_t>(size()), fill);
}

float Volume::max_value() const {
  return voxels.empty() ? 0.0f : *std::max_element(voxels.begin(), voxels.end());
}

double Volume::total() const {
  double t = 0.0;
  for (float v : voxels) t += v;
  return t;
}

ImagePlane::ImagePlane(int64_t h, int64_t w, float fill) : height(h), width(w) {
  if (h <= 0 || w <= 0) throw ContractError("ImagePlane: non-positive extent");
  pixels.assign(static_cast<size_t>(h * w), fill);
}

fs::path strip_raw_extension(const fs::path& p) {
  auto ext = p.extension();
  if (ext == ".f32" || ext == ".json") return fs::path(p).replace_extension();
  return p;
}

namespace {

fs::path with_ext(const fs::path& base, const char* ext) {
  return fs::path(base.string() + ext);
}

void write_raw(const fs::path& path, const std::vector<float>& data) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(data.data()),
             static_cast<std::streamsize>(data.size() * sizeof(float)));
  } else {
    for (float f : data) {
      uint32_t u = __builtin_bswap32(std::bit_cast<uint32_t>(f));
      os.write(reinterpret_cast<const char*>(&u), 4);
    }
  }
  if (!os) throw FormatError("write failed: " + path.string());
}

std::vector<float> read_raw(const fs::path& path, int64_t expected_count) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  is.seekg(0, std::ios::end);
  const auto bytes = static_cast<int64_t>(is.tellg());
  is.seekg(0);
  if (bytes != expected_count * 4)
    throw FormatError(path.string() + ": sidecar shape implies " + std::to_string(expected_count * 4) +
                      " bytes but file has " + std::to_string(bytes));
  std::vector<float> data(static_cast<size_t>(expected_count));
  is.read(reinterpret_cast<char*>(data.data()), bytes);
  if constexpr (std::endian::native != std::endian::little) {
    for (auto& f : data) f = std::bit_cast<float>(__builtin_bswap32(std::bit_cast<uint32_t>(f)));
  }
  return data;
}

void write_sidecar(const fs::path& path, const std::vector<int64_t>& shape,
                   const std::vector<double>& spacing) {
  json j;
  j["shape"] = shape;
  j["spacing_mm"] = spacing;
  j["dtype"] = "f32";
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  os << j.dump() << '\n';
}

json read_sidecar(const fs::path& path, size_t rank) {
  std::ifstream is(path);
  if (!is) throw FormatError("missing sidecar " + path.string());
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  if (!j.contains("shape") || !j["shape"].is_array() || j["shape"].size() != rank)
    throw FormatError(path.string() + ": expected a rank-" + std::to_string(rank) + " shape");
  if (j.value("dtype", "f32") != "f32") throw FormatError(path.string() + ": dtype must be f32");
  for (const auto& d : j["shape"])
    if (!d.is_number_integer() || d.get<int64_t>() <= 0)
      throw FormatError(path.string() + ": invalid extent");
  return j;
}

}  // namespace

void save_volume(const Volume& v, const fs::path& base_in) {
  const auto base = strip_raw_extension(base_in);
  if (v.voxels.size() != static_cast<size_t>(v.size()))
    throw ContractError("save_volume: voxel count does not match shape");
  write_raw(with_ext(base, ".f32"), v.voxels);
  write_sidecar(with_ext(base, ".json"), {v.shape[0], v.shape[1], v.shape[2]},
                {v.spacing_mm[0], v.spacing_mm[1], v.spacing_mm[2]});
}

Volume load_volume(const fs::path& base_in) {
  const auto base = strip_raw_extension(base_in);
  const json j = read_sidecar(with_ext(base, ".json"), 3);
  Volume v;
  for (int i = 0; i < 3; ++i) v.shape[static_cast<size_t>(i)] = j["shape"][static_cast<size_t>(i)].get<int64_t>();
  if (j.contains("spacing_mm")) {
    if (!j["spacing_mm"].is_array() || j["spacing_mm"].size() != 3)
      throw FormatError(base.string() + ".json: spacing_mm must have 3 entries");
    for (int i = 0; i < 3; ++i) v.spacing_mm[static_cast<size_t>(i)] = j["spacing_mm"][static_cast<size_t>(i)].get<double>();
  }
  for (auto s : v.spacing_mm)
    if (!(s > 0.0)) throw FormatError(base.string() + ".json: spacing must be > 0");
  v.voxels = read_raw(with_ext(base, ".f32"), v.size());
  return v;
}

void save_image(const ImagePlane& img, const fs::path& base_in) {
  const auto base = strip_raw_extension(base_in);
  if (img.pixels.size() != static_cast<size_t>(img.size()))
    throw ContractError("save_image: pixel count does not match shape");
  write_raw(with_ext(base, ".f32"), img.pixels);
  write_sidecar(with_ext(base, ".json"), {img.height, img.width},
                {img.spacing_mm[0], img.spacing_mm[1]});
}

ImagePlane load_image(const fs::path& base_in) {
  const auto base = strip_raw_extension(base_in);
  const json j = read_sidecar(with_ext(base, ".json"), 2);
  ImagePlane img;
  img.height = j["shape"][0].get<int64_t>();
  img.width = j["shape"][1].get<int64_t>();
  if (j.contains("spacing_mm") && j["spacing_mm"].is_array() && j["spacing_mm"].size() == 2) {
    img.spacing_mm = {j["spacing_mm"][0].get<double>(), j["spacing_mm"][1].get<double>()};
  }
  img.pixels = read_raw(with_ext(base, ".f32"), img.size());
  return img;
}

void write_pgm16(const ImagePlane& img, const fs::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  os << "P5\n" << img.width << ' ' << img.height << "\n65535\n";
  std::vector<unsigned char> buf(static_cast<size_t>(img.size()) * 2);
  for (int64_t i = 0; i < img.size(); ++i) {
    const double v = std::clamp(static_cast<double>(img.pixels[static_cast<size_t>(i)]), 0.0, 1.0);
    const auto q = static_cast<uint16_t>(std::lround(v * 65535.0));
    buf[static_cast<size_t>(2 * i)] = static_cast<unsigned char>(q >> 8);  // PGM is big-endian
    buf[static_cast<size_t>(2 * i + 1)] = static_cast<unsigned char>(q & 0xff);
  }
  os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!os) throw FormatError("write failed: " + path.string());
}

ImagePlane tile_horizontal(const std::vector<ImagePlane>& images, int64_t gap) {
  if (images.empty()) throw ContractError("tile_horizontal: no images");
  const int64_t h = images[0].height, w = images[0].width;
  for (const auto& im : images)
    if (im.height != h || im.width != w) throw ContractError("tile_horizontal: size mismatch");
  const auto n = static_cast<int64_t>(images.size());
  ImagePlane out(h, n * w + (n - 1) * gap);
  for (int64_t k = 0; k < n; ++k)
    for (int64_t r = 0; r < h; ++r)
      for (int64_t c = 0; c < w; ++c) out.at(r, k * (w + gap) + c) = images[static_cast<size_t>(k)].at(r, c);
  return out;
}

ImagePlane tile_vertical(const std::vector<ImagePlane>& rows, int64_t gap) {
  if (rows.empty()) throw ContractError("tile_vertical: no rows");
  const int64_t w = rows[0].width;
  int64_t h = 0;
  for (const auto& r : rows) {
    if (r.width != w) throw ContractError("tile_vertical: width mismatch");
    h += r.height;
  }
  h += (static_cast<int64_t>(rows.size()) - 1) * gap;
  ImagePlane out(h, w);
  int64_t y0 = 0;
  for (const auto& r : rows) {
    std::copy(r.pixels.begin(), r.pixels.end(), out.pixels.begin() + y0 * w);
    y0 += r.height + gap;
  }
  return out;
}

Volume from_hounsfield(const Volume& hu, double mu_water) {
  Volume out = hu;
  for (auto& v : out.voxels)
    v = static_cast<float>(std::max(0.0, mu_water * (1.0 + static_cast<double>(v) / 1000.0)));
  return out;
}

}  // namespace xrs::vol
