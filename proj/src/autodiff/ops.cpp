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


#include "xraysynth/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "xraysynth/simd/kernels.hpp"

namespace xrs::ad {

namespace {

template <class T>
using V = Var<T>;

[[noreturn]] void fail(const std::string& op, const std::string& what) {
  throw ContractError(op + ": " + what);
}

template <class T>
void require_same_shape(const char* op, const V<T>& a, const V<T>& b) {
  if (a.shape() != b.shape())
    fail(op, "shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
}

int normalize_axis(const char* op, int axis, int rank) {
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank)
    fail(op, "axis " + std::to_string(axis) + " out of range for rank " + std::to_string(rank));
  return axis;
}

struct Split {
  int64_t outer = 1, mid = 1, inner = 1;
};

Split split_at(const Shape& s, int axis) {
  Split r;
  for (int i = 0; i < axis; ++i) r.outer *= s[static_cast<size_t>(i)];
  r.mid = s[static_cast<size_t>(axis)];
  for (size_t i = static_cast<size_t>(axis) + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

template <class T, class F>
Tensor<T> map_unary(const Tensor<T>& x, F f) {
  Tensor<T> out(x.shape());
  const T* xs = x.data();
  T* o = out.data();
  for (int64_t i = 0, n = x.size(); i < n; ++i) o[i] = f(xs[i]);
  return out;
}

template <class T, class F>
Tensor<T> map_binary(const Tensor<T>& a, const Tensor<T>& b, F f) {
  Tensor<T> out(a.shape());
  const T* as = a.data();
  const T* bs = b.data();
  T* o = out.data();
  for (int64_t i = 0, n = a.size(); i < n; ++i) o[i] = f(as[i], bs[i]);
  return out;
}

// Gradient factor f'(x): recomputed through recorded primitives when building
// a differentiable backward, otherwise taken from cached values.
template <class T, class Recompute, class Raw>
V<T> derivative_factor(Recompute recompute, Raw raw) {
  if (grad_enabled()) return recompute();
  return V<T>::constant(raw());
}

// 1/v with 1/0 := 0; used by sqrt's backward.
template <class T>
V<T> safe_reciprocal(const V<T>& x) {
  auto out = map_unary(x.value(), [](T v) { return v == T(0) ? T(0) : T(1) / v; });
  return record<T>("safe_reciprocal", std::move(out), {x}, [](const Node<T>& self, const V<T>& g) {
    const V<T>& xin = self.inputs[0];
    auto r = derivative_factor<T>([&] { return safe_reciprocal(xin); },
                                  [&] { return self.value; });
    return std::vector<V<T>>{neg(mul(g, square(r)))};
  });
}

template <class T>
Tensor<T> upsample_raw(const Tensor<T>& x, int fh, int fw) {
  const Shape& s = x.shape();
  const int r = x.rank();
  const int64_t h = s[static_cast<size_t>(r - 2)], w = s[static_cast<size_t>(r - 1)];
  const int64_t planes = x.size() / (h * w);
  Shape os = s;
  os[static_cast<size_t>(r - 2)] = h * fh;
  os[static_cast<size_t>(r - 1)] = w * fw;
  Tensor<T> out(os);
  const int64_t oh = h * fh, ow = w * fw;
  for (int64_t p = 0; p < planes; ++p) {
    const T* xp = x.data() + p * h * w;
    T* op = out.data() + p * oh * ow;
    for (int64_t i = 0; i < oh; ++i)
      for (int64_t j = 0; j < ow; ++j) op[i * ow + j] = xp[(i / fh) * w + (j / fw)];
  }
  return out;
}

template <class T>
V<T> upsample_hw(const V<T>& x, int fh, int fw);

template <class T>
V<T> sum_pool_hw(const V<T>& x, int fh, int fw) {
  const char* op = "sum_pool2d";
  if (x.value().rank() < 2) fail(op, "needs rank >= 2, got " + to_string(x.shape()));
  if (fh < 1 || fw < 1) fail(op, "pool factors must be >= 1");
  const Shape& s = x.shape();
  const int r = x.value().rank();
  const int64_t h = s[static_cast<size_t>(r - 2)], w = s[static_cast<size_t>(r - 1)];
  if (h % fh != 0 || w % fw != 0)
    fail(op, "factors " + std::to_string(fh) + "x" + std::to_string(fw) +
                 " do not divide spatial extent of " + to_string(s));
  const int64_t oh = h / fh, ow = w / fw;
  const int64_t planes = x.size() / (h * w);
  Shape os = s;
  os[static_cast<size_t>(r - 2)] = oh;
  os[static_cast<size_t>(r - 1)] = ow;
  Tensor<T> out(os);
  for (int64_t p = 0; p < planes; ++p) {
    const T* xp = x.value().data() + p * h * w;
    T* o = out.data() + p * oh * ow;
    for (int64_t i = 0; i < h; ++i)
      for (int64_t j = 0; j < w; ++j) o[(i / fh) * ow + (j / fw)] += xp[i * w + j];
  }
  return record<T>(op, std::move(out), {x}, [fh, fw](const Node<T>&, const V<T>& g) {
    return std::vector<V<T>>{upsample_hw(g, fh, fw)};
  });
}

template <class T>
V<T> upsample_hw(const V<T>& x, int fh, int fw) {
  const char* op = "upsample_nearest2d";
  if (x.value().rank() < 2) fail(op, "needs rank >= 2, got " + to_string(x.shape()));
  if (fh < 1 || fw < 1) fail(op, "factors must be >= 1");
  return record<T>(op, upsample_raw(x.value(), fh, fw), {x},
                   [fh, fw](const Node<T>&, const V<T>& g) {
                     return std::vector<V<T>>{sum_pool_hw(g, fh, fw)};
                   });
}

// ---- convolution internals -------------------------------------------------

struct ConvDims {
  int64_t n, ci, d, h, w;      // input
  int64_t co, kd, kh, kw;      // kernel
  int64_t od, oh, ow;          // output
  int64_t ck() const { return ci * kd * kh * kw; }
  int64_t in_plane() const { return d * h * w; }
  int64_t out_plane() const { return od * oh * ow; }
};

ConvDims conv_dims(const char* op, const Shape& xs, const Shape& ws, const ConvGeometry& g) {
  if (xs.size() != 5 || ws.size() != 5)
    fail(op, "expected 5-d input and weight, got " + to_string(xs) + " and " + to_string(ws));
  if (xs[1] != ws[1])
    fail(op, "input channels " + std::to_string(xs[1]) + " vs weight " + to_string(ws));
  for (int i = 0; i < 3; ++i)
    if (g.stride[static_cast<size_t>(i)] < 1 || g.pad[static_cast<size_t>(i)] < 0)
      fail(op, "invalid stride/pad");
  ConvDims c{xs[0], xs[1], xs[2], xs[3], xs[4], ws[0], ws[2], ws[3], ws[4], 0, 0, 0};
  auto out_extent = [&](int64_t in, int64_t k, int axis) {
    const int64_t padded = in + 2 * g.pad[static_cast<size_t>(axis)] - k;
    if (padded < 0)
      fail(op, "kernel " + to_string(ws) + " larger than padded input " + to_string(xs));
    return padded / g.stride[static_cast<size_t>(axis)] + 1;
  };
  c.od = out_extent(c.d, c.kd, 0);
  c.oh = out_extent(c.h, c.kh, 1);
  c.ow = out_extent(c.w, c.kw, 2);
  return c;
}

// cols: [ci*kd*kh*kw, od*oh*ow] for one sample.
template <class T>
void vol2col(const T* x, const ConvDims& c, const ConvGeometry& g, T* cols) {
  const int64_t plane = c.out_plane();
  int64_t row = 0;
  for (int64_t ci = 0; ci < c.ci; ++ci)
    for (int64_t a = 0; a < c.kd; ++a)
      for (int64_t b = 0; b < c.kh; ++b)
        for (int64_t e = 0; e < c.kw; ++e, ++row) {
          T* dst = cols + row * plane;
          const T* src = x + ci * c.in_plane();
          for (int64_t od = 0; od < c.od; ++od) {
            const int64_t id = od * g.stride[0] - g.pad[0] + a;
            const bool din = id >= 0 && id < c.d;
            for (int64_t oh = 0; oh < c.oh; ++oh) {
              const int64_t ih = oh * g.stride[1] - g.pad[1] + b;
              const bool hin = din && ih >= 0 && ih < c.h;
              T* drow = dst + (od * c.oh + oh) * c.ow;
              if (!hin) {
                std::fill(drow, drow + c.ow, T(0));
                continue;
              }
              const T* srow = src + (id * c.h + ih) * c.w;
              for (int64_t ow = 0; ow < c.ow; ++ow) {
                const int64_t iw = ow * g.stride[2] - g.pad[2] + e;
                drow[ow] = (iw >= 0 && iw < c.w) ? srow[iw] : T(0);
              }
            }
          }
        }
}

template <class T>
void col2vol(const T* cols, const ConvDims& c, const ConvGeometry& g, T* x) {
  const int64_t plane = c.out_plane();
  int64_t row = 0;
  for (int64_t ci = 0; ci < c.ci; ++ci)
    for (int64_t a = 0; a < c.kd; ++a)
      for (int64_t b = 0; b < c.kh; ++b)
        for (int64_t e = 0; e < c.kw; ++e, ++row) {
          const T* src = cols + row * plane;
          T* dst = x + ci * c.in_plane();
          for (int64_t od = 0; od < c.od; ++od) {
            const int64_t id = od * g.stride[0] - g.pad[0] + a;
            if (id < 0 || id >= c.d) continue;
            for (int64_t oh = 0; oh < c.oh; ++oh) {
              const int64_t ih = oh * g.stride[1] - g.pad[1] + b;
              if (ih < 0 || ih >= c.h) continue;
              const T* srow = src + (od * c.oh + oh) * c.ow;
              T* drow = dst + (id * c.h + ih) * c.w;
              for (int64_t ow = 0; ow < c.ow; ++ow) {
                const int64_t iw = ow * g.stride[2] - g.pad[2] + e;
                if (iw >= 0 && iw < c.w) drow[iw] += srow[ow];
              }
            }
          }
        }
}

template <class T>
Tensor<T> conv_forward_raw(const Tensor<T>& x, const Tensor<T>& w, const ConvDims& c,
                           const ConvGeometry& g) {
  Tensor<T> y(Shape{c.n, c.co, c.od, c.oh, c.ow});
  std::vector<T> cols(static_cast<size_t>(c.ck() * c.out_plane()));
  for (int64_t n = 0; n < c.n; ++n) {
    vol2col(x.data() + n * c.ci * c.in_plane(), c, g, cols.data());
    simd::gemm<T>(false, false, c.co, c.out_plane(), c.ck(), w.data(), c.ck(), cols.data(),
                  c.out_plane(), T(0), y.data() + n * c.co * c.out_plane(), c.out_plane());
  }
  return y;
}

template <class T>
Tensor<T> conv_input_grad_raw(const Tensor<T>& gy, const Tensor<T>& w, const ConvDims& c,
                              const ConvGeometry& g) {
  Tensor<T> gx(Shape{c.n, c.ci, c.d, c.h, c.w});
  std::vector<T> cols(static_cast<size_t>(c.ck() * c.out_plane()));
  for (int64_t n = 0; n < c.n; ++n) {
    simd::gemm<T>(true, false, c.ck(), c.out_plane(), c.co, w.data(), c.ck(),
                  gy.data() + n * c.co * c.out_plane(), c.out_plane(), T(0), cols.data(),
                  c.out_plane());
    col2vol(cols.data(), c, g, gx.data() + n * c.ci * c.in_plane());
  }
  return gx;
}

template <class T>
Tensor<T> conv_weight_grad_raw(const Tensor<T>& x, const Tensor<T>& gy, const ConvDims& c,
                               const ConvGeometry& g) {
  Tensor<T> gw(Shape{c.co, c.ci, c.kd, c.kh, c.kw});
  std::vector<T> cols(static_cast<size_t>(c.ck() * c.out_plane()));
  for (int64_t n = 0; n < c.n; ++n) {
    vol2col(x.data() + n * c.ci * c.in_plane(), c, g, cols.data());
    simd::gemm<T>(false, true, c.co, c.ck(), c.out_plane(), gy.data() + n * c.co * c.out_plane(),
                  c.out_plane(), cols.data(), c.out_plane(), T(1), gw.data(), c.ck());
  }
  return gw;
}

}  // namespace

// ---- elementwise -----------------------------------------------------------

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape("add", a, b);
  return record<T>("add", map_binary(a.value(), b.value(), [](T x, T y) { return x + y; }), {a, b},
                   [](const Node<T>&, const V<T>& g) { return std::vector<V<T>>{g, g}; });
}

template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_shape("sub", a, b);
  return record<T>("sub", map_binary(a.value(), b.value(), [](T x, T y) { return x - y; }), {a, b},
                   [](const Node<T>&, const V<T>& g) { return std::vector<V<T>>{g, neg(g)}; });
}

template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_same_shape("mul", a, b);
  return record<T>("mul", map_binary(a.value(), b.value(), [](T x, T y) { return x * y; }), {a, b},
                   [](const Node<T>& self, const V<T>& g) {
                     const V<T>& x = self.inputs[0];
                     const V<T>& y = self.inputs[1];
                     return std::vector<V<T>>{x.requires_grad() ? mul(g, y) : V<T>{},
                                              y.requires_grad() ? mul(g, x) : V<T>{}};
                   });
}

template <class T>
Var<T> div(const Var<T>& a, const Var<T>& b) {
  require_same_shape("div", a, b);
  return record<T>("div", map_binary(a.value(), b.value(), [](T x, T y) { return x / y; }), {a, b},
                   [](const Node<T>& self, const V<T>& g) {
                     const V<T>& x = self.inputs[0];
                     const V<T>& y = self.inputs[1];
                     return std::vector<V<T>>{
                         x.requires_grad() ? div(g, y) : V<T>{},
                         y.requires_grad() ? neg(div(mul(g, x), square(y))) : V<T>{}};
                   });
}

template <class T>
Var<T> add_scalar(const Var<T>& x, T c) {
  return record<T>("add_scalar", map_unary(x.value(), [c](T v) { return v + c; }), {x},
                   [](const Node<T>&, const V<T>& g) { return std::vector<V<T>>{g}; });
}

template <class T>
Var<T> mul_scalar(const Var<T>& x, T c) {
  return record<T>("mul_scalar", map_unary(x.value(), [c](T v) { return v * c; }), {x},
                   [c](const Node<T>&, const V<T>& g) {
                     return std::vector<V<T>>{mul_scalar(g, c)};
                   });
}

template <class T>
Var<T> neg(const Var<T>& x) {
  return record<T>("neg", map_unary(x.value(), [](T v) { return -v; }), {x},
                   [](const Node<T>&, const V<T>& g) { return std::vector<V<T>>{neg(g)}; });
}

template <class T>
Var<T> square(const Var<T>& x) {
  return record<T>("square", map_unary(x.value(), [](T v) { return v * v; }), {x},
                   [](const Node<T>& self, const V<T>& g) {
                     return std::vector<V<T>>{mul(g, mul_scalar(self.inputs[0], T(2)))};
                   });
}

template <class T>
Var<T> abs(const Var<T>& x) {
  return record<T>("abs", map_unary(x.value(), [](T v) { return std::abs(v); }), {x},
                   [](const Node<T>& self, const V<T>& g) {
                     auto sign = map_unary(self.inputs[0].value(), [](T v) {
                       return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0));
                     });
                     return std::vector<V<T>>{mul(g, V<T>::constant(std::move(sign)))};
                   });
}

template <class T>
Var<T> sqrt(const Var<T>& x) {
  for (int64_t i = 0; i < x.size(); ++i)
    if (x.value()[i] < T(0)) fail("sqrt", "negative input");
  return record<T>("sqrt", map_unary(x.value(), [](T v) { return std::sqrt(v); }), {x},
                   [](const Node<T>& self, const V<T>& g) {
                     auto half_inv = derivative_factor<T>(
                         [&] { return mul_scalar(safe_reciprocal(sqrt(self.inputs[0])), T(0.5)); },
                         [&] {
                           return map_unary(self.value, [](T y) {
                             return y == T(0) ? T(0) : T(0.5) / y;
                           });
                         });
                     return std::vector<V<T>>{mul(g, half_inv)};
                   });
}

template <class T>
Var<T> exp(const Var<T>& x) {
  return record<T>("exp", map_unary(x.value(), [](T v) { return std::exp(v); }), {x},
                   [](const Node<T>& self, const V<T>& g) {
                     auto d = derivative_factor<T>([&] { return exp(self.inputs[0]); },
                                                   [&] { return self.value; });
                     return std::vector<V<T>>{mul(g, d)};
                   });
}

template <class T>
Var<T> tanh(const Var<T>& x) {
  return record<T>("tanh", map_unary(x.value(), [](T v) { return std::tanh(v); }), {x},
                   [](const Node<T>& self, const V<T>& g) {
                     auto d = derivative_factor<T>(
                         [&] { return add_scalar(neg(square(tanh(self.inputs[0]))), T(1)); },
                         [&] { return map_unary(self.value, [](T y) { return T(1) - y * y; }); });
                     return std::vector<V<T>>{mul(g, d)};
                   });
}

template <class T>
Var<T> sigmoid(const Var<T>& x) {
  return record<T>("sigmoid",
                   map_unary(x.value(), [](T v) { return T(1) / (T(1) + std::exp(-v)); }), {x},
                   [](const Node<T>& self, const V<T>& g) {
                     auto d = derivative_factor<T>(
                         [&] {
                           auto s = sigmoid(self.inputs[0]);
                           return mul(s, add_scalar(neg(s), T(1)));
                         },
                         [&] { return map_unary(self.value, [](T y) { return y * (T(1) - y); }); });
                     return std::vector<V<T>>{mul(g, d)};
                   });
}

template <class T>
Var<T> leaky_relu(const Var<T>& x, T slope) {
  return record<T>("leaky_relu",
                   map_unary(x.value(), [slope](T v) { return v > T(0) ? v : slope * v; }), {x},
                   [slope](const Node<T>& self, const V<T>& g) {
                     auto mask = map_unary(self.inputs[0].value(),
                                           [slope](T v) { return v > T(0) ? T(1) : slope; });
                     return std::vector<V<T>>{mul(g, V<T>::constant(std::move(mask)))};
                   });
}

// ---- reductions ------------------------------------------------------------

template <class T>
Var<T> sum(const Var<T>& x) {
  T acc = T(0);
  for (int64_t i = 0; i < x.size(); ++i) acc += x.value()[i];
  const Shape in_shape = x.shape();
  return record<T>("sum", Tensor<T>::scalar(acc), {x}, [in_shape](const Node<T>&, const V<T>& g) {
    return std::vector<V<T>>{expand_scalar(g, in_shape)};
  });
}

template <class T>
Var<T> mean(const Var<T>& x) {
  return mul_scalar(sum(x), T(1) / static_cast<T>(x.size()));
}

template <class T>
Var<T> expand_scalar(const Var<T>& s, const Shape& shape) {
  if (s.size() != 1) fail("expand_scalar", "expected one element, got " + to_string(s.shape()));
  return record<T>("expand_scalar", Tensor<T>(shape, s.value()[0]), {s},
                   [](const Node<T>&, const V<T>& g) { return std::vector<V<T>>{sum(g)}; });
}

template <class T>
Var<T> reduce_sum(const Var<T>& x, int axis) {
  const int r = x.value().rank();
  axis = normalize_axis("reduce_sum", axis, r);
  if (r == 1) return sum(x);
  const Split s = split_at(x.shape(), axis);
  Shape os = x.shape();
  os.erase(os.begin() + axis);
  Tensor<T> out(os);
  const T* xs = x.value().data();
  T* o = out.data();
  for (int64_t a = 0; a < s.outer; ++a)
    for (int64_t j = 0; j < s.mid; ++j) {
      const T* src = xs + (a * s.mid + j) * s.inner;
      T* dst = o + a * s.inner;
      for (int64_t i = 0; i < s.inner; ++i) dst[i] += src[i];
    }
  const int64_t n = s.mid;
  return record<T>("reduce_sum", std::move(out), {x}, [axis, n](const Node<T>&, const V<T>& g) {
    return std::vector<V<T>>{broadcast_axis(g, axis, n)};
  });
}

template <class T>
Var<T> reduce_mean(const Var<T>& x, int axis) {
  const int r = x.value().rank();
  const int a = normalize_axis("reduce_mean", axis, r);
  return mul_scalar(reduce_sum(x, a), T(1) / static_cast<T>(x.shape()[static_cast<size_t>(a)]));
}

template <class T>
Var<T> broadcast_axis(const Var<T>& x, int axis, int64_t n) {
  const int r = x.value().rank();
  if (axis < 0) axis += r + 1;
  if (axis < 0 || axis > r) fail("broadcast_axis", "axis out of range for " + to_string(x.shape()));
  if (n < 1) fail("broadcast_axis", "extent must be >= 1");
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= x.shape()[static_cast<size_t>(i)];
  for (int i = axis; i < r; ++i) inner *= x.shape()[static_cast<size_t>(i)];
  Shape os = x.shape();
  os.insert(os.begin() + axis, n);
  Tensor<T> out(os);
  const T* xs = x.value().data();
  T* o = out.data();
  for (int64_t a = 0; a < outer; ++a)
    for (int64_t j = 0; j < n; ++j) std::copy(xs + a * inner, xs + (a + 1) * inner, o + (a * n + j) * inner);
  const Shape in_shape = x.shape();
  return record<T>("broadcast_axis", std::move(out), {x},
                   [axis, in_shape](const Node<T>&, const V<T>& g) {
                     auto r2 = reduce_sum(g, axis);
                     if (r2.shape() != in_shape) r2 = reshape(r2, in_shape);
                     return std::vector<V<T>>{r2};
                   });
}

// ---- shape -----------------------------------------------------------------

template <class T>
Var<T> reshape(const Var<T>& x, const Shape& shape) {
  if (numel(shape) != x.size())
    fail("reshape", "cannot view " + to_string(x.shape()) + " as " + to_string(shape));
  if (shape == x.shape()) return x;
  const Shape in_shape = x.shape();
  return record<T>("reshape", x.value().reshaped(shape), {x},
                   [in_shape](const Node<T>&, const V<T>& g) {
                     return std::vector<V<T>>{reshape(g, in_shape)};
                   });
}

template <class T>
Var<T> transpose_last2(const Var<T>& x) {
  const int r = x.value().rank();
  if (r < 2) fail("transpose_last2", "needs rank >= 2, got " + to_string(x.shape()));
  const int64_t m = x.shape()[static_cast<size_t>(r - 2)], n = x.shape()[static_cast<size_t>(r - 1)];
  const int64_t batch = x.size() / (m * n);
  Shape os = x.shape();
  std::swap(os[static_cast<size_t>(r - 2)], os[static_cast<size_t>(r - 1)]);
  Tensor<T> out(os);
  for (int64_t b = 0; b < batch; ++b) {
    const T* src = x.value().data() + b * m * n;
    T* dst = out.data() + b * m * n;
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < n; ++j) dst[j * m + i] = src[i * n + j];
  }
  return record<T>("transpose_last2", std::move(out), {x}, [](const Node<T>&, const V<T>& g) {
    return std::vector<V<T>>{transpose_last2(g)};
  });
}

template <class T>
Var<T> concat(const std::vector<Var<T>>& xs, int axis) {
  if (xs.empty()) fail("concat", "no inputs");
  const int r = xs[0].value().rank();
  axis = normalize_axis("concat", axis, r);
  Shape os = xs[0].shape();
  int64_t total = 0;
  std::vector<int64_t> extents;
  for (const auto& x : xs) {
    Shape s = x.shape();
    if (static_cast<int>(s.size()) != r) fail("concat", "rank mismatch " + to_string(s) + " vs " + to_string(os));
    for (int i = 0; i < r; ++i)
      if (i != axis && s[static_cast<size_t>(i)] != os[static_cast<size_t>(i)])
        fail("concat", "shape mismatch " + to_string(s) + " vs " + to_string(os));
    extents.push_back(s[static_cast<size_t>(axis)]);
    total += s[static_cast<size_t>(axis)];
  }
  os[static_cast<size_t>(axis)] = total;
  const Split sp = split_at(os, axis);
  Tensor<T> out(os);
  int64_t offset = 0;
  for (size_t k = 0; k < xs.size(); ++k) {
    const int64_t chunk = extents[k] * sp.inner;
    for (int64_t a = 0; a < sp.outer; ++a) {
      const T* src = xs[k].value().data() + a * chunk;
      std::copy(src, src + chunk, out.data() + a * total * sp.inner + offset * sp.inner);
    }
    offset += extents[k];
  }
  return record<T>("concat", std::move(out), std::vector<V<T>>(xs),
                   [axis, extents](const Node<T>&, const V<T>& g) {
                     std::vector<V<T>> gs;
                     int64_t start = 0;
                     for (auto e : extents) {
                       gs.push_back(slice(g, axis, start, e));
                       start += e;
                     }
                     return gs;
                   });
}

template <class T>
Var<T> slice(const Var<T>& x, int axis, int64_t start, int64_t length) {
  const int r = x.value().rank();
  axis = normalize_axis("slice", axis, r);
  const Split sp = split_at(x.shape(), axis);
  if (start < 0 || length < 1 || start + length > sp.mid)
    fail("slice", "range [" + std::to_string(start) + "," + std::to_string(start + length) +
                      ") outside extent of " + to_string(x.shape()));
  Shape os = x.shape();
  os[static_cast<size_t>(axis)] = length;
  Tensor<T> out(os);
  for (int64_t a = 0; a < sp.outer; ++a) {
    const T* src = x.value().data() + (a * sp.mid + start) * sp.inner;
    std::copy(src, src + length * sp.inner, out.data() + a * length * sp.inner);
  }
  const int64_t full = sp.mid;
  return record<T>("slice", std::move(out), {x}, [axis, start, full](const Node<T>&, const V<T>& g) {
    return std::vector<V<T>>{embed(g, axis, start, full)};
  });
}

template <class T>
Var<T> embed(const Var<T>& x, int axis, int64_t start, int64_t full) {
  const int r = x.value().rank();
  axis = normalize_axis("embed", axis, r);
  const Split sp = split_at(x.shape(), axis);
  if (start < 0 || start + sp.mid > full) fail("embed", "range outside target extent");
  Shape os = x.shape();
  os[static_cast<size_t>(axis)] = full;
  Tensor<T> out(os);
  for (int64_t a = 0; a < sp.outer; ++a) {
    const T* src = x.value().data() + a * sp.mid * sp.inner;
    std::copy(src, src + sp.mid * sp.inner, out.data() + (a * full + start) * sp.inner);
  }
  const int64_t len = sp.mid;
  return record<T>("embed", std::move(out), {x}, [axis, start, len](const Node<T>&, const V<T>& g) {
    return std::vector<V<T>>{slice(g, axis, start, len)};
  });
}

// ---- linear maps -----------------------------------------------------------

template <class T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  const size_t r = as.size();
  if (r < 2 || bs.size() != r)
    fail("matmul", "rank mismatch " + to_string(as) + " x " + to_string(bs));
  for (size_t i = 0; i + 2 < r; ++i)
    if (as[i] != bs[i]) fail("matmul", "batch mismatch " + to_string(as) + " x " + to_string(bs));
  const int64_t m = as[r - 2], k = as[r - 1], n = bs[r - 1];
  if (bs[r - 2] != k) fail("matmul", "inner mismatch " + to_string(as) + " x " + to_string(bs));
  const int64_t batch = a.size() / (m * k);
  Shape os = as;
  os[r - 1] = n;
  Tensor<T> out(os);
  for (int64_t bi = 0; bi < batch; ++bi)
    simd::gemm<T>(false, false, m, n, k, a.value().data() + bi * m * k, k,
                  b.value().data() + bi * k * n, n, T(0), out.data() + bi * m * n, n);
  return record<T>("matmul", std::move(out), {a, b}, [](const Node<T>& self, const V<T>& g) {
    const V<T>& x = self.inputs[0];
    const V<T>& y = self.inputs[1];
    return std::vector<V<T>>{x.requires_grad() ? matmul(g, transpose_last2(y)) : V<T>{},
                             y.requires_grad() ? matmul(transpose_last2(x), g) : V<T>{}};
  });
}

template <class T>
Var<T> conv3d(const Var<T>& x, const Var<T>& w, const ConvGeometry& geom) {
  const ConvDims c = conv_dims("conv3d", x.shape(), w.shape(), geom);
  return record<T>("conv3d", conv_forward_raw(x.value(), w.value(), c, geom), {x, w},
                   [geom](const Node<T>& self, const V<T>& g) {
                     const V<T>& xin = self.inputs[0];
                     const V<T>& win = self.inputs[1];
                     return std::vector<V<T>>{
                         xin.requires_grad() ? conv3d_input_grad(g, win, xin.shape(), geom) : V<T>{},
                         win.requires_grad() ? conv3d_weight_grad(xin, g, win.shape(), geom)
                                             : V<T>{}};
                   });
}

template <class T>
Var<T> conv3d_input_grad(const Var<T>& grad_out, const Var<T>& w, const Shape& x_shape,
                         const ConvGeometry& geom) {
  const ConvDims c = conv_dims("conv3d_input_grad", x_shape, w.shape(), geom);
  const Shape expect{c.n, c.co, c.od, c.oh, c.ow};
  if (grad_out.shape() != expect)
    fail("conv3d_input_grad", "grad shape " + to_string(grad_out.shape()) + " expected " + to_string(expect));
  return record<T>("conv3d_input_grad", conv_input_grad_raw(grad_out.value(), w.value(), c, geom),
                   {grad_out, w}, [geom](const Node<T>& self, const V<T>& g) {
                     const V<T>& gy = self.inputs[0];
                     const V<T>& win = self.inputs[1];
                     return std::vector<V<T>>{
                         gy.requires_grad() ? conv3d(g, win, geom) : V<T>{},
                         win.requires_grad() ? conv3d_weight_grad(g, gy, win.shape(), geom) : V<T>{}};
                   });
}

template <class T>
Var<T> conv3d_weight_grad(const Var<T>& x, const Var<T>& grad_out, const Shape& w_shape,
                          const ConvGeometry& geom) {
  const ConvDims c = conv_dims("conv3d_weight_grad", x.shape(), w_shape, geom);
  const Shape expect{c.n, c.co, c.od, c.oh, c.ow};
  if (grad_out.shape() != expect)
    fail("conv3d_weight_grad", "grad shape " + to_string(grad_out.shape()) + " expected " + to_string(expect));
  return record<T>("conv3d_weight_grad", conv_weight_grad_raw(x.value(), grad_out.value(), c, geom),
                   {x, grad_out}, [geom](const Node<T>& self, const V<T>& g) {
                     const V<T>& xin = self.inputs[0];
                     const V<T>& gy = self.inputs[1];
                     return std::vector<V<T>>{
                         xin.requires_grad() ? conv3d_input_grad(gy, g, xin.shape(), geom) : V<T>{},
                         gy.requires_grad() ? conv3d(xin, g, geom) : V<T>{}};
                   });
}

template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, int stride, int pad) {
  if (x.value().rank() != 4 || w.value().rank() != 4)
    fail("conv2d", "expected 4-d input and weight, got " + to_string(x.shape()) + " and " +
                       to_string(w.shape()));
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  ConvGeometry g;
  g.stride = {1, stride, stride};
  g.pad = {0, pad, pad};
  auto y = conv3d(reshape(x, Shape{xs[0], xs[1], 1, xs[2], xs[3]}),
                  reshape(w, Shape{ws[0], ws[1], 1, ws[2], ws[3]}), g);
  const Shape& ys = y.shape();
  return reshape(y, Shape{ys[0], ys[1], ys[3], ys[4]});
}

// ---- resampling ------------------------------------------------------------

template <class T>
Var<T> upsample_nearest2d(const Var<T>& x, int factor) {
  return upsample_hw(x, factor, factor);
}

template <class T>
Var<T> sum_pool2d(const Var<T>& x, int factor_h, int factor_w) {
  return sum_pool_hw(x, factor_h, factor_w);
}

template <class T>
Var<T> adaptive_avg_pool2d(const Var<T>& x, int64_t out_h, int64_t out_w) {
  const int r = x.value().rank();
  if (r < 2) fail("adaptive_avg_pool2d", "needs rank >= 2");
  const int64_t h = x.shape()[static_cast<size_t>(r - 2)], w = x.shape()[static_cast<size_t>(r - 1)];
  if (out_h < 1 || out_w < 1 || h % out_h != 0 || w % out_w != 0)
    fail("adaptive_avg_pool2d", "output " + std::to_string(out_h) + "x" + std::to_string(out_w) +
                                    " must divide input " + to_string(x.shape()));
  const int fh = static_cast<int>(h / out_h), fw = static_cast<int>(w / out_w);
  if (fh == 1 && fw == 1) return x;
  return mul_scalar(sum_pool_hw(x, fh, fw), T(1) / static_cast<T>(fh * fw));
}

// ---- composites ------------------------------------------------------------

template <class T>
Var<T> softmax_last(const Var<T>& x) {
  const int r = x.value().rank();
  const int64_t n = x.shape().back();
  const int64_t rows = x.size() / n;
  // Row maxima enter as constants: softmax is invariant to the shift.
  Tensor<T> shift(x.shape());
  for (int64_t i = 0; i < rows; ++i) {
    const T* row = x.value().data() + i * n;
    const T m = *std::max_element(row, row + n);
    std::fill(shift.data() + i * n, shift.data() + (i + 1) * n, m);
  }
  auto e = exp(sub(x, V<T>::constant(std::move(shift))));
  if (r == 1) return div(e, expand_scalar(sum(e), x.shape()));
  auto s = reduce_sum(e, r - 1);
  return div(e, broadcast_axis(s, r - 1, n));
}

template <class T>
Var<T> affine(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  if (x.value().rank() != 2 || w.value().rank() != 2 || b.value().rank() != 1)
    fail("affine", "expected x[B,in], w[in,out], b[out]; got " + to_string(x.shape()) + ", " +
                       to_string(w.shape()) + ", " + to_string(b.shape()));
  if (w.shape()[1] != b.shape()[0])
    fail("affine", "bias " + to_string(b.shape()) + " does not match weight " + to_string(w.shape()));
  return add(matmul(x, w), broadcast_axis(b, 0, x.shape()[0]));
}

template <class T>
Var<T> expand_channels(const Var<T>& nc, const Shape& shape) {
  if (nc.value().rank() != 2 || shape.size() < 2 || nc.shape()[0] != shape[0] ||
      nc.shape()[1] != shape[1])
    fail("expand_channels", to_string(nc.shape()) + " cannot expand to " + to_string(shape));
  const int64_t spatial = numel(shape) / (shape[0] * shape[1]);
  return reshape(broadcast_axis(nc, 2, spatial), shape);
}

template <class T>
Var<T> add_channel_bias(const Var<T>& x, const Var<T>& b) {
  if (x.value().rank() < 2 || b.value().rank() != 1 || b.shape()[0] != x.shape()[1])
    fail("add_channel_bias", "bias " + to_string(b.shape()) + " vs input " + to_string(x.shape()));
  return add(x, expand_channels(broadcast_axis(b, 0, x.shape()[0]), x.shape()));
}

template <class T>
Var<T> channel_mean(const Var<T>& x) {
  if (x.value().rank() < 3) fail("channel_mean", "needs [N, C, ...], got " + to_string(x.shape()));
  const int64_t n = x.shape()[0], c = x.shape()[1];
  return reduce_mean(reshape(x, Shape{n, c, x.size() / (n * c)}), 2);
}

template <class T>
Var<T> channel_std(const Var<T>& x, T eps) {
  auto m = channel_mean(x);
  auto centered = sub(x, expand_channels(m, x.shape()));
  return sqrt(add_scalar(channel_mean(square(centered)), eps));
}

#define XRS_INSTANTIATE_OPS(T)                                                                  \
  template Var<T> add(const Var<T>&, const Var<T>&);                                           \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                           \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                           \
  template Var<T> div(const Var<T>&, const Var<T>&);                                           \
  template Var<T> add_scalar(const Var<T>&, T);                                                \
  template Var<T> mul_scalar(const Var<T>&, T);                                                \
  template Var<T> neg(const Var<T>&);                                                          \
  template Var<T> square(const Var<T>&);                                                       \
  template Var<T> abs(const Var<T>&);                                                          \
  template Var<T> sqrt(const Var<T>&);                                                         \
  template Var<T> exp(const Var<T>&);                                                          \
  template Var<T> tanh(const Var<T>&);                                                         \
  template Var<T> sigmoid(const Var<T>&);                                                      \
  template Var<T> leaky_relu(const Var<T>&, T);                                                \
  template Var<T> sum(const Var<T>&);                                                          \
  template Var<T> mean(const Var<T>&);                                                         \
  template Var<T> expand_scalar(const Var<T>&, const Shape&);                                  \
  template Var<T> reduce_sum(const Var<T>&, int);                                              \
  template Var<T> reduce_mean(const Var<T>&, int);                                             \
  template Var<T> broadcast_axis(const Var<T>&, int, int64_t);                                 \
  template Var<T> reshape(const Var<T>&, const Shape&);                                        \
  template Var<T> transpose_last2(const Var<T>&);                                              \
  template Var<T> concat(const std::vector<Var<T>>&, int);                                     \
  template Var<T> slice(const Var<T>&, int, int64_t, int64_t);                                 \
  template Var<T> embed(const Var<T>&, int, int64_t, int64_t);                                 \
  template Var<T> matmul(const Var<T>&, const Var<T>&);                                        \
  template Var<T> conv3d(const Var<T>&, const Var<T>&, const ConvGeometry&);                   \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, int, int);                              \
  template Var<T> conv3d_input_grad(const Var<T>&, const Var<T>&, const Shape&,                \
                                    const ConvGeometry&);                                      \
  template Var<T> conv3d_weight_grad(const Var<T>&, const Var<T>&, const Shape&,               \
                                     const ConvGeometry&);                                     \
  template Var<T> upsample_nearest2d(const Var<T>&, int);                                      \
  template Var<T> sum_pool2d(const Var<T>&, int, int);                                         \
  template Var<T> adaptive_avg_pool2d(const Var<T>&, int64_t, int64_t);                       \
  template Var<T> softmax_last(const Var<T>&);                                                 \
  template Var<T> affine(const Var<T>&, const Var<T>&, const Var<T>&);                         \
  template Var<T> add_channel_bias(const Var<T>&, const Var<T>&);                              \
  template Var<T> channel_mean(const Var<T>&);                                                 \
  template Var<T> channel_std(const Var<T>&, T);                                               \
  template Var<T> expand_channels(const Var<T>&, const Shape&);

XRS_INSTANTIATE_OPS(float)
XRS_INSTANTIATE_OPS(double)

}  // namespace xrs::ad
