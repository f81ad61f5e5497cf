/**
 * Copyright 2026 The sydnet Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "sydnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "sydnet/error.hpp"

namespace syd {

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(base);
  for (auto p : parts) h = mix(h ^ p);
  return h;
}


namespace {

template <typename T>
using Node = detail::Node<T>;

/// Gradient buffer of parent k, or nullptr when that parent is constant.
template <typename T>
T* parent_grad(Node<T>& out, std::size_t k) {
  auto& p = *out.parents[k];
  return p.requires_grad ? p.grad.data() : nullptr;
}

template <typename T>
const std::vector<T>& parent_data(const Node<T>& out, std::size_t k) {
  return out.parents[k]->data;
}

void check_axis(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for shape " +
                         shape_str(shape));
  }
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t n = 1;
  std::size_t inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.n = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

// --- dense kernels ---------------------------------------------------------

// c[m x n] += a[m x k] * b[k x n]
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    const T* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      if (av == T(0)) continue;
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// c[m x n] += a^T * b, with a stored [k x m] and b [k x n]
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const T* arow = a + p * m;
    const T* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const T av = arow[i];
      if (av == T(0)) continue;
      T* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
std::vector<T> transpose(const T* a, std::size_t rows, std::size_t cols) {
  std::vector<T> t(rows * cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) t[j * rows + i] = a[i * cols + j];
  return t;
}

// --- broadcasting ------------------------------------------------------------

struct BroadcastPlan {
  Shape out;
  std::vector<std::size_t> stride_a;
  std::vector<std::size_t> stride_b;
  bool same = false;
};

BroadcastPlan plan_broadcast(const Shape& a, const Shape& b, const char* op) {
  BroadcastPlan plan;
  if (a == b) {
    plan.out = a;
    plan.same = true;
    return plan;
  }
  const std::size_t r = std::max(a.size(), b.size());
  Shape pa(r, 1), pb(r, 1);
  std::copy(a.begin(), a.end(), pa.begin() + (r - a.size()));
  std::copy(b.begin(), b.end(), pb.begin() + (r - b.size()));
  plan.out.resize(r);
  for (std::size_t i = 0; i < r; ++i) {
    if (pa[i] == pb[i] || pb[i] == 1) {
      plan.out[i] = pa[i];
    } else if (pa[i] == 1) {
      plan.out[i] = pb[i];
    } else {
      throw DimensionError(std::string(op) + ": cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    }
  }
  auto strides = [&](const Shape& p) {
    std::vector<std::size_t> s(r, 0);
    std::size_t acc = 1;
    for (std::size_t i = r; i-- > 0;) {
      s[i] = (p[i] == 1 && plan.out[i] != 1) ? 0 : acc;
      acc *= p[i];
    }
    return s;
  };
  plan.stride_a = strides(pa);
  plan.stride_b = strides(pb);
  return plan;
}

// Calls f(out_index, a_index, b_index) for every output element in order.
template <typename F>
void for_each_broadcast(const BroadcastPlan& plan, F&& f) {
  const std::size_t total = shape_numel(plan.out);
  if (plan.same) {
    for (std::size_t i = 0; i < total; ++i) f(i, i, i);
    return;
  }
  const std::size_t r = plan.out.size();
  if (r == 0) {
    f(0, 0, 0);
    return;
  }
  std::vector<std::size_t> idx(r, 0);
  const std::size_t last = plan.out[r - 1];
  const std::size_t sa_last = plan.stride_a[r - 1];
  const std::size_t sb_last = plan.stride_b[r - 1];
  std::size_t ia = 0, ib = 0;
  for (std::size_t o = 0; o < total; o += last) {
    for (std::size_t j = 0; j < last; ++j) f(o + j, ia + j * sa_last, ib + j * sb_last);
    // advance the odometer over all but the last axis
    for (std::size_t d = r - 1; d-- > 0;) {
      ++idx[d];
      ia += plan.stride_a[d];
      ib += plan.stride_b[d];
      if (idx[d] < plan.out[d]) break;
      ia -= plan.stride_a[d] * idx[d];
      ib -= plan.stride_b[d] * idx[d];
      idx[d] = 0;
    }
  }
}

template <typename T, typename Fwd, typename Da, typename Db>
Tensor<T> binary_op(const Tensor<T>& a, const Tensor<T>& b, const char* name, Fwd fwd, Da da, Db db) {
  BroadcastPlan plan = plan_broadcast(a.shape(), b.shape(), name);
  std::vector<T> out(shape_numel(plan.out));
  const auto ad = a.data();
  const auto bd = b.data();
  for_each_broadcast(plan, [&](std::size_t o, std::size_t i, std::size_t j) { out[o] = fwd(ad[i], bd[j]); });
  Shape out_shape = plan.out;
  return make_result<T>(std::move(out_shape), std::move(out), {a, b},
                        [plan = std::move(plan), da, db](Node<T>& node) {
                          const auto& av = parent_data(node, 0);
                          const auto& bv = parent_data(node, 1);
                          T* ga = parent_grad(node, 0);
                          T* gb = parent_grad(node, 1);
                          const auto& g = node.grad;
                          for_each_broadcast(plan, [&](std::size_t o, std::size_t i, std::size_t j) {
                            if (ga) ga[i] += da(av[i], bv[j], g[o]);
                            if (gb) gb[j] += db(av[i], bv[j], g[o]);
                          });
                        });
}

template <typename T, typename Fwd, typename Dx>
Tensor<T> unary_op(const Tensor<T>& x, Fwd fwd, Dx dx) {
  const auto xd = x.data();
  std::vector<T> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) out[i] = fwd(xd[i]);
  return make_result<T>(x.shape(), std::move(out), {x}, [dx](Node<T>& node) {
    T* gx = parent_grad(node, 0);
    const auto& xv = parent_data(node, 0);
    for (std::size_t i = 0; i < node.grad.size(); ++i) gx[i] += node.grad[i] * dx(xv[i], node.data[i]);
  });
}

}  // namespace

// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<T> out(m * n, T(0));
  gemm_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
  return make_result<T>({m, n}, std::move(out), {a, b}, [m, k, n](Node<T>& node) {
    const auto& av = parent_data(node, 0);
    const auto& bv = parent_data(node, 1);
    if (T* ga = parent_grad(node, 0)) {
      // dA = dC * B^T
      std::vector<T> bt = transpose(bv.data(), k, n);
      gemm_nn(node.grad.data(), bt.data(), ga, m, n, k);
    }
    if (T* gb = parent_grad(node, 1)) {
      // dB = A^T * dC
      gemm_tn(av.data(), node.grad.data(), gb, k, m, n);
    }
  });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(
      a, b, "add", [](T x, T y) { return x + y; }, [](T, T, T g) { return g; }, [](T, T, T g) { return g; });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(
      a, b, "sub", [](T x, T y) { return x - y; }, [](T, T, T g) { return g; }, [](T, T, T g) { return -g; });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(
      a, b, "mul", [](T x, T y) { return x * y; }, [](T, T y, T g) { return g * y; },
      [](T x, T, T g) { return g * x; });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  return unary_op(
      x, [factor](T v) { return v * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  return unary_op(
      x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary_op(
      x,
      [](T v) {
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary_op(
      x, [](T v) { return v > T(0) ? v : T(0); }, [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  check_axis(x.shape(), axis, "softmax");
  const AxisSplit s = split_at(x.shape(), axis);
  const auto xd = x.data();
  std::vector<T> out(xd.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.n * s.inner + in;
      T mx = xd[base];
      for (std::size_t j = 1; j < s.n; ++j) mx = std::max(mx, xd[base + j * s.inner]);
      T total = T(0);
      for (std::size_t j = 0; j < s.n; ++j) {
        const T e = std::exp(xd[base + j * s.inner] - mx);
        out[base + j * s.inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < s.n; ++j) out[base + j * s.inner] /= total;
    }
  }
  return make_result<T>(x.shape(), std::move(out), {x}, [s](Node<T>& node) {
    T* gx = parent_grad(node, 0);
    const auto& y = node.data;
    const auto& g = node.grad;
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = o * s.n * s.inner + in;
        T dot = T(0);
        for (std::size_t j = 0; j < s.n; ++j) dot += g[base + j * s.inner] * y[base + j * s.inner];
        for (std::size_t j = 0; j < s.n; ++j) {
          const std::size_t i = base + j * s.inner;
          gx[i] += y[i] * (g[i] - dot);
        }
      }
    }
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  std::vector<T> out(x.data().begin(), x.data().end());
  return make_result<T>(std::move(shape), std::move(out), {x}, [](Node<T>& node) {
    T* gx = parent_grad(node, 0);
    for (std::size_t i = 0; i < node.grad.size(); ++i) gx[i] += node.grad[i];
  });
}

template <typename T>
Tensor<T> flatten(const Tensor<T>& x, std::size_t start_axis) {
  if (start_axis >= x.rank()) {
    throw DimensionError("flatten: start axis " + std::to_string(start_axis) + " out of range for " +
                         shape_str(x.shape()));
  }
  Shape shape(x.shape().begin(), x.shape().begin() + static_cast<std::ptrdiff_t>(start_axis));
  std::size_t rest = 1;
  for (std::size_t i = start_axis; i < x.rank(); ++i) rest *= x.dim(i);
  shape.push_back(rest);
  return reshape(x, std::move(shape));
}

template <typename T>
Tensor<T> concat(std::span<const Tensor<T>> parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const Shape& first = parts[0].shape();
  check_axis(first, axis, "concat");
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<std::size_t> sizes;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == first[i];
    if (!ok) throw DimensionError("concat: " + shape_str(s) + " incompatible with " + shape_str(first));
    sizes.push_back(s[axis]);
    out_shape[axis] += s[axis];
  }
  const AxisSplit total = split_at(out_shape, axis);
  std::vector<T> out(shape_numel(out_shape));
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto pd = parts[k].data();
    const std::size_t block = sizes[k] * total.inner;
    for (std::size_t o = 0; o < total.outer; ++o) {
      std::copy_n(pd.begin() + static_cast<std::ptrdiff_t>(o * block), block,
                  out.begin() + static_cast<std::ptrdiff_t>(o * total.n * total.inner + offset));
    }
    offset += block;
  }
  std::vector<Tensor<T>> parents(parts.begin(), parts.end());
  return make_result<T>(std::move(out_shape), std::move(out), std::move(parents), [sizes, total](Node<T>& node) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      const std::size_t block = sizes[k] * total.inner;
      if (T* g = parent_grad(node, k)) {
        for (std::size_t o = 0; o < total.outer; ++o) {
          const T* src = node.grad.data() + o * total.n * total.inner + offset;
          T* dst = g + o * block;
          for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
        }
      }
      offset += block;
    }
  });
}

namespace {

Shape reduced_shape(const Shape& shape, std::size_t axis, bool keepdim) {
  Shape out = shape;
  if (keepdim) {
    out[axis] = 1;
  } else {
    out.erase(out.begin() + static_cast<std::ptrdiff_t>(axis));
  }
  return out;
}

template <typename T>
Tensor<T> sum_or_mean(const Tensor<T>& x, std::size_t axis, bool keepdim, bool average, const char* name) {
  check_axis(x.shape(), axis, name);
  const AxisSplit s = split_at(x.shape(), axis);
  const auto xd = x.data();
  std::vector<T> out(s.outer * s.inner, T(0));
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t j = 0; j < s.n; ++j) {
      const T* src = xd.data() + (o * s.n + j) * s.inner;
      T* dst = out.data() + o * s.inner;
      for (std::size_t in = 0; in < s.inner; ++in) dst[in] += src[in];
    }
  const T factor = average ? T(1) / static_cast<T>(s.n) : T(1);
  if (average)
    for (auto& v : out) v *= factor;
  return make_result<T>(reduced_shape(x.shape(), axis, keepdim), std::move(out), {x}, [s, factor](Node<T>& node) {
    T* gx = parent_grad(node, 0);
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t j = 0; j < s.n; ++j) {
        const T* src = node.grad.data() + o * s.inner;
        T* dst = gx + (o * s.n + j) * s.inner;
        for (std::size_t in = 0; in < s.inner; ++in) dst[in] += src[in] * factor;
      }
  });
}

}  // namespace

template <typename T>
Tensor<T> sum(const Tensor<T>& x, std::size_t axis, bool keepdim) {
  return sum_or_mean(x, axis, keepdim, false, "sum");
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x, std::size_t axis, bool keepdim) {
  return sum_or_mean(x, axis, keepdim, true, "mean");
}

template <typename T>
Tensor<T> max(const Tensor<T>& x, std::size_t axis, bool keepdim) {
  check_axis(x.shape(), axis, "max");
  const AxisSplit s = split_at(x.shape(), axis);
  const auto xd = x.data();
  std::vector<T> out(s.outer * s.inner);
  std::vector<std::size_t> arg(s.outer * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t in = 0; in < s.inner; ++in) {
      std::size_t best = (o * s.n) * s.inner + in;
      for (std::size_t j = 1; j < s.n; ++j) {
        const std::size_t i = (o * s.n + j) * s.inner + in;
        if (xd[i] > xd[best]) best = i;
      }
      out[o * s.inner + in] = xd[best];
      arg[o * s.inner + in] = best;
    }
  return make_result<T>(reduced_shape(x.shape(), axis, keepdim), std::move(out), {x},
                        [arg = std::move(arg)](Node<T>& node) {
                          T* gx = parent_grad(node, 0);
                          for (std::size_t i = 0; i < arg.size(); ++i) gx[arg[i]] += node.grad[i];
                        });
}

template <typename T>
Tensor<T> sum_all(const Tensor<T>& x) {
  return sum(reshape(x, Shape{x.numel()}), 0, false);
}

namespace {

template <typename T>
Tensor<T> pool(const Tensor<T>& f, PoolOver over, bool use_max) {
  if (f.rank() < 3) throw DimensionError("global pooling needs [... x h x w x c], got " + shape_str(f.shape()));
  const std::size_t r = f.rank();
  if (over == PoolOver::kChannel) return use_max ? max(f, r - 1, true) : mean(f, r - 1, true);
  Shape merged(f.shape().begin(), f.shape().end() - 3);
  merged.push_back(f.dim(r - 3) * f.dim(r - 2));
  merged.push_back(f.dim(r - 1));
  auto view = reshape(f, std::move(merged));
  return use_max ? max(view, r - 3, false) : mean(view, r - 3, false);
}

}  // namespace

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& f, PoolOver over) {
  return pool(f, over, false);
}

template <typename T>
Tensor<T> global_max_pool(const Tensor<T>& f, PoolOver over) {
  return pool(f, over, true);
}

// ---------------------------------------------------------------------------

namespace {

struct ConvGeometry {
  std::size_t batch, in_h, in_w, cin, k, cout, stride, pad, out_h, out_w;
  std::size_t patch() const { return k * k * cin; }
  std::size_t rows() const { return batch * out_h * out_w; }
};

// cols [rows x k*k*cin]; out-of-image taps are zero.
template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* cols) {
  std::size_t row = 0;
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t oy = 0; oy < g.out_h; ++oy)
      for (std::size_t ox = 0; ox < g.out_w; ++ox, ++row) {
        T* dst = cols + row * g.patch();
        for (std::size_t ky = 0; ky < g.k; ++ky) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          for (std::size_t kx = 0; kx < g.k; ++kx, dst += g.cin) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
            if (iy < 0 || ix < 0 || iy >= static_cast<long>(g.in_h) || ix >= static_cast<long>(g.in_w)) {
              std::fill_n(dst, g.cin, T(0));
            } else {
              std::copy_n(x + ((b * g.in_h + iy) * g.in_w + ix) * g.cin, g.cin, dst);
            }
          }
        }
      }
}

template <typename T>
void col2im_add(const T* cols, const ConvGeometry& g, T* dx) {
  std::size_t row = 0;
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t oy = 0; oy < g.out_h; ++oy)
      for (std::size_t ox = 0; ox < g.out_w; ++ox, ++row) {
        const T* src = cols + row * g.patch();
        for (std::size_t ky = 0; ky < g.k; ++ky) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          for (std::size_t kx = 0; kx < g.k; ++kx, src += g.cin) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
            if (iy < 0 || ix < 0 || iy >= static_cast<long>(g.in_h) || ix >= static_cast<long>(g.in_w)) continue;
            T* dst = dx + ((b * g.in_h + iy) * g.in_w + ix) * g.cin;
            for (std::size_t c = 0; c < g.cin; ++c) dst[c] += src[c];
          }
        }
      }
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, std::size_t stride, std::size_t pad) {
  if (x.rank() != 4 || w.rank() != 4 || w.dim(0) != w.dim(1) || w.dim(2) != x.dim(3) || stride == 0) {
    throw DimensionError("conv2d: input " + shape_str(x.shape()) + " incompatible with kernel " +
                         shape_str(w.shape()));
  }
  ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), w.dim(0), w.dim(3), stride, pad, 0, 0};
  if (g.in_h + 2 * pad < g.k || g.in_w + 2 * pad < g.k) {
    throw DimensionError("conv2d: kernel larger than padded input " + shape_str(x.shape()));
  }
  g.out_h = (g.in_h + 2 * pad - g.k) / stride + 1;
  g.out_w = (g.in_w + 2 * pad - g.k) / stride + 1;
  std::vector<T> cols(g.rows() * g.patch());
  im2col(x.data().data(), g, cols.data());
  std::vector<T> out(g.rows() * g.cout, T(0));
  gemm_nn(cols.data(), w.data().data(), out.data(), g.rows(), g.patch(), g.cout);
  return make_result<T>({g.batch, g.out_h, g.out_w, g.cout}, std::move(out), {x, w}, [g](Node<T>& node) {
    const auto& xv = parent_data(node, 0);
    const auto& wv = parent_data(node, 1);
    T* gx = parent_grad(node, 0);
    T* gw = parent_grad(node, 1);
    if (gw) {
      std::vector<T> cols(g.rows() * g.patch());
      im2col(xv.data(), g, cols.data());
      gemm_tn(cols.data(), node.grad.data(), gw, g.patch(), g.rows(), g.cout);
    }
    if (gx) {
      std::vector<T> wt = transpose(wv.data(), g.patch(), g.cout);
      std::vector<T> dcols(g.rows() * g.patch(), T(0));
      gemm_nn(node.grad.data(), wt.data(), dcols.data(), g.rows(), g.cout, g.patch());
      col2im_add(dcols.data(), g, gx);
    }
  });
}

namespace {

struct Tap {
  std::size_t lo;
  std::size_t hi;
  double frac;  // weight of `hi`
};

std::vector<Tap> bilinear_taps(std::size_t in, std::size_t out) {
  std::vector<Tap> taps(out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const auto lo = static_cast<std::size_t>(std::floor(src));
    const std::size_t hi = std::min(lo + 1, in - 1);
    taps[o] = {lo, hi, src - static_cast<double>(lo)};
  }
  return taps;
}

}  // namespace

template <typename T>
Tensor<T> bilinear_crop_resize(const Tensor<T>& x, const Region& region, std::size_t out_h, std::size_t out_w) {
  if (x.rank() != 4) throw DimensionError("bilinear_crop_resize: expected [b x H x W x c], got " + shape_str(x.shape()));
  const std::size_t batch = x.dim(0), in_h = x.dim(1), in_w = x.dim(2), c = x.dim(3);
  if (region.h == 0 || region.w == 0 || region.y + region.h > in_h || region.x + region.w > in_w) {
    throw DimensionError("bilinear_crop_resize: region [y=" + std::to_string(region.y) + ", x=" +
                         std::to_string(region.x) + ", h=" + std::to_string(region.h) + ", w=" +
                         std::to_string(region.w) + "] outside map " + shape_str(x.shape()));
  }
  if (out_h == 0 || out_w == 0) throw DimensionError("bilinear_crop_resize: empty output size");
  auto ty = bilinear_taps(region.h, out_h);
  auto tx = bilinear_taps(region.w, out_w);
  for (auto& t : ty) t.lo += region.y, t.hi += region.y;
  for (auto& t : tx) t.lo += region.x, t.hi += region.x;

  const auto xd = x.data();
  std::vector<T> out(batch * out_h * out_w * c);
  auto at = [&](std::size_t b, std::size_t y, std::size_t xx) { return ((b * in_h + y) * in_w + xx) * c; };
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      const Tap& vy = ty[oy];
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        const Tap& vx = tx[ox];
        const T w00 = static_cast<T>((1.0 - vy.frac) * (1.0 - vx.frac));
        const T w01 = static_cast<T>((1.0 - vy.frac) * vx.frac);
        const T w10 = static_cast<T>(vy.frac * (1.0 - vx.frac));
        const T w11 = static_cast<T>(vy.frac * vx.frac);
        const T* p00 = xd.data() + at(b, vy.lo, vx.lo);
        const T* p01 = xd.data() + at(b, vy.lo, vx.hi);
        const T* p10 = xd.data() + at(b, vy.hi, vx.lo);
        const T* p11 = xd.data() + at(b, vy.hi, vx.hi);
        T* dst = out.data() + ((b * out_h + oy) * out_w + ox) * c;
        for (std::size_t k = 0; k < c; ++k) dst[k] = w00 * p00[k] + w01 * p01[k] + w10 * p10[k] + w11 * p11[k];
      }
    }
  return make_result<T>({batch, out_h, out_w, c}, std::move(out), {x},
                        [ty = std::move(ty), tx = std::move(tx), batch, in_h, in_w, c, out_h, out_w](Node<T>& node) {
                          T* gx = parent_grad(node, 0);
                          auto at = [&](std::size_t b, std::size_t y, std::size_t xx) {
                            return ((b * in_h + y) * in_w + xx) * c;
                          };
                          for (std::size_t b = 0; b < batch; ++b)
                            for (std::size_t oy = 0; oy < out_h; ++oy) {
                              const Tap& vy = ty[oy];
                              for (std::size_t ox = 0; ox < out_w; ++ox) {
                                const Tap& vx = tx[ox];
                                const T w00 = static_cast<T>((1.0 - vy.frac) * (1.0 - vx.frac));
                                const T w01 = static_cast<T>((1.0 - vy.frac) * vx.frac);
                                const T w10 = static_cast<T>(vy.frac * (1.0 - vx.frac));
                                const T w11 = static_cast<T>(vy.frac * vx.frac);
                                const T* g = node.grad.data() + ((b * out_h + oy) * out_w + ox) * c;
                                T* p00 = gx + at(b, vy.lo, vx.lo);
                                T* p01 = gx + at(b, vy.lo, vx.hi);
                                T* p10 = gx + at(b, vy.hi, vx.lo);
                                T* p11 = gx + at(b, vy.hi, vx.hi);
                                for (std::size_t k = 0; k < c; ++k) {
                                  p00[k] += w00 * g[k];
                                  p01[k] += w01 * g[k];
                                  p10[k] += w10 * g[k];
                                  p11[k] += w11 * g[k];
                                }
                              }
                            }
                        });
}

// ---------------------------------------------------------------------------

template <typename T>
BatchNorm<T>::BatchNorm(std::size_t channels, double momentum_, double eps_)
    : gamma({channels}, T(1), true),
      beta({channels}, T(0), true),
      running_mean({channels}, T(0)),
      running_var({channels}, T(1)),
      momentum(momentum_),
      eps(eps_) {}

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& x, BatchNorm<T>& bn, bool training) {
  const std::size_t c = bn.channels();
  if (x.rank() < 1 || x.shape().back() != c) {
    throw DimensionError("batch_norm: input " + shape_str(x.shape()) + " does not end in " + std::to_string(c) +
                         " channels");
  }
  const std::size_t m = x.numel() / c;
  const auto xd = x.data();
  const auto gamma = bn.gamma.data();
  const auto beta = bn.beta.data();
  std::vector<T> mu(c), inv_std(c);
  if (training) {
    std::vector<double> s(c, 0.0), ss(c, 0.0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t k = 0; k < c; ++k) s[k] += xd[i * c + k];
    for (std::size_t k = 0; k < c; ++k) s[k] /= static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t k = 0; k < c; ++k) {
        const double d = xd[i * c + k] - s[k];
        ss[k] += d * d;
      }
    auto rm = bn.running_mean.mutable_data();
    auto rv = bn.running_var.mutable_data();
    for (std::size_t k = 0; k < c; ++k) {
      const double var = ss[k] / static_cast<double>(m);
      mu[k] = static_cast<T>(s[k]);
      inv_std[k] = static_cast<T>(1.0 / std::sqrt(var + bn.eps));
      rm[k] = static_cast<T>(bn.momentum * rm[k] + (1.0 - bn.momentum) * s[k]);
      rv[k] = static_cast<T>(bn.momentum * rv[k] + (1.0 - bn.momentum) * var);
    }
  } else {
    const auto rm = bn.running_mean.data();
    const auto rv = bn.running_var.data();
    for (std::size_t k = 0; k < c; ++k) {
      mu[k] = rm[k];
      inv_std[k] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(rv[k]) + bn.eps));
    }
  }
  std::vector<T> xhat(xd.size()), out(xd.size());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < c; ++k) {
      const std::size_t j = i * c + k;
      xhat[j] = (xd[j] - mu[k]) * inv_std[k];
      out[j] = gamma[k] * xhat[j] + beta[k];
    }
  return make_result<T>(
      x.shape(), std::move(out), {x, bn.gamma, bn.beta},
      [xhat = std::move(xhat), inv_std = std::move(inv_std), m, c, training](Node<T>& node) {
        const auto& g = node.grad;
        const auto& gamma = parent_data(node, 1);
        std::vector<T> sum_g(c, T(0)), sum_gx(c, T(0));
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t k = 0; k < c; ++k) {
            sum_g[k] += g[i * c + k];
            sum_gx[k] += g[i * c + k] * xhat[i * c + k];
          }
        if (T* gg = parent_grad(node, 1))
          for (std::size_t k = 0; k < c; ++k) gg[k] += sum_gx[k];
        if (T* gb = parent_grad(node, 2))
          for (std::size_t k = 0; k < c; ++k) gb[k] += sum_g[k];
        if (T* gx = parent_grad(node, 0)) {
          const T inv_m = T(1) / static_cast<T>(m);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t k = 0; k < c; ++k) {
              const std::size_t j = i * c + k;
              if (training) {
                gx[j] += gamma[k] * inv_std[k] * (g[j] - inv_m * sum_g[k] - xhat[j] * inv_m * sum_gx[k]);
              } else {
                gx[j] += gamma[k] * inv_std[k] * g[j];
              }
            }
        }
      });
}

double gaussian_noise_std(double rho) {
  if (!(rho >= 0.0 && rho < 1.0)) {
    throw ParameterError("gaussian dropout rate must satisfy 0 <= rho < 1, got " + std::to_string(rho));
  }
  return std::sqrt(rho / (1.0 - rho));
}

template <typename T>
Tensor<T> gaussian_dropout(const Tensor<T>& x, double rho, bool training, Rng& rng) {
  const double sigma = gaussian_noise_std(rho);
  if (!training || sigma == 0.0) return x;
  std::normal_distribution<double> noise(1.0, sigma);
  std::vector<T> factors(x.numel());
  for (auto& f : factors) f = static_cast<T>(noise(rng));
  return mul(x, Tensor<T>(x.shape(), std::move(factors), false));
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ParameterError("dropout rate must satisfy 0 <= rate < 1, got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return x;
  std::bernoulli_distribution keep(1.0 - rate);
  const T scale_kept = static_cast<T>(1.0 / (1.0 - rate));
  std::vector<T> factors(x.numel());
  for (auto& f : factors) f = keep(rng) ? scale_kept : T(0);
  return mul(x, Tensor<T>(x.shape(), std::move(factors), false));
}

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& probs, std::span<const int> labels) {
  if (probs.rank() != 2 || probs.dim(0) != labels.size()) {
    throw DimensionError("cross_entropy: predictions " + shape_str(probs.shape()) + " vs " +
                         std::to_string(labels.size()) + " labels");
  }
  const std::size_t b = probs.dim(0), classes = probs.dim(1);
  std::vector<int> y(labels.begin(), labels.end());
  for (int label : y) {
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw LabelError("label " + std::to_string(label) + " outside [0, " + std::to_string(classes) + ")");
    }
  }
  const auto p = probs.data();
  double loss = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    loss -= std::log(std::max(static_cast<double>(p[i * classes + y[i]]), kProbabilityFloor));
  }
  loss /= static_cast<double>(b);
  return make_result<T>(Shape{}, {static_cast<T>(loss)}, {probs}, [y = std::move(y), b, classes](Node<T>& node) {
    T* gp = parent_grad(node, 0);
    const auto& p = parent_data(node, 0);
    const T g = node.grad[0] / static_cast<T>(b);
    for (std::size_t i = 0; i < b; ++i) {
      const std::size_t j = i * classes + static_cast<std::size_t>(y[i]);
      if (static_cast<double>(p[j]) >= kProbabilityFloor) gp[j] -= g / p[j];
    }
  });
}

// ---------------------------------------------------------------------------

#define SYD_INSTANTIATE_OPS(T)                                                                         \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                       \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                          \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                          \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                          \
  template Tensor<T> scale(const Tensor<T>&, T);                                                       \
  template Tensor<T> tanh(const Tensor<T>&);                                                           \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                        \
  template Tensor<T> relu(const Tensor<T>&);                                                           \
  template Tensor<T> softmax(const Tensor<T>&, std::size_t);                                           \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                                 \
  template Tensor<T> flatten(const Tensor<T>&, std::size_t);                                           \
  template Tensor<T> concat(std::span<const Tensor<T>>, std::size_t);                                  \
  template Tensor<T> sum(const Tensor<T>&, std::size_t, bool);                                         \
  template Tensor<T> mean(const Tensor<T>&, std::size_t, bool);                                        \
  template Tensor<T> max(const Tensor<T>&, std::size_t, bool);                                         \
  template Tensor<T> sum_all(const Tensor<T>&);                                                        \
  template Tensor<T> global_avg_pool(const Tensor<T>&, PoolOver);                                      \
  template Tensor<T> global_max_pool(const Tensor<T>&, PoolOver);                                      \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, std::size_t, std::size_t);             \
  template Tensor<T> bilinear_crop_resize(const Tensor<T>&, const Region&, std::size_t, std::size_t);  \
  template struct BatchNorm<T>;                                                                        \
  template Tensor<T> batch_norm(const Tensor<T>&, BatchNorm<T>&, bool);                                \
  template Tensor<T> gaussian_dropout(const Tensor<T>&, double, bool, Rng&);                           \
  template Tensor<T> dropout(const Tensor<T>&, double, bool, Rng&);                                    \
  template Tensor<T> cross_entropy(const Tensor<T>&, std::span<const int>);

SYD_INSTANTIATE_OPS(float)
SYD_INSTANTIATE_OPS(double)

}  // namespace syd
