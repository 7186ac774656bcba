// Copyright 2026 The tabret Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "tabret/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "tabret/kernels.hpp"

namespace tabret {

// ---- Var ------------------------------------------------------------------

template <typename T>
const Shape& Var<T>::shape() const {
  return tape_->shape(id_);
}

template <typename T>
size_t Var<T>::numel() const {
  return tabret::numel(shape());
}

template <typename T>
std::span<const T> Var<T>::value() const {
  return tape_->value(id_);
}

template <typename T>
std::span<const T> Var<T>::grad() const {
  return tape_->grad(id_);
}

template <typename T>
T Var<T>::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return value()[0];
}

template <typename T>
Tensor<T> Var<T>::to_tensor() const {
  auto v = value();
  return Tensor<T>(shape(), std::vector<T>(v.begin(), v.end()));
}

// ---- Tape -----------------------------------------------------------------

template <typename T>
Var<T> Tape<T>::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var<T>(this, static_cast<uint32_t>(nodes_.size() - 1));
}

template <typename T>
Var<T> Tape<T>::param(Tensor<T>& p) {
  auto it = param_ids_.find(&p);
  if (it != param_ids_.end()) return Var<T>(this, it->second);
  if (p.data.size() != tabret::numel(p.shape)) throw ShapeError("parameter data does not match its shape");
  Node n;
  n.shape = p.shape;
  n.param = &p;
  n.requires_grad = p.requires_grad;
  Var<T> v = push(std::move(n));
  param_ids_.emplace(&p, v.id());
  return v;
}

template <typename T>
Var<T> Tape<T>::constant(Tensor<T> value) {
  Node n;
  n.shape = std::move(value.shape);
  n.value = std::move(value.data);
  return push(std::move(n));
}

template <typename T>
Var<T> Tape<T>::variable(Tensor<T> value) {
  Node n;
  n.shape = std::move(value.shape);
  n.value = std::move(value.data);
  n.requires_grad = true;
  return push(std::move(n));
}

template <typename T>
Var<T> Tape<T>::record(Shape shape, std::vector<T> value, std::initializer_list<Var<T>> inputs, BackwardFn fn) {
  return record(std::move(shape), std::move(value), std::span<const Var<T>>(inputs.begin(), inputs.size()),
                std::move(fn));
}

template <typename T>
Var<T> Tape<T>::record(Shape shape, std::vector<T> value, std::span<const Var<T>> inputs, BackwardFn fn) {
  Node n;
  n.shape = std::move(shape);
  n.value = std::move(value);
  for (const auto& in : inputs) {
    if (&in.tape() != this) throw std::logic_error("operation mixes variables from different tapes");
    n.requires_grad = n.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(fn);
  return push(std::move(n));
}

template <typename T>
std::span<const T> Tape<T>::value(uint32_t id) const {
  const Node& n = nodes_[id];
  return n.param ? std::span<const T>(n.param->data) : std::span<const T>(n.value);
}

template <typename T>
std::span<const T> Tape<T>::grad(uint32_t id) const {
  const Node& n = nodes_[id];
  return n.param ? std::span<const T>(n.param->grad) : std::span<const T>(n.grad);
}

template <typename T>
std::span<T> Tape<T>::grad_buffer(uint32_t id) {
  Node& n = nodes_[id];
  std::vector<T>& g = n.param ? n.param->grad : n.grad;
  if (g.size() != tabret::numel(n.shape)) g.assign(tabret::numel(n.shape), T(0));
  return g;
}

template <typename T>
void Tape<T>::backward(Var<T> root) {
  if (&root.tape() != this) throw std::logic_error("backward root belongs to another tape");
  if (!nodes_[root.id()].requires_grad) return;
  auto seed = grad_buffer(root.id());
  std::fill(seed.begin(), seed.end(), T(1));
  for (int64_t id = root.id(); id >= 0; --id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
    n.backward(*this, static_cast<uint32_t>(id));
  }
}

template <typename T>
void Tape<T>::clear() {
  nodes_.clear();
  param_ids_.clear();
}

template class Var<float>;
template class Var<double>;
template class Tape<float>;
template class Tape<double>;

// ---- ops ------------------------------------------------------------------

namespace ag {

namespace {

template <typename T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

template <typename T>
void require_2d(const Var<T>& a, const char* op) {
  if (a.shape().size() != 2) throw ShapeError(std::string(op) + ": expected a 2-D tensor, got " + shape_str(a.shape()));
}

template <typename T>
std::vector<T> copy_of(std::span<const T> s) {
  return std::vector<T>(s.begin(), s.end());
}

// Adds src into the gradient of `id` when that node wants one.
template <typename T>
void accumulate(Tape<T>& t, uint32_t id, std::span<const T> src) {
  if (!t.requires_grad(id)) return;
  auto g = t.grad_buffer(id);
  for (size_t i = 0; i < g.size(); ++i) g[i] += src[i];
}

}  // namespace

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  require_same_shape(a, b, "add");
  auto av = a.value();
  auto bv = b.value();
  std::vector<T> out(av.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  const uint32_t ia = a.id(), ib = b.id();
  return a.tape().record(a.shape(), std::move(out), {a, b}, [ia, ib](Tape<T>& t, uint32_t self) {
    auto g = t.grad(self);
    accumulate(t, ia, g);
    accumulate(t, ib, g);
  });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  require_same_shape(a, b, "sub");
  auto av = a.value();
  auto bv = b.value();
  std::vector<T> out(av.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  const uint32_t ia = a.id(), ib = b.id();
  return a.tape().record(a.shape(), std::move(out), {a, b}, [ia, ib](Tape<T>& t, uint32_t self) {
    auto g = t.grad(self);
    accumulate(t, ia, g);
    if (t.requires_grad(ib)) {
      auto gb = t.grad_buffer(ib);
      for (size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
    }
  });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  require_same_shape(a, b, "mul");
  auto av = a.value();
  auto bv = b.value();
  std::vector<T> out(av.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  const uint32_t ia = a.id(), ib = b.id();
  return a.tape().record(a.shape(), std::move(out), {a, b}, [ia, ib](Tape<T>& t, uint32_t self) {
    auto g = t.grad(self);
    auto av = t.value(ia);
    auto bv = t.value(ib);
    if (t.requires_grad(ia)) {
      auto ga = t.grad_buffer(ia);
      for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.requires_grad(ib)) {
      auto gb = t.grad_buffer(ib);
      for (size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

template <typename T>
Var<T> scale(Var<T> a, T s) {
  auto av = a.value();
  std::vector<T> out(av.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = av[i] * s;
  const uint32_t ia = a.id();
  return a.tape().record(a.shape(), std::move(out), {a}, [ia, s](Tape<T>& t, uint32_t self) {
    auto g = t.grad(self);
    auto ga = t.grad_buffer(ia);
    kernels::table<T>().axpy(s, g.data(), ga.data(), g.size());
  });
}

template <typename T>
Var<T> add_bias(Var<T> x, Var<T> b) {
  require_2d(x, "add_bias");
  const size_t m = x.rows(), n = x.cols();
  if (b.numel() != n) throw ShapeError("add_bias: bias of shape " + shape_str(b.shape()) + " for " + shape_str(x.shape()));
  auto xv = x.value();
  auto bv = b.value();
  std::vector<T> out(xv.begin(), xv.end());
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < n; ++j) out[i * n + j] += bv[j];
  const uint32_t ix = x.id(), ib = b.id();
  return x.tape().record(x.shape(), std::move(out), {x, b}, [ix, ib, m, n](Tape<T>& t, uint32_t self) {
    auto g = t.grad(self);
    accumulate(t, ix, g);
    if (t.requires_grad(ib)) {
      auto gb = t.grad_buffer(ib);
      for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
    }
  });
}

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  const size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) throw ShapeError("matmul: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  std::vector<T> out(m * n);
  kernels::table<T>().gemm_nn(a.value().data(), b.value().data(), out.data(), m, k, n, false);
  const uint32_t ia = a.id(), ib = b.id();
  return a.tape().record({m, n}, std::move(out), {a, b}, [ia, ib, m, k, n](Tape<T>& t, uint32_t self) {
    auto g = t.grad(self);
    const auto& K = kernels::table<T>();
    // dA = G B^T, dB = A^T G
    if (t.requires_grad(ia)) K.gemm_nt(g.data(), t.value(ib).data(), t.grad_buffer(ia).data(), m, n, k, true);
    if (t.requires_grad(ib)) K.gemm_tn(t.value(ia).data(), g.data(), t.grad_buffer(ib).data(), k, m, n, true);
  });
}

template <typename T>
Var<T> matmul_nt(Var<T> a, Var<T> b) {
  require_2d(a, "matmul_nt");
  require_2d(b, "matmul_nt");
  const size_t m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) throw ShapeError("matmul_nt: " + shape_str(a.shape()) + " x " + shape_str(b.shape()) + "^T");
  std::vector<T> out(m * n);
  kernels::table<T>().gemm_nt(a.value().data(), b.value().data(), out.data(), m, k, n, false);
  const uint32_t ia = a.id(), ib = b.id();
  return a.tape().record({m, n}, std::move(out), {a, b}, [ia, ib, m, k, n](Tape<T>& t, uint32_t self) {
    auto g = t.grad(self);
    const auto& K = kernels::table<T>();
    // dA = G B, dB = G^T A
    if (t.requires_grad(ia)) K.gemm_nn(g.data(), t.value(ib).data(), t.grad_buffer(ia).data(), m, n, k, true);
    if (t.requires_grad(ib)) K.gemm_tn(g.data(), t.value(ia).data(), t.grad_buffer(ib).data(), n, m, k, true);
  });
}

template <typename T>
Var<T> transpose(Var<T> a) {
  require_2d(a, "transpose");
  const size_t m = a.rows(), n = a.cols();
  auto av = a.value();
  std::vector<T> out(m * n);
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  const uint32_t ia = a.id();
  return a.tape().record({n, m}, std::move(out), {a}, [ia, m, n](Tape<T>& t, uint32_t self) {
    auto g = t.grad(self);
    auto ga = t.grad_buffer(ia);
    for (size_t i = 0; i < m; ++i)
      for (size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
  });
}

template <typename T>
Var<T> concat(std::span<const Var<T>> parts, size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  if (axis > 1) throw ShapeError("concat: axis must be 0 or 1");
  for (const auto& p : parts) require_2d(p, "concat");
  const size_t other = axis == 0 ? parts[0].cols() : parts[0].rows();
  size_t total = 0;
  for (const auto& p : parts) {
    if ((axis == 0 ? p.cols() : p.rows()) != other) throw ShapeError("concat: incompatible shapes");
    total += axis == 0 ? p.rows() : p.cols();
  }
  const size_t rows = axis == 0 ? total : other;
  const size_t cols = axis == 0 ? other : total;
  std::vector<T> out(rows * cols);
  std::vector<uint32_t> ids;
  std::vector<size_t> extents;
  size_t offset = 0;
  for (const auto& p : parts) {
    auto v = p.value();
    if (axis == 0) {
      std::copy(v.begin(), v.end(), out.begin() + static_cast<std::ptrdiff_t>(offset * cols));
      extents.push_back(p.rows());
    } else {
      const size_t w = p.cols();
      for (size_t i = 0; i < rows; ++i)
        std::copy(v.begin() + static_cast<std::ptrdiff_t>(i * w), v.begin() + static_cast<std::ptrdiff_t>((i + 1) * w),
                  out.begin() + static_cast<std::ptrdiff_t>(i * cols + offset));
      extents.push_back(w);
    }
    offset += extents.back();
    ids.push_back(p.id());
  }
  return parts[0].tape().record(
      {rows, cols}, std::move(out), parts,
      [ids = std::move(ids), extents = std::move(extents), axis, rows, cols](Tape<T>& t, uint32_t self) {
        auto g = t.grad(self);
        size_t off = 0;
        for (size_t p = 0; p < ids.size(); ++p) {
          const size_t e = extents[p];
          if (t.requires_grad(ids[p])) {
            auto gp = t.grad_buffer(ids[p]);
            if (axis == 0) {
              for (size_t i = 0; i < e * cols; ++i) gp[i] += g[off * cols + i];
            } else {
              for (size_t i = 0; i < rows; ++i)
                for (size_t j = 0; j < e; ++j) gp[i * e + j] += g[i * cols + off + j];
            }
          }
          off += e;
        }
      });
}

template <typename T>
Var<T> slice(Var<T> a, size_t axis, size_t start, size_t len) {
  require_2d(a, "slice");
  if (axis > 1) throw ShapeError("slice: axis must be 0 or 1");
  const size_t m = a.rows(), n = a.cols();
  const size_t extent = axis == 0 ? m : n;
  if (start + len > extent) throw ShapeError("slice: range out of bounds for " + shape_str(a.shape()));
  auto av = a.value();
  const size_t rows = axis == 0 ? len : m;
  const size_t cols = axis == 0 ? n : len;
  std::vector<T> out(rows * cols);
  for (size_t i = 0; i < rows; ++i)
    for (size_t j = 0; j < cols; ++j)
      out[i * cols + j] = axis == 0 ? av[(start + i) * n + j] : av[i * n + start + j];
  const uint32_t ia = a.id();
  return a.tape().record({rows, cols}, std::move(out), {a}, [ia, axis, start, rows, cols, n](Tape<T>& t, uint32_t self) {
    auto g = t.grad(self);
    auto ga = t.grad_buffer(ia);
    for (size_t i = 0; i < rows; ++i)
      for (size_t j = 0; j < cols; ++j) {
        const size_t src = axis == 0 ? (start + i) * n + j : i * n + start + j;
        ga[src] += g[i * cols + j];
      }
  });
}

template <typename T>
Var<T> sum(Var<T> a) {
  T s = 0;
  for (T v : a.value()) s += v;
  const uint32_t ia = a.id();
  return a.tape().record({1}, {s}, {a}, [ia](Tape<T>& t, uint32_t self) {
    const T g = t.grad(self)[0];
    auto ga = t.grad_buffer(ia);
    for (auto& v : ga) v += g;
  });
}

template <typename T>
Var<T> softmax_masked(Var<T> scores, std::optional<Var<T>> additive_term) {
  const Shape& shape = scores.shape();
  if (shape.empty()) throw ShapeError("softmax_masked: scalar input");
  const size_t width = shape.back();
  const size_t total = scores.numel();
  const size_t rows = width == 0 ? 0 : total / width;
  size_t term_size = 0;
  if (additive_term) {
    const Shape& ts = additive_term->shape();
    term_size = additive_term->numel();
    bool trailing = ts.size() <= shape.size() && std::equal(ts.rbegin(), ts.rend(), shape.rbegin());
    if (!trailing || term_size == 0) {
      throw ShapeError("softmax_masked: term " + shape_str(ts) + " does not broadcast to " + shape_str(shape));
    }
  }
  auto sv = scores.value();
  std::span<const T> tv = additive_term ? additive_term->value() : std::span<const T>();
  std::vector<T> out(total);
  for (size_t r = 0; r < rows; ++r) {
    T* o = out.data() + r * width;
    const T* s = sv.data() + r * width;
    T mx = -std::numeric_limits<T>::infinity();
    for (size_t j = 0; j < width; ++j) {
      T z = s[j];
      if (additive_term) z += tv[(r * width + j) % term_size];
      o[j] = z;
      mx = std::max(mx, z);
    }
    if (mx == -std::numeric_limits<T>::infinity()) {
      throw std::domain_error("softmax_masked: row " + std::to_string(r) + " is entirely masked");
    }
    T denom = 0;
    for (size_t j = 0; j < width; ++j) {
      o[j] = std::exp(o[j] - mx);
      denom += o[j];
    }
    const T inv = T(1) / denom;
    for (size_t j = 0; j < width; ++j) o[j] *= inv;
  }
  const uint32_t is = scores.id();
  const uint32_t it = additive_term ? additive_term->id() : 0;
  const bool has_term = additive_term.has_value();
  std::vector<Var<T>> inputs{scores};
  if (additive_term) inputs.push_back(*additive_term);
  return scores.tape().record(
      shape, std::move(out), inputs, [is, it, has_term, rows, width, term_size](Tape<T>& t, uint32_t self) {
        auto g = t.grad(self);
        auto p = t.value(self);
        std::vector<T> dz(rows * width);
        for (size_t r = 0; r < rows; ++r) {
          const T* pr = p.data() + r * width;
          const T* gr = g.data() + r * width;
          T dotp = 0;
          for (size_t j = 0; j < width; ++j) dotp += pr[j] * gr[j];
          for (size_t j = 0; j < width; ++j) dz[r * width + j] = pr[j] * (gr[j] - dotp);
        }
        accumulate(t, is, std::span<const T>(dz));
        if (has_term && t.requires_grad(it)) {
          auto gt = t.grad_buffer(it);
          for (size_t k = 0; k < dz.size(); ++k) gt[k % term_size] += dz[k];
        }
      });
}

template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> offset, T epsilon) {
  if (!(epsilon > 0)) throw std::invalid_argument("layer_norm: epsilon must be > 0");
  const Shape& shape = x.shape();
  if (shape.empty()) throw ShapeError("layer_norm: scalar input");
  const size_t n = shape.back();
  const size_t rows = n == 0 ? 0 : x.numel() / n;
  if (gain.numel() != n || offset.numel() != n) throw ShapeError("layer_norm: gain/offset size mismatch");
  auto xv = x.value();
  auto gv = gain.value();
  auto bv = offset.value();
  std::vector<T> out(x.numel());
  std::vector<T> xhat(x.numel());
  std::vector<T> rstd(rows);
  for (size_t r = 0; r < rows; ++r) {
    const T* xr = xv.data() + r * n;
    T mean = 0;
    for (size_t j = 0; j < n; ++j) mean += xr[j];
    mean /= static_cast<T>(n);
    T var = 0;
    for (size_t j = 0; j < n; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= static_cast<T>(n);
    rstd[r] = T(1) / std::sqrt(var + epsilon);
    for (size_t j = 0; j < n; ++j) {
      xhat[r * n + j] = (xr[j] - mean) * rstd[r];
      out[r * n + j] = xhat[r * n + j] * gv[j] + bv[j];
    }
  }
  const uint32_t ix = x.id(), ig = gain.id(), ib = offset.id();
  return x.tape().record(
      shape, std::move(out), {x, gain, offset},
      [ix, ig, ib, rows, n, xhat = std::move(xhat), rstd = std::move(rstd)](Tape<T>& t, uint32_t self) {
        auto g = t.grad(self);
        auto gv = t.value(ig);
        if (t.requires_grad(ig)) {
          auto gg = t.grad_buffer(ig);
          for (size_t r = 0; r < rows; ++r)
            for (size_t j = 0; j < n; ++j) gg[j] += g[r * n + j] * xhat[r * n + j];
        }
        if (t.requires_grad(ib)) {
          auto gb = t.grad_buffer(ib);
          for (size_t r = 0; r < rows; ++r)
            for (size_t j = 0; j < n; ++j) gb[j] += g[r * n + j];
        }
        if (t.requires_grad(ix)) {
          auto gx = t.grad_buffer(ix);
          const T inv_n = T(1) / static_cast<T>(n);
          for (size_t r = 0; r < rows; ++r) {
            T sum_d = 0, sum_dx = 0;
            for (size_t j = 0; j < n; ++j) {
              const T d = g[r * n + j] * gv[j];
              sum_d += d;
              sum_dx += d * xhat[r * n + j];
            }
            for (size_t j = 0; j < n; ++j) {
              const T d = g[r * n + j] * gv[j];
              gx[r * n + j] += rstd[r] * (d - inv_n * sum_d - xhat[r * n + j] * inv_n * sum_dx);
            }
          }
        }
      });
}

template <typename T>
Var<T> gelu(Var<T> x) {
  auto xv = x.value();
  std::vector<T> out(xv.size());
  const T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
  for (size_t i = 0; i < out.size(); ++i) out[i] = T(0.5) * xv[i] * (T(1) + std::erf(xv[i] * inv_sqrt2));
  const uint32_t ix = x.id();
  return x.tape().record(x.shape(), std::move(out), {x}, [ix, inv_sqrt2](Tape<T>& t, uint32_t self) {
    auto g = t.grad(self);
    auto xv = t.value(ix);
    auto gx = t.grad_buffer(ix);
    const T inv_sqrt_2pi = inv_sqrt2 * std::numbers::inv_sqrtpi_v<T>;
    for (size_t i = 0; i < gx.size(); ++i) {
      const T cdf = T(0.5) * (T(1) + std::erf(xv[i] * inv_sqrt2));
      const T pdf = inv_sqrt_2pi * std::exp(T(-0.5) * xv[i] * xv[i]);
      gx[i] += g[i] * (cdf + xv[i] * pdf);
    }
  });
}

template <typename T>
Var<T> embedding_lookup(Var<T> table, std::span<const int> ids) {
  require_2d(table, "embedding_lookup");
  const size_t vocab = table.rows(), h = table.cols();
  auto tv = table.value();
  std::vector<T> out(ids.size() * h);
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<size_t>(ids[i]) >= vocab) {
      throw std::out_of_range("embedding_lookup: id " + std::to_string(ids[i]) + " outside table of " +
                              std::to_string(vocab) + " rows");
    }
    std::copy_n(tv.begin() + static_cast<std::ptrdiff_t>(static_cast<size_t>(ids[i]) * h), h,
                out.begin() + static_cast<std::ptrdiff_t>(i * h));
  }
  const uint32_t itab = table.id();
  return table.tape().record(
      {ids.size(), h}, std::move(out), {table},
      [itab, h, idv = std::vector<int>(ids.begin(), ids.end())](Tape<T>& t, uint32_t self) {
        auto g = t.grad(self);
        auto gt = t.grad_buffer(itab);
        for (size_t i = 0; i < idv.size(); ++i) {
          const size_t row = static_cast<size_t>(idv[i]) * h;
          for (size_t j = 0; j < h; ++j) gt[row + j] += g[i * h + j];
        }
      });
}

template <typename T>
Var<T> gather(Var<T> src, std::span<const uint32_t> indices, Shape shape) {
  if (tabret::numel(shape) != indices.size()) throw ShapeError("gather: index count does not match output shape");
  auto sv = src.value();
  std::vector<T> out(indices.size());
  for (size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= sv.size()) throw std::out_of_range("gather: index out of range");
    out[k] = sv[indices[k]];
  }
  const uint32_t is = src.id();
  return src.tape().record(
      std::move(shape), std::move(out), {src},
      [is, idx = std::vector<uint32_t>(indices.begin(), indices.end())](Tape<T>& t, uint32_t self) {
        auto g = t.grad(self);
        auto gs = t.grad_buffer(is);
        for (size_t k = 0; k < idx.size(); ++k) gs[idx[k]] += g[k];
      });
}

template <typename T>
Var<T> dropout(Var<T> x, T p, bool training, Rng& rng) {
  if (p < 0 || p >= 1) throw std::invalid_argument("dropout: p must be in [0, 1)");
  if (!training || p == 0) return x;
  const T keep_scale = T(1) / (T(1) - p);
  std::bernoulli_distribution keep(1.0 - static_cast<double>(p));
  std::vector<T> mask(x.numel());
  for (auto& m : mask) m = keep(rng) ? keep_scale : T(0);
  auto xv = x.value();
  std::vector<T> out(xv.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * mask[i];
  const uint32_t ix = x.id();
  return x.tape().record(x.shape(), std::move(out), {x}, [ix, mask = std::move(mask)](Tape<T>& t, uint32_t self) {
    auto g = t.grad(self);
    auto gx = t.grad_buffer(ix);
    for (size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * mask[i];
  });
}

template <typename T>
Var<T> contrastive_nll(Var<T> sim) {
  require_2d(sim, "contrastive_nll");
  const size_t b = sim.rows(), n = sim.cols();
  if (b == 0) throw std::invalid_argument("contrastive_nll: empty batch");
  if (n < b) throw ShapeError("contrastive_nll: need at least as many columns as rows");
  auto sv = sim.value();
  std::vector<T> probs(b * n);
  T loss = 0;
  for (size_t i = 0; i < b; ++i) {
    const T* row = sv.data() + i * n;
    T mx = *std::max_element(row, row + n);
    T denom = 0;
    for (size_t j = 0; j < n; ++j) denom += std::exp(row[j] - mx);
    const T lse = mx + std::log(denom);
    loss += lse - row[i];
    for (size_t j = 0; j < n; ++j) probs[i * n + j] = std::exp(row[j] - lse);
  }
  loss /= static_cast<T>(b);
  const uint32_t is = sim.id();
  return sim.tape().record({1}, {loss}, {sim}, [is, b, n, probs = std::move(probs)](Tape<T>& t, uint32_t self) {
    const T g = t.grad(self)[0] / static_cast<T>(b);
    auto gs = t.grad_buffer(is);
    for (size_t i = 0; i < b; ++i)
      for (size_t j = 0; j < n; ++j) gs[i * n + j] += g * (probs[i * n + j] - (i == j ? T(1) : T(0)));
  });
}

#define TABRET_INSTANTIATE_OPS(T)                                                      \
  template Var<T> add(Var<T>, Var<T>);                                                 \
  template Var<T> sub(Var<T>, Var<T>);                                                 \
  template Var<T> mul(Var<T>, Var<T>);                                                 \
  template Var<T> scale(Var<T>, T);                                                    \
  template Var<T> add_bias(Var<T>, Var<T>);                                            \
  template Var<T> matmul(Var<T>, Var<T>);                                              \
  template Var<T> matmul_nt(Var<T>, Var<T>);                                           \
  template Var<T> transpose(Var<T>);                                                   \
  template Var<T> concat(std::span<const Var<T>>, size_t);                             \
  template Var<T> slice(Var<T>, size_t, size_t, size_t);                               \
  template Var<T> sum(Var<T>);                                                         \
  template Var<T> softmax_masked(Var<T>, std::optional<Var<T>>);                       \
  template Var<T> layer_norm(Var<T>, Var<T>, Var<T>, T);                               \
  template Var<T> gelu(Var<T>);                                                        \
  template Var<T> embedding_lookup(Var<T>, std::span<const int>);                      \
  template Var<T> gather(Var<T>, std::span<const uint32_t>, Shape);                    \
  template Var<T> dropout(Var<T>, T, bool, Rng&);                                      \
  template Var<T> contrastive_nll(Var<T>);

TABRET_INSTANTIATE_OPS(float)
TABRET_INSTANTIATE_OPS(double)

#undef TABRET_INSTANTIATE_OPS

}  // namespace ag

}  // namespace tabret
