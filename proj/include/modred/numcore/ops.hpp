/*
 * Copyright 2026 The modred Authors
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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "modred/numcore/tensor.hpp"

namespace modred::nc {

namespace detail {

inline Node& parent(Node& self, std::size_t k) { return *self.parents[k]; }

// Accumulates fn(i) into parent k's gradient if that parent is differentiable.
template <class Fn>
void accumulate(Node& self, std::size_t k, Fn&& fn) {
  Node& p = parent(self, k);
  if (!p.requires_grad) return;
  p.ensure_grad();
  for (std::size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += fn(i);
}

inline void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

inline void require_matrix(const char* op, const Tensor& a) {
  if (a.rank() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_str(a.shape()));
}

inline std::size_t last_dim(const char* op, const Tensor& a) {
  if (a.rank() == 0) throw ShapeError(std::string(op) + ": scalar input");
  return a.shape().back();
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::require_same_shape("add", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return Tensor::make_result("add", a.shape(), std::move(out), {a, b}, [](detail::Node& s) {
    detail::accumulate(s, 0, [&](std::size_t i) { return s.grad[i]; });
    detail::accumulate(s, 1, [&](std::size_t i) { return s.grad[i]; });
  });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::require_same_shape("sub", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return Tensor::make_result("sub", a.shape(), std::move(out), {a, b}, [](detail::Node& s) {
    detail::accumulate(s, 0, [&](std::size_t i) { return s.grad[i]; });
    detail::accumulate(s, 1, [&](std::size_t i) { return -s.grad[i]; });
  });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::require_same_shape("mul", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return Tensor::make_result("mul", a.shape(), std::move(out), {a, b}, [](detail::Node& s) {
    const auto& av = detail::parent(s, 0).data;
    const auto& bv = detail::parent(s, 1).data;
    detail::accumulate(s, 0, [&](std::size_t i) { return s.grad[i] * bv[i]; });
    detail::accumulate(s, 1, [&](std::size_t i) { return s.grad[i] * av[i]; });
  });
}

inline Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * factor;
  return Tensor::make_result("scale", a.shape(), std::move(out), {a}, [factor](detail::Node& s) {
    detail::accumulate(s, 0, [&](std::size_t i) { return s.grad[i] * factor; });
  });
}

inline Tensor square(const Tensor& a) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * a.data()[i];
  return Tensor::make_result("square", a.shape(), std::move(out), {a}, [](detail::Node& s) {
    const auto& av = detail::parent(s, 0).data;
    detail::accumulate(s, 0, [&](std::size_t i) { return 2.0 * av[i] * s.grad[i]; });
  });
}

inline Tensor abs(const Tensor& a) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::abs(a.data()[i]);
  return Tensor::make_result("abs", a.shape(), std::move(out), {a}, [](detail::Node& s) {
    const auto& av = detail::parent(s, 0).data;
    detail::accumulate(s, 0, [&](std::size_t i) {
      return av[i] > 0 ? s.grad[i] : (av[i] < 0 ? -s.grad[i] : 0.0);
    });
  });
}

// Adds a vector of length m to every row of a (..., m) tensor.
inline Tensor add_rowwise(const Tensor& a, const Tensor& row) {
  const std::size_t m = detail::last_dim("add_rowwise", a);
  if (row.rank() != 1 || row.dim(0) != m) {
    throw ShapeError("add_rowwise: row of shape " + shape_str(row.shape()) + " vs " + shape_str(a.shape()));
  }
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + row.data()[i % m];
  return Tensor::make_result("add_rowwise", a.shape(), std::move(out), {a, row}, [m](detail::Node& s) {
    detail::accumulate(s, 0, [&](std::size_t i) { return s.grad[i]; });
    detail::Node& r = detail::parent(s, 1);
    if (r.requires_grad) {
      r.ensure_grad();
      for (std::size_t i = 0; i < s.grad.size(); ++i) r.grad[i % m] += s.grad[i];
    }
  });
}

inline Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  return Tensor::make_result("sum", {}, {acc}, {a}, [](detail::Node& s) {
    const double g = s.grad[0];
    detail::accumulate(s, 0, [g](std::size_t) { return g; });
  });
}

inline Tensor mean(const Tensor& a) {
  const double n = static_cast<double>(a.numel());
  return scale(sum(a), 1.0 / n);
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  detail::require_matrix("matmul", a);
  detail::require_matrix("matmul", b);
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: inner extents differ " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  std::vector<double> out(n * m, 0.0);
  const auto av = a.data();
  const auto bv = b.data();
  for (std::size_t i = 0; i < n; ++i) {
    double* orow = out.data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      const double* brow = bv.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += aip * brow[j];
    }
  }
  return Tensor::make_result("matmul", {n, m}, std::move(out), {a, b}, [n, k, m](detail::Node& s) {
    detail::Node& pa = detail::parent(s, 0);
    detail::Node& pb = detail::parent(s, 1);
    const auto& g = s.grad;
    if (pa.requires_grad) {
      pa.ensure_grad();
      // dA = dC * B^T
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          const double* brow = pb.data.data() + p * m;
          const double* grow = g.data() + i * m;
          for (std::size_t j = 0; j < m; ++j) acc += grow[j] * brow[j];
          pa.grad[i * k + p] += acc;
        }
      }
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      // dB = A^T * dC
      for (std::size_t i = 0; i < n; ++i) {
        const double* grow = g.data() + i * m;
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = pa.data[i * k + p];
          double* bg = pb.grad.data() + p * m;
          for (std::size_t j = 0; j < m; ++j) bg[j] += aip * grow[j];
        }
      }
    }
  });
}

inline Tensor transpose(const Tensor& a) {
  detail::require_matrix("transpose", a);
  const std::size_t n = a.dim(0), m = a.dim(1);
  std::vector<double> out(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[j * n + i] = a.data()[i * m + j];
  return Tensor::make_result("transpose", {m, n}, std::move(out), {a}, [n, m](detail::Node& s) {
    detail::accumulate(s, 0, [&](std::size_t idx) {
      const std::size_t i = idx / m, j = idx % m;
      return s.grad[j * n + i];
    });
  });
}

// x (n, in) @ weight (in, out) + bias (out). An undefined bias is skipped.
inline Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias = Tensor()) {
  Tensor y = matmul(x, weight);
  return bias.defined() ? add_rowwise(y, bias) : y;
}

inline Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw ShapeError("reshape: " + shape_str(a.shape()) + " to " + shape_str(shape));
  }
  return Tensor::make_result("reshape", std::move(shape), a.values(), {a}, [](detail::Node& s) {
    detail::accumulate(s, 0, [&](std::size_t i) { return s.grad[i]; });
  });
}

// Exact (erf) form: 0.5 x (1 + erf(x / sqrt 2)).
inline Tensor gelu(const Tensor& a) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = a.data()[i];
    out[i] = 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  }
  return Tensor::make_result("gelu", a.shape(), std::move(out), {a}, [](detail::Node& s) {
    const auto& av = detail::parent(s, 0).data;
    detail::accumulate(s, 0, [&](std::size_t i) {
      const double x = av[i];
      const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
      const double pdf = std::exp(-0.5 * x * x) * std::numbers::inv_sqrtpi / std::numbers::sqrt2;
      return s.grad[i] * (cdf + x * pdf);
    });
  });
}

inline Tensor relu(const Tensor& a) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, a.data()[i]);
  return Tensor::make_result("relu", a.shape(), std::move(out), {a}, [](detail::Node& s) {
    const auto& av = detail::parent(s, 0).data;
    detail::accumulate(s, 0, [&](std::size_t i) { return av[i] > 0.0 ? s.grad[i] : 0.0; });
  });
}

// Softmax along the last axis; axis must name it (-1 or rank-1).
inline Tensor softmax(const Tensor& a, int axis = -1) {
  const std::size_t d = detail::last_dim("softmax", a);
  const int r = static_cast<int>(a.rank());
  if (axis != -1 && axis != r - 1) throw ShapeError("softmax: only the last axis is supported");
  const std::size_t rows = a.numel() / d;
  std::vector<double> out(a.numel());
  for (std::size_t row = 0; row < rows; ++row) {
    const double* x = a.data().data() + row * d;
    double* y = out.data() + row * d;
    const double mx = *std::max_element(x, x + d);
    double z = 0.0;
    for (std::size_t j = 0; j < d; ++j) z += (y[j] = std::exp(x[j] - mx));
    for (std::size_t j = 0; j < d; ++j) y[j] /= z;
  }
  auto y_saved = out;
  return Tensor::make_result("softmax", a.shape(), std::move(out), {a},
                             [d, rows, y = std::move(y_saved)](detail::Node& s) {
    detail::Node& p = detail::parent(s, 0);
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t row = 0; row < rows; ++row) {
      const double* yr = y.data() + row * d;
      const double* gr = s.grad.data() + row * d;
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) dot += gr[j] * yr[j];
      for (std::size_t j = 0; j < d; ++j) p.grad[row * d + j] += yr[j] * (gr[j] - dot);
    }
  });
}

// Normalizes every length-d row to zero mean and unit (biased) variance,
// then applies gamma * xhat + beta.
inline Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const std::size_t d = detail::last_dim("layer_norm", x);
  if (gamma.rank() != 1 || gamma.dim(0) != d || beta.rank() != 1 || beta.dim(0) != d) {
    throw ShapeError("layer_norm: gamma/beta must have shape (" + std::to_string(d) + ")");
  }
  if (eps < 0.0) throw ShapeError("layer_norm: eps must be non-negative");
  const std::size_t rows = x.numel() / d;
  std::vector<double> out(x.numel()), xhat(x.numel()), inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data().data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += xr[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std[r] = inv;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (xr[j] - mu) * inv;
      xhat[r * d + j] = h;
      out[r * d + j] = h * gamma.data()[j] + beta.data()[j];
    }
  }
  return Tensor::make_result(
      "layer_norm", x.shape(), std::move(out), {x, gamma, beta},
      [d, rows, xhat = std::move(xhat), inv_std = std::move(inv_std)](detail::Node& s) {
        detail::Node& px = detail::parent(s, 0);
        detail::Node& pg = detail::parent(s, 1);
        detail::Node& pb = detail::parent(s, 2);
        const auto& g = s.grad;
        if (pg.requires_grad) {
          pg.ensure_grad();
          for (std::size_t i = 0; i < g.size(); ++i) pg.grad[i % d] += g[i] * xhat[i];
        }
        if (pb.requires_grad) {
          pb.ensure_grad();
          for (std::size_t i = 0; i < g.size(); ++i) pb.grad[i % d] += g[i];
        }
        if (px.requires_grad) {
          px.ensure_grad();
          const double inv_d = 1.0 / static_cast<double>(d);
          for (std::size_t r = 0; r < rows; ++r) {
            double m1 = 0.0, m2 = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
              const double dh = g[r * d + j] * pg.data[j];
              m1 += dh;
              m2 += dh * xhat[r * d + j];
            }
            m1 *= inv_d;
            m2 *= inv_d;
            for (std::size_t j = 0; j < d; ++j) {
              const double dh = g[r * d + j] * pg.data[j];
              px.grad[r * d + j] += inv_std[r] * (dh - m1 - xhat[r * d + j] * m2);
            }
          }
        }
      });
}

// Gathers rows of a matrix; indices may repeat (gradients add up).
inline Tensor take_rows(const Tensor& a, std::span<const std::size_t> idx) {
  detail::require_matrix("take_rows", a);
  const std::size_t n = a.dim(0), m = a.dim(1);
  std::vector<double> out(idx.size() * m);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= n) throw ShapeError("take_rows: index " + std::to_string(idx[r]) + " out of range");
    std::copy_n(a.data().data() + idx[r] * m, m, out.data() + r * m);
  }
  std::vector<std::size_t> ids(idx.begin(), idx.end());
  return Tensor::make_result("take_rows", {idx.size(), m}, std::move(out), {a},
                             [m, ids = std::move(ids)](detail::Node& s) {
    detail::Node& p = detail::parent(s, 0);
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t r = 0; r < ids.size(); ++r)
      for (std::size_t j = 0; j < m; ++j) p.grad[ids[r] * m + j] += s.grad[r * m + j];
  });
}

inline Tensor take_rows(const Tensor& a, std::initializer_list<std::size_t> idx) {
  return take_rows(a, std::span<const std::size_t>(idx.begin(), idx.size()));
}

// Rows [begin, end) of a matrix.
inline Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
  detail::require_matrix("slice_rows", a);
  if (begin > end || end > a.dim(0)) throw ShapeError("slice_rows: bad range");
  std::vector<std::size_t> idx(end - begin);
  std::iota(idx.begin(), idx.end(), begin);
  return take_rows(a, idx);
}

inline Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t m = parts[0].rank() == 2 ? parts[0].dim(1) : 0;
  std::size_t rows = 0;
  for (const auto& p : parts) {
    detail::require_matrix("concat_rows", p);
    if (p.dim(1) != m) throw ShapeError("concat_rows: column mismatch");
    rows += p.dim(0);
  }
  std::vector<double> out;
  out.reserve(rows * m);
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    offsets.push_back(out.size());
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  std::vector<Tensor> ps(parts.begin(), parts.end());
  return Tensor::make_result("concat_rows", {rows, m}, std::move(out), std::move(ps),
                             [offsets = std::move(offsets)](detail::Node& s) {
    for (std::size_t k = 0; k < s.parents.size(); ++k) {
      const std::size_t off = offsets[k];
      detail::accumulate(s, k, [&](std::size_t i) { return s.grad[off + i]; });
    }
  });
}

inline Tensor concat_rows(std::initializer_list<Tensor> parts) {
  return concat_rows(std::span<const Tensor>(parts.begin(), parts.size()));
}

inline Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t len) {
  detail::require_matrix("slice_cols", a);
  const std::size_t n = a.dim(0), m = a.dim(1);
  if (begin + len > m) throw ShapeError("slice_cols: range exceeds columns");
  std::vector<double> out(n * len);
  for (std::size_t i = 0; i < n; ++i)
    std::copy_n(a.data().data() + i * m + begin, len, out.data() + i * len);
  return Tensor::make_result("slice_cols", {n, len}, std::move(out), {a}, [n, m, begin, len](detail::Node& s) {
    detail::Node& p = detail::parent(s, 0);
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < len; ++j) p.grad[i * m + begin + j] += s.grad[i * len + j];
  });
}

inline Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  detail::require_matrix("concat_cols", parts[0]);
  const std::size_t n = parts[0].dim(0);
  std::size_t m = 0;
  std::vector<std::size_t> col_off;
  for (const auto& p : parts) {
    detail::require_matrix("concat_cols", p);
    if (p.dim(0) != n) throw ShapeError("concat_cols: row mismatch");
    col_off.push_back(m);
    m += p.dim(1);
  }
  std::vector<double> out(n * m);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const std::size_t w = parts[k].dim(1);
    for (std::size_t i = 0; i < n; ++i)
      std::copy_n(parts[k].data().data() + i * w, w, out.data() + i * m + col_off[k]);
  }
  std::vector<Tensor> ps(parts.begin(), parts.end());
  return Tensor::make_result("concat_cols", {n, m}, std::move(out), std::move(ps),
                             [n, m, col_off = std::move(col_off)](detail::Node& s) {
    for (std::size_t k = 0; k < s.parents.size(); ++k) {
      detail::Node& p = *s.parents[k];
      if (!p.requires_grad) continue;
      p.ensure_grad();
      const std::size_t w = p.shape[1];
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < w; ++j) p.grad[i * w + j] += s.grad[i * m + col_off[k] + j];
    }
  });
}

// Euclidean norm of each row of a matrix, shape (n). The gradient at a zero
// row is taken as zero (a subgradient of the norm).
inline Tensor row_norms(const Tensor& a) {
  detail::require_matrix("row_norms", a);
  const std::size_t n = a.dim(0), d = a.dim(1);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) acc += a.data()[i * d + j] * a.data()[i * d + j];
    out[i] = std::sqrt(acc);
  }
  auto norms = out;
  return Tensor::make_result("row_norms", {n}, std::move(out), {a}, [d, norms = std::move(norms)](detail::Node& s) {
    const auto& av = detail::parent(s, 0).data;
    detail::accumulate(s, 0, [&](std::size_t idx) {
      const double nr = norms[idx / d];
      return nr > 0.0 ? s.grad[idx / d] * av[idx] / nr : 0.0;
    });
  });
}

// Scales every row of a matrix to unit Euclidean norm.
inline Tensor row_l2_normalize(const Tensor& a) {
  detail::require_matrix("row_l2_normalize", a);
  const std::size_t n = a.dim(0), d = a.dim(1);
  std::vector<double> out(n * d), norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) acc += a.data()[i * d + j] * a.data()[i * d + j];
    if (acc == 0.0) throw NumericError("row_l2_normalize: zero-norm row " + std::to_string(i));
    norms[i] = std::sqrt(acc);
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = a.data()[i * d + j] / norms[i];
  }
  auto y = out;
  return Tensor::make_result("row_l2_normalize", {n, d}, std::move(out), {a},
                             [n, d, y = std::move(y), norms = std::move(norms)](detail::Node& s) {
    detail::Node& p = detail::parent(s, 0);
    if (!p.requires_grad) return;
    p.ensure_grad();
    // d(x/|x|) = (g - y <g, y>) / |x|
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) dot += s.grad[i * d + j] * y[i * d + j];
      for (std::size_t j = 0; j < d; ++j)
        p.grad[i * d + j] += (s.grad[i * d + j] - y[i * d + j] * dot) / norms[i];
    }
  });
}

// Mean of squared differences over all elements.
inline Tensor mse(const Tensor& a, const Tensor& b) {
  detail::require_same_shape("mse", a, b);
  return mean(square(sub(a, b)));
}

// Weights of one self-attention layer; qkv packs the query, key and value
// projections side by side as (d, 3d).
struct AttentionWeights {
  Tensor qkv_weight;  // (d, 3d)
  Tensor qkv_bias;    // (3d), undefined when qkv_bias is off
  Tensor proj_weight; // (d, d)
  Tensor proj_bias;   // (d)
};

// Multi-head scaled dot-product self-attention over the rows of x (n, d).
inline Tensor multi_head_attention(const Tensor& x, const AttentionWeights& w, std::size_t heads,
                                   bool qkv_bias) {
  detail::require_matrix("multi_head_attention", x);
  const std::size_t d = x.dim(1);
  if (heads == 0 || d % heads != 0) {
    throw ShapeError("multi_head_attention: dim " + std::to_string(d) + " not divisible by " +
                     std::to_string(heads) + " heads");
  }
  if (w.qkv_weight.shape() != Shape{d, 3 * d} || w.proj_weight.shape() != Shape{d, d}) {
    throw ShapeError("multi_head_attention: projection shapes do not match dim " + std::to_string(d));
  }
  if (qkv_bias && !w.qkv_bias.defined()) throw ShapeError("multi_head_attention: qkv bias missing");
  const std::size_t dh = d / heads;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const Tensor qkv = linear(x, w.qkv_weight, qkv_bias ? w.qkv_bias : Tensor());
  std::vector<Tensor> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor q = slice_cols(qkv, h * dh, dh);
    const Tensor k = slice_cols(qkv, d + h * dh, dh);
    const Tensor v = slice_cols(qkv, 2 * d + h * dh, dh);
    const Tensor attn = softmax(scale(matmul(q, transpose(k)), inv_scale));
    outs.push_back(matmul(attn, v));
  }
  return linear(concat_cols(outs), w.proj_weight, w.proj_bias);
}

}  // namespace modred::nc
