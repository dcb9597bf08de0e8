// Copyright 2026 The GradLab Authors. All Rights Reserved.
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

#include "gradlab/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gradlab/error.hpp"

namespace gradlab::ag {
namespace {

using Grads = std::vector<Tensor>;

void require_same_shape(const Tensor& a, const Tensor& b, std::string_view op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

void require_rank(const Tensor& a, std::size_t rank, std::string_view op) {
  if (a.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " +
                     std::to_string(rank) + ", got " + to_string(a.shape()));
  }
}

template <typename F>
std::vector<double> map_values(const Tensor& a, F f) {
  const auto in = a.values();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return out;
}

template <typename F>
std::vector<double> zip_values(const Tensor& a, const Tensor& b, F f) {
  const auto x = a.values();
  const auto y = b.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i], y[i]);
  return out;
}

// Multiplies by a constant mask; used for piecewise-linear maps.
Tensor mask_mul(std::string_view op, const Tensor& a, Tensor mask) {
  std::vector<double> out = zip_values(a, mask, [](double x, double m) {
    return x * m;
  });
  return make_result(
      op, Tensor(a.shape(), std::move(out)), {a},
      [mask](const Tensor& g, std::span<const Tensor>, const Tensor&,
             const std::vector<bool>&) -> Grads { return {mul(g, mask)}; });
}

struct ConvGeometry {
  std::size_t n, cin, h, w, cout, kh, kw, oh, ow, stride, pad;

  // Input index touched by output index `o` and kernel tap `k`.
  std::ptrdiff_t in_row(std::size_t o, std::size_t k) const {
    return static_cast<std::ptrdiff_t>(o * stride + k) -
           static_cast<std::ptrdiff_t>(pad);
  }

  // Output indices [lo, hi) whose tap `k` lands inside an input of `extent`.
  std::pair<std::size_t, std::size_t> valid(std::size_t k, std::size_t extent,
                                            std::size_t outputs) const {
    std::size_t lo = 0;
    if (pad > k) lo = (pad - k + stride - 1) / stride;
    std::size_t hi = 0;
    if (extent + pad > k) hi = (extent + pad - k + stride - 1) / stride;
    hi = std::min(hi, outputs);
    return {std::min(lo, hi), hi};
  }
};

ConvGeometry conv_geometry(const Shape& input, const Shape& kernel,
                           std::size_t stride, std::size_t padding,
                           std::string_view op) {
  if (input.size() != 4 || kernel.size() != 4) {
    throw ShapeError(std::string(op) + ": expected NCHW input and OIHW kernel, got " +
                     to_string(input) + " and " + to_string(kernel));
  }
  if (stride == 0) throw ShapeError(std::string(op) + ": stride must be positive");
  if (input[1] != kernel[1]) {
    throw ShapeError(std::string(op) + ": input has " +
                     std::to_string(input[1]) + " channels, kernel expects " +
                     std::to_string(kernel[1]));
  }
  const std::size_t ph = input[2] + 2 * padding;
  const std::size_t pw = input[3] + 2 * padding;
  if (kernel[2] > ph || kernel[3] > pw) {
    throw ShapeError(std::string(op) + ": kernel " + to_string(kernel) +
                     " larger than padded input " + to_string(input));
  }
  return ConvGeometry{input[0],  input[1], input[2],
                      input[3],  kernel[0], kernel[2],
                      kernel[3], (ph - kernel[2]) / stride + 1,
                      (pw - kernel[3]) / stride + 1, stride,
                      padding};
}

std::vector<double> conv_forward(const ConvGeometry& g,
                                 std::span<const double> x,
                                 std::span<const double> k) {
  std::vector<double> out(g.n * g.cout * g.oh * g.ow, 0.0);
  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t o = 0; o < g.cout; ++o) {
      double* dst = out.data() + (n * g.cout + o) * g.oh * g.ow;
      for (std::size_t c = 0; c < g.cin; ++c) {
        const double* src = x.data() + (n * g.cin + c) * g.h * g.w;
        for (std::size_t a = 0; a < g.kh; ++a) {
          for (std::size_t b = 0; b < g.kw; ++b) {
            const double wv = k[((o * g.cin + c) * g.kh + a) * g.kw + b];
            const auto [i0, i1] = g.valid(a, g.h, g.oh);
            const auto [j0, j1] = g.valid(b, g.w, g.ow);
            for (std::size_t i = i0; i < i1; ++i) {
              const double* row = src + g.in_row(i, a) * g.w;
              double* drow = dst + i * g.ow;
              if (g.stride == 1) {
                const double* in = row + g.in_row(j0, b);
                for (std::size_t j = j0; j < j1; ++j) drow[j] += wv * in[j - j0];
              } else {
                for (std::size_t j = j0; j < j1; ++j) {
                  drow[j] += wv * row[g.in_row(j, b)];
                }
              }
            }
          }
        }
      }
    }
  }
  return out;
}

std::vector<double> conv_input_adjoint(const ConvGeometry& g,
                                       std::span<const double> gy,
                                       std::span<const double> k) {
  std::vector<double> dx(g.n * g.cin * g.h * g.w, 0.0);
  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t o = 0; o < g.cout; ++o) {
      const double* src = gy.data() + (n * g.cout + o) * g.oh * g.ow;
      for (std::size_t c = 0; c < g.cin; ++c) {
        double* dst = dx.data() + (n * g.cin + c) * g.h * g.w;
        for (std::size_t a = 0; a < g.kh; ++a) {
          for (std::size_t b = 0; b < g.kw; ++b) {
            const double wv = k[((o * g.cin + c) * g.kh + a) * g.kw + b];
            const auto [i0, i1] = g.valid(a, g.h, g.oh);
            const auto [j0, j1] = g.valid(b, g.w, g.ow);
            for (std::size_t i = i0; i < i1; ++i) {
              double* row = dst + g.in_row(i, a) * g.w;
              const double* srow = src + i * g.ow;
              if (g.stride == 1) {
                double* out = row + g.in_row(j0, b);
                for (std::size_t j = j0; j < j1; ++j) out[j - j0] += wv * srow[j];
              } else {
                for (std::size_t j = j0; j < j1; ++j) {
                  row[g.in_row(j, b)] += wv * srow[j];
                }
              }
            }
          }
        }
      }
    }
  }
  return dx;
}

std::vector<double> conv_weight_adjoint(const ConvGeometry& g,
                                        std::span<const double> x,
                                        std::span<const double> gy) {
  std::vector<double> dk(g.cout * g.cin * g.kh * g.kw, 0.0);
  for (std::size_t o = 0; o < g.cout; ++o) {
    for (std::size_t c = 0; c < g.cin; ++c) {
      for (std::size_t a = 0; a < g.kh; ++a) {
        for (std::size_t b = 0; b < g.kw; ++b) {
          double acc = 0.0;
          for (std::size_t n = 0; n < g.n; ++n) {
            const double* src = x.data() + (n * g.cin + c) * g.h * g.w;
            const double* gsrc = gy.data() + (n * g.cout + o) * g.oh * g.ow;
            const auto [i0, i1] = g.valid(a, g.h, g.oh);
            const auto [j0, j1] = g.valid(b, g.w, g.ow);
            for (std::size_t i = i0; i < i1; ++i) {
              const double* row = src + g.in_row(i, a) * g.w;
              const double* grow = gsrc + i * g.ow;
              for (std::size_t j = j0; j < j1; ++j) {
                acc += grow[j] * row[g.in_row(j, b)];
              }
            }
          }
          dk[((o * g.cin + c) * g.kh + a) * g.kw + b] = acc;
        }
      }
    }
  }
  return dk;
}

struct PoolGeometry {
  std::size_t n, c, h, w, oh, ow, window, stride;
};

PoolGeometry pool_geometry(const Shape& input, std::size_t window,
                           std::size_t stride, std::string_view op) {
  if (input.size() != 4) {
    throw ShapeError(std::string(op) + ": expected NCHW input, got " +
                     to_string(input));
  }
  if (window == 0 || stride == 0) {
    throw ShapeError(std::string(op) + ": window and stride must be positive");
  }
  if (window > input[2] || window > input[3]) {
    throw ShapeError(std::string(op) + ": window " + std::to_string(window) +
                     " exceeds spatial extent of " + to_string(input));
  }
  return PoolGeometry{input[0], input[1], input[2], input[3],
                      (input[2] - window) / stride + 1,
                      (input[3] - window) / stride + 1, window, stride};
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  return make_result(
      "add", Tensor(a.shape(), zip_values(a, b, std::plus<>())), {a, b},
      [](const Tensor& g, std::span<const Tensor>, const Tensor&,
         const std::vector<bool>&) -> Grads { return {g, g}; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  return make_result(
      "sub", Tensor(a.shape(), zip_values(a, b, std::minus<>())), {a, b},
      [](const Tensor& g, std::span<const Tensor>, const Tensor&,
         const std::vector<bool>& needs) -> Grads {
        return {g, needs[1] ? neg(g) : Tensor()};
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  return make_result(
      "mul", Tensor(a.shape(), zip_values(a, b, std::multiplies<>())), {a, b},
      [](const Tensor& g, std::span<const Tensor> in, const Tensor&,
         const std::vector<bool>& needs) -> Grads {
        return {needs[0] ? mul(g, in[1]) : Tensor(),
                needs[1] ? mul(g, in[0]) : Tensor()};
      });
}

Tensor div(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "div");
  return make_result(
      "div", Tensor(a.shape(), zip_values(a, b, std::divides<>())), {a, b},
      [](const Tensor& g, std::span<const Tensor> in, const Tensor& out,
         const std::vector<bool>& needs) -> Grads {
        return {needs[0] ? div(g, in[1]) : Tensor(),
                needs[1] ? neg(mul(g, div(out, in[1]))) : Tensor()};
      });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor scale(const Tensor& a, double factor) {
  return make_result(
      "scale",
      Tensor(a.shape(), map_values(a, [factor](double x) { return x * factor; })),
      {a},
      [factor](const Tensor& g, std::span<const Tensor>, const Tensor&,
               const std::vector<bool>&) -> Grads {
        return {scale(g, factor)};
      });
}

Tensor add_scalar(const Tensor& a, double offset) {
  return make_result(
      "add_scalar",
      Tensor(a.shape(), map_values(a, [offset](double x) { return x + offset; })),
      {a},
      [](const Tensor& g, std::span<const Tensor>, const Tensor&,
         const std::vector<bool>&) -> Grads { return {g}; });
}

Tensor exp(const Tensor& a) {
  return make_result(
      "exp", Tensor(a.shape(), map_values(a, [](double x) { return std::exp(x); })),
      {a},
      [](const Tensor& g, std::span<const Tensor>, const Tensor& out,
         const std::vector<bool>&) -> Grads { return {mul(g, out)}; });
}

Tensor log(const Tensor& a) {
  return make_result(
      "log", Tensor(a.shape(), map_values(a, [](double x) { return std::log(x); })),
      {a},
      [](const Tensor& g, std::span<const Tensor> in, const Tensor&,
         const std::vector<bool>&) -> Grads { return {div(g, in[0])}; });
}

Tensor sqrt(const Tensor& a) {
  return make_result(
      "sqrt",
      Tensor(a.shape(), map_values(a, [](double x) { return std::sqrt(x); })),
      {a},
      [](const Tensor& g, std::span<const Tensor>, const Tensor& out,
         const std::vector<bool>&) -> Grads {
        return {div(scale(g, 0.5), out)};
      });
}

Tensor tanh(const Tensor& a) {
  return make_result(
      "tanh",
      Tensor(a.shape(), map_values(a, [](double x) { return std::tanh(x); })),
      {a},
      [](const Tensor& g, std::span<const Tensor>, const Tensor& out,
         const std::vector<bool>&) -> Grads {
        // sech^2 = 1 - tanh^2
        return {mul(g, add_scalar(neg(square(out)), 1.0))};
      });
}

Tensor sigmoid(const Tensor& a) {
  return make_result(
      "sigmoid",
      Tensor(a.shape(), map_values(a, [](double x) {
               return x >= 0 ? 1.0 / (1.0 + std::exp(-x))
                             : std::exp(x) / (1.0 + std::exp(x));
             })),
      {a},
      [](const Tensor& g, std::span<const Tensor>, const Tensor& out,
         const std::vector<bool>&) -> Grads {
        return {mul(g, mul(out, add_scalar(neg(out), 1.0)))};
      });
}

Tensor square(const Tensor& a) { return mul(a, a); }

Tensor relu(const Tensor& a) {
  Tensor mask(a.shape(), map_values(a, [](double x) { return x > 0 ? 1.0 : 0.0; }));
  return mask_mul("relu", a, std::move(mask));
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  Tensor mask(a.shape(), map_values(a, [lo, hi](double x) {
                return (x > lo && x < hi) ? 1.0 : 0.0;
              }));
  Tensor rest(a.shape(), map_values(a, [lo, hi](double x) {
                return x <= lo ? lo : (x >= hi ? hi : 0.0);
              }));
  return add(mask_mul("clamp", a, std::move(mask)), rest);
}

Tensor activation(Activation kind, const Tensor& a) {
  switch (kind) {
    case Activation::relu:
      return relu(a);
    case Activation::tanh:
      return tanh(a);
    case Activation::sigmoid:
      return sigmoid(a);
  }
  throw ShapeError("unknown activation");
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (const double v : a.values()) acc += v;
  const Shape in_shape = a.shape();
  return make_result(
      "sum", Tensor::scalar(acc), {a},
      [in_shape](const Tensor& g, std::span<const Tensor>, const Tensor&,
                 const std::vector<bool>&) -> Grads {
        return {expand(g, in_shape)};
      });
}

Tensor mean(const Tensor& a) {
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor dot(const Tensor& a, const Tensor& b) { return sum(mul(a, b)); }

Tensor expand(const Tensor& s, const Shape& shape) {
  if (s.numel() != 1) {
    throw ShapeError("expand needs a one-element tensor, got " +
                     to_string(s.shape()));
  }
  const Shape in_shape = s.shape();
  return make_result(
      "expand", Tensor::full(shape, s.item()), {s},
      [in_shape](const Tensor& g, std::span<const Tensor>, const Tensor&,
                 const std::vector<bool>&) -> Grads {
        return {reshape(sum(g), in_shape)};
      });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.numel()) {
    throw ShapeError("reshape: cannot view " + to_string(a.shape()) + " as " +
                     to_string(shape));
  }
  if (shape == a.shape()) return a;
  const Shape in_shape = a.shape();
  return make_result(
      "reshape", Tensor(std::move(shape), a.to_vector()), {a},
      [in_shape](const Tensor& g, std::span<const Tensor>, const Tensor&,
                 const std::vector<bool>&) -> Grads {
        return {reshape(g, in_shape)};
      });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t r = a.dim(0);
  const std::size_t c = a.dim(1);
  const auto x = a.values();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = x[i * c + j];
  }
  return make_result(
      "transpose", Tensor({c, r}, std::move(out)), {a},
      [](const Tensor& g, std::span<const Tensor>, const Tensor&,
         const std::vector<bool>&) -> Grads { return {transpose(g)}; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0);
  const std::size_t k = a.dim(1);
  const std::size_t n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: inner dimensions differ, " + to_string(a.shape()) +
                     " x " + to_string(b.shape()));
  }
  const auto x = a.values();
  const auto y = b.values();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = x[i * k + p];
      const double* brow = y.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  return make_result(
      "matmul", Tensor({m, n}, std::move(out)), {a, b},
      [](const Tensor& g, std::span<const Tensor> in, const Tensor&,
         const std::vector<bool>& needs) -> Grads {
        return {needs[0] ? matmul(g, transpose(in[1])) : Tensor(),
                needs[1] ? matmul(transpose(in[0]), g) : Tensor()};
      });
}

Tensor broadcast_axis(const Tensor& v, const Shape& shape, std::size_t axis) {
  if (axis >= shape.size() || v.numel() != shape[axis]) {
    throw ShapeError("broadcast_axis: " + to_string(v.shape()) +
                     " does not match axis " + std::to_string(axis) + " of " +
                     to_string(shape));
  }
  std::size_t outer = 1;
  std::size_t inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t mid = shape[axis];
  const auto x = v.values();
  std::vector<double> out(outer * mid * inner);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t m = 0; m < mid; ++m) {
      std::fill_n(out.begin() + (o * mid + m) * inner, inner, x[m]);
    }
  }
  const Shape in_shape = v.shape();
  return make_result(
      "broadcast_axis", Tensor(shape, std::move(out)), {v},
      [axis, in_shape](const Tensor& g, std::span<const Tensor>, const Tensor&,
                       const std::vector<bool>&) -> Grads {
        return {reshape(sum_to_axis(g, axis), in_shape)};
      });
}

Tensor sum_to_axis(const Tensor& a, std::size_t axis) {
  const Shape& shape = a.shape();
  if (axis >= shape.size()) {
    throw ShapeError("sum_to_axis: axis out of range for " + to_string(shape));
  }
  std::size_t outer = 1;
  std::size_t inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t mid = shape[axis];
  const auto x = a.values();
  std::vector<double> out(mid, 0.0);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t m = 0; m < mid; ++m) {
      const double* src = x.data() + (o * mid + m) * inner;
      double acc = 0.0;
      for (std::size_t i = 0; i < inner; ++i) acc += src[i];
      out[m] += acc;
    }
  }
  return make_result(
      "sum_to_axis", Tensor({mid}, std::move(out)), {a},
      [axis, shape](const Tensor& g, std::span<const Tensor>, const Tensor&,
                    const std::vector<bool>&) -> Grads {
        return {broadcast_axis(g, shape, axis)};
      });
}

Tensor gather(const Tensor& a, IndexList index, Shape out_shape) {
  if (numel(out_shape) != index->size()) {
    throw ShapeError("gather: index count does not match " + to_string(out_shape));
  }
  const auto x = a.values();
  std::vector<double> out(index->size());
  for (std::size_t j = 0; j < index->size(); ++j) {
    const std::size_t src = (*index)[j];
    if (src >= x.size()) throw ShapeError("gather: index out of range");
    out[j] = x[src];
  }
  const Shape in_shape = a.shape();
  return make_result(
      "gather", Tensor(std::move(out_shape), std::move(out)), {a},
      [index, in_shape](const Tensor& g, std::span<const Tensor>, const Tensor&,
                        const std::vector<bool>&) -> Grads {
        return {scatter_add(g, index, in_shape)};
      });
}

Tensor scatter_add(const Tensor& a, IndexList index, Shape out_shape) {
  if (a.numel() != index->size()) {
    throw ShapeError("scatter_add: index count does not match input");
  }
  const auto x = a.values();
  std::vector<double> out(numel(out_shape), 0.0);
  for (std::size_t j = 0; j < index->size(); ++j) {
    const std::size_t dst = (*index)[j];
    if (dst >= out.size()) throw ShapeError("scatter_add: index out of range");
    out[dst] += x[j];
  }
  const Shape in_shape = a.shape();
  return make_result(
      "scatter_add", Tensor(std::move(out_shape), std::move(out)), {a},
      [index, in_shape](const Tensor& g, std::span<const Tensor>, const Tensor&,
                        const std::vector<bool>&) -> Grads {
        return {gather(g, index, in_shape)};
      });
}

Tensor select_rows(const Tensor& a, std::span<const std::size_t> rows) {
  if (a.rank() == 0 || rows.empty()) {
    throw ShapeError("select_rows needs a batched tensor and at least one row");
  }
  const std::size_t stride = a.numel() / a.dim(0);
  auto index = std::make_shared<std::vector<std::size_t>>();
  index->reserve(rows.size() * stride);
  for (const std::size_t r : rows) {
    if (r >= a.dim(0)) throw ShapeError("select_rows: row out of range");
    for (std::size_t i = 0; i < stride; ++i) index->push_back(r * stride + i);
  }
  Shape shape = a.shape();
  shape[0] = rows.size();
  return gather(a, std::move(index), std::move(shape));
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride,
              std::size_t padding) {
  const auto g = conv_geometry(input.shape(), kernel.shape(), stride, padding,
                               "conv2d");
  std::vector<double> out = conv_forward(g, input.values(), kernel.values());
  const Shape in_shape = input.shape();
  const Shape k_shape = kernel.shape();
  return make_result(
      "conv2d", Tensor({g.n, g.cout, g.oh, g.ow}, std::move(out)),
      {input, kernel},
      [in_shape, k_shape, stride, padding](
          const Tensor& gy, std::span<const Tensor> in, const Tensor&,
          const std::vector<bool>& needs) -> Grads {
        return {needs[0] ? conv2d_input_grad(gy, in[1], in_shape, stride, padding)
                         : Tensor(),
                needs[1] ? conv2d_weight_grad(in[0], gy, k_shape, stride, padding)
                         : Tensor()};
      });
}

Tensor conv2d_input_grad(const Tensor& grad_out, const Tensor& kernel,
                         const Shape& input_shape, std::size_t stride,
                         std::size_t padding) {
  const auto g = conv_geometry(input_shape, kernel.shape(), stride, padding,
                               "conv2d_input_grad");
  if (grad_out.shape() != Shape{g.n, g.cout, g.oh, g.ow}) {
    throw ShapeError("conv2d_input_grad: gradient shape " +
                     to_string(grad_out.shape()) + " does not match output");
  }
  std::vector<double> dx =
      conv_input_adjoint(g, grad_out.values(), kernel.values());
  const Shape k_shape = kernel.shape();
  return make_result(
      "conv2d_input_grad", Tensor(input_shape, std::move(dx)),
      {grad_out, kernel},
      [k_shape, stride, padding](const Tensor& gx, std::span<const Tensor> in,
                                 const Tensor&,
                                 const std::vector<bool>& needs) -> Grads {
        return {needs[0] ? conv2d(gx, in[1], stride, padding) : Tensor(),
                needs[1] ? conv2d_weight_grad(gx, in[0], k_shape, stride, padding)
                         : Tensor()};
      });
}

Tensor conv2d_weight_grad(const Tensor& input, const Tensor& grad_out,
                          const Shape& kernel_shape, std::size_t stride,
                          std::size_t padding) {
  const auto g = conv_geometry(input.shape(), kernel_shape, stride, padding,
                               "conv2d_weight_grad");
  if (grad_out.shape() != Shape{g.n, g.cout, g.oh, g.ow}) {
    throw ShapeError("conv2d_weight_grad: gradient shape " +
                     to_string(grad_out.shape()) + " does not match output");
  }
  std::vector<double> dk =
      conv_weight_adjoint(g, input.values(), grad_out.values());
  const Shape in_shape = input.shape();
  return make_result(
      "conv2d_weight_grad", Tensor(kernel_shape, std::move(dk)),
      {input, grad_out},
      [in_shape, stride, padding](const Tensor& gk, std::span<const Tensor> in,
                                  const Tensor&,
                                  const std::vector<bool>& needs) -> Grads {
        return {needs[0] ? conv2d_input_grad(in[1], gk, in_shape, stride, padding)
                         : Tensor(),
                needs[1] ? conv2d(in[0], gk, stride, padding) : Tensor()};
      });
}

Tensor pool2d(Pool kind, const Tensor& input, std::size_t window,
              std::size_t stride) {
  return kind == Pool::avg ? avg_pool2d(input, window, stride)
                           : max_pool2d(input, window, stride);
}

Tensor avg_pool2d(const Tensor& input, std::size_t window, std::size_t stride) {
  const auto g = pool_geometry(input.shape(), window, stride, "avg_pool2d");
  const auto x = input.values();
  const double inv = 1.0 / static_cast<double>(window * window);
  std::vector<double> out(g.n * g.c * g.oh * g.ow, 0.0);
  for (std::size_t p = 0; p < g.n * g.c; ++p) {
    const double* src = x.data() + p * g.h * g.w;
    double* dst = out.data() + p * g.oh * g.ow;
    for (std::size_t i = 0; i < g.oh; ++i) {
      for (std::size_t j = 0; j < g.ow; ++j) {
        double acc = 0.0;
        for (std::size_t a = 0; a < window; ++a) {
          for (std::size_t b = 0; b < window; ++b) {
            acc += src[(i * stride + a) * g.w + j * stride + b];
          }
        }
        dst[i * g.ow + j] = acc * inv;
      }
    }
  }
  const Shape in_shape = input.shape();
  return make_result(
      "avg_pool2d", Tensor({g.n, g.c, g.oh, g.ow}, std::move(out)), {input},
      [in_shape, window, stride](const Tensor& gy, std::span<const Tensor>,
                                 const Tensor&,
                                 const std::vector<bool>&) -> Grads {
        return {avg_pool2d_grad(gy, in_shape, window, stride)};
      });
}

Tensor avg_pool2d_grad(const Tensor& grad_out, const Shape& input_shape,
                       std::size_t window, std::size_t stride) {
  const auto g = pool_geometry(input_shape, window, stride, "avg_pool2d_grad");
  if (grad_out.shape() != Shape{g.n, g.c, g.oh, g.ow}) {
    throw ShapeError("avg_pool2d_grad: gradient shape mismatch");
  }
  const auto gy = grad_out.values();
  const double inv = 1.0 / static_cast<double>(window * window);
  std::vector<double> dx(g.n * g.c * g.h * g.w, 0.0);
  for (std::size_t p = 0; p < g.n * g.c; ++p) {
    const double* src = gy.data() + p * g.oh * g.ow;
    double* dst = dx.data() + p * g.h * g.w;
    for (std::size_t i = 0; i < g.oh; ++i) {
      for (std::size_t j = 0; j < g.ow; ++j) {
        const double v = src[i * g.ow + j] * inv;
        for (std::size_t a = 0; a < window; ++a) {
          for (std::size_t b = 0; b < window; ++b) {
            dst[(i * stride + a) * g.w + j * stride + b] += v;
          }
        }
      }
    }
  }
  return make_result(
      "avg_pool2d_grad", Tensor(input_shape, std::move(dx)), {grad_out},
      [window, stride](const Tensor& gx, std::span<const Tensor>, const Tensor&,
                       const std::vector<bool>&) -> Grads {
        return {avg_pool2d(gx, window, stride)};
      });
}

Tensor max_pool2d(const Tensor& input, std::size_t window, std::size_t stride) {
  const auto g = pool_geometry(input.shape(), window, stride, "max_pool2d");
  const auto x = input.values();
  auto index = std::make_shared<std::vector<std::size_t>>(g.n * g.c * g.oh * g.ow);
  for (std::size_t p = 0; p < g.n * g.c; ++p) {
    for (std::size_t i = 0; i < g.oh; ++i) {
      for (std::size_t j = 0; j < g.ow; ++j) {
        std::size_t best = p * g.h * g.w + (i * stride) * g.w + j * stride;
        for (std::size_t a = 0; a < window; ++a) {
          for (std::size_t b = 0; b < window; ++b) {
            const std::size_t at =
                p * g.h * g.w + (i * stride + a) * g.w + j * stride + b;
            if (x[at] > x[best]) best = at;
          }
        }
        (*index)[(p * g.oh + i) * g.ow + j] = best;
      }
    }
  }
  return gather(input, std::move(index), {g.n, g.c, g.oh, g.ow});
}

Tensor resample2d(const Tensor& input, const Tensor& rows, const Tensor& cols) {
  require_rank(input, 4, "resample2d");
  require_rank(rows, 2, "resample2d");
  require_rank(cols, 2, "resample2d");
  const std::size_t nc = input.dim(0) * input.dim(1);
  const std::size_t h = input.dim(2);
  const std::size_t w = input.dim(3);
  if (rows.dim(1) != h || cols.dim(1) != w) {
    throw ShapeError("resample2d: matrices " + to_string(rows.shape()) + ", " +
                     to_string(cols.shape()) + " do not fit input " +
                     to_string(input.shape()));
  }
  const std::size_t oh = rows.dim(0);
  const std::size_t ow = cols.dim(0);
  const auto x = input.values();
  const auto r = rows.values();
  const auto c = cols.values();
  std::vector<double> out(nc * oh * ow, 0.0);
  std::vector<double> tmp(h * ow);
  for (std::size_t p = 0; p < nc; ++p) {
    const double* src = x.data() + p * h * w;
    // tmp = src * cols^T
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < w; ++k) acc += src[i * w + k] * c[j * w + k];
        tmp[i * ow + j] = acc;
      }
    }
    double* dst = out.data() + p * oh * ow;
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t k = 0; k < h; ++k) {
        const double rv = r[i * h + k];
        if (rv == 0.0) continue;
        for (std::size_t j = 0; j < ow; ++j) dst[i * ow + j] += rv * tmp[k * ow + j];
      }
    }
  }
  const Tensor rows_t = transpose(rows.detach());
  const Tensor cols_t = transpose(cols.detach());
  return make_result(
      "resample2d",
      Tensor({input.dim(0), input.dim(1), oh, ow}, std::move(out)), {input},
      [rows_t, cols_t](const Tensor& g, std::span<const Tensor>, const Tensor&,
                       const std::vector<bool>&) -> Grads {
        return {resample2d(g, rows_t, cols_t)};
      });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank(x, 2, "linear");
  require_rank(weight, 2, "linear");
  if (weight.dim(1) != x.dim(1)) {
    throw ShapeError("linear: input width " + std::to_string(x.dim(1)) +
                     " does not match weight " + to_string(weight.shape()));
  }
  Tensor y = matmul(x, transpose(weight));
  return add(y, broadcast_axis(bias, y.shape(), 1));
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
  require_rank(x, 4, "add_channel_bias");
  return add(x, broadcast_axis(bias, x.shape(), 1));
}

Tensor softmax_cross_entropy(const Tensor& logits,
                             std::span<const int> labels) {
  require_rank(logits, 2, "softmax_cross_entropy");
  const std::size_t batch = logits.dim(0);
  const std::size_t classes = logits.dim(1);
  if (labels.size() != batch) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                     " labels for batch of " + std::to_string(batch));
  }
  const auto z = logits.values();
  std::vector<double> row_max(batch);
  auto picks = std::make_shared<std::vector<std::size_t>>(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    if (labels[b] < 0 || static_cast<std::size_t>(labels[b]) >= classes) {
      throw ShapeError("softmax_cross_entropy: label " +
                       std::to_string(labels[b]) + " outside [0," +
                       std::to_string(classes) + ")");
    }
    row_max[b] = *std::max_element(z.begin() + b * classes,
                                   z.begin() + (b + 1) * classes);
    (*picks)[b] = b * classes + static_cast<std::size_t>(labels[b]);
  }
  // The shift is a constant: log-sum-exp is invariant to it.
  const Tensor shift(Shape{batch}, std::move(row_max));
  const Tensor shifted = sub(logits, broadcast_axis(shift, logits.shape(), 0));
  const Tensor lse = log(sum_to_axis(exp(shifted), 0));
  const Tensor picked = gather(shifted, std::move(picks), {batch});
  return scale(sum(sub(lse, picked)), 1.0 / static_cast<double>(batch));
}

}  // namespace gradlab::ag
