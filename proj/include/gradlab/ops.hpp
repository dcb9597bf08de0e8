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

#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "gradlab/tensor.hpp"

// Differentiable primitives. Every adjoint is written in terms of these same
// primitives, which makes the set closed under differentiation.
namespace gradlab::ag {

using IndexList = std::shared_ptr<const std::vector<std::size_t>>;

// Elementwise, operands of identical shape.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);

Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor square(const Tensor& a);
// relu(0) = 0 and its derivative there is 0.
Tensor relu(const Tensor& a);
// Gradient passes only where lo < a < hi.
Tensor clamp(const Tensor& a, double lo, double hi);

enum class Activation { relu, tanh, sigmoid };
Tensor activation(Activation kind, const Tensor& a);

// Sum of all entries as a rank-0 tensor.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// Sum of elementwise products.
Tensor dot(const Tensor& a, const Tensor& b);
// Rank-0 (or one-element) tensor repeated into `shape`.
Tensor expand(const Tensor& s, const Shape& shape);

Tensor reshape(const Tensor& a, Shape shape);
Tensor transpose(const Tensor& a);
Tensor matmul(const Tensor& a, const Tensor& b);

// v has shape [shape[axis]]; the result repeats it along every other axis.
Tensor broadcast_axis(const Tensor& v, const Shape& shape, std::size_t axis);
// Reduces every axis except `axis`; result shape [a.dim(axis)].
Tensor sum_to_axis(const Tensor& a, std::size_t axis);

// out[j] = a[index[j]].
Tensor gather(const Tensor& a, IndexList index, Shape out_shape);
// out[index[j]] += a[j].
Tensor scatter_add(const Tensor& a, IndexList index, Shape out_shape);

// Rows of the leading axis, in the given order.
Tensor select_rows(const Tensor& a, std::span<const std::size_t> rows);

// Cross-correlation, input NCHW, kernel OIHW.
Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride,
              std::size_t padding);
// Adjoint of conv2d with respect to its input.
Tensor conv2d_input_grad(const Tensor& grad_out, const Tensor& kernel,
                         const Shape& input_shape, std::size_t stride,
                         std::size_t padding);
// Adjoint of conv2d with respect to its kernel.
Tensor conv2d_weight_grad(const Tensor& input, const Tensor& grad_out,
                          const Shape& kernel_shape, std::size_t stride,
                          std::size_t padding);

enum class Pool { avg, max };
Tensor pool2d(Pool kind, const Tensor& input, std::size_t window,
              std::size_t stride);
Tensor avg_pool2d(const Tensor& input, std::size_t window, std::size_t stride);
// Spreads each pooled gradient evenly over its window.
Tensor avg_pool2d_grad(const Tensor& grad_out, const Shape& input_shape,
                       std::size_t window, std::size_t stride);
// Routes through the first maximal index of each window.
Tensor max_pool2d(const Tensor& input, std::size_t window, std::size_t stride);

// Separable linear resampling: out[n,c] = rows * in[n,c] * cols^T, with
// rows [Ho,H] and cols [Wo,W] treated as constants.
Tensor resample2d(const Tensor& input, const Tensor& rows, const Tensor& cols);

// x [B,in], weight [out,in], bias [out].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);
// Adds bias [C] to every channel of an NCHW tensor.
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);

// Mean over the batch of -log softmax(logits)[label].
Tensor softmax_cross_entropy(const Tensor& logits,
                             std::span<const int> labels);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
inline Tensor operator*(double c, const Tensor& a) { return scale(a, c); }

}  // namespace gradlab::ag
