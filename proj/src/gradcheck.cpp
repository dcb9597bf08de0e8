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

#include "gradlab/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "gradlab/error.hpp"
#include "gradlab/ops.hpp"

namespace gradlab::ag {
namespace {

Tensor shifted(const Tensor& point, std::size_t i, double delta) {
  std::vector<double> v = point.to_vector();
  v[i] += delta;
  return Tensor(point.shape(), std::move(v));
}

Tensor along(const Tensor& point, const Tensor& direction, double step) {
  std::vector<double> v = point.to_vector();
  const auto d = direction.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] += step * d[i];
  return Tensor(point.shape(), std::move(v));
}

}  // namespace

std::vector<double> numeric_gradient(const ScalarFn& fn, const Tensor& point,
                                     double eps) {
  std::vector<double> grad(point.numel());
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double up = fn(shifted(point, i, eps)).item();
    const double down = fn(shifted(point, i, -eps)).item();
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

std::vector<double> analytic_gradient(const ScalarFn& fn, const Tensor& point) {
  Tape tape;
  const Tensor x = tape.variable(point);
  const Tensor y = fn(x);
  if (!y.on_tape()) return std::vector<double>(point.numel(), 0.0);
  return tape.backward(y, x).to_vector();
}

double max_relative_error(std::span<const double> analytic,
                          std::span<const double> numeric) {
  if (analytic.size() != numeric.size()) {
    throw ShapeError("gradient lengths differ");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double err =
        std::abs(analytic[i] - numeric[i]) / std::max(1.0, std::abs(numeric[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

double check_gradient(const ScalarFn& fn, const Tensor& point, double eps) {
  const auto analytic = analytic_gradient(fn, point);
  return compare_gradient(fn, analytic, point, eps);
}

double compare_gradient(const ScalarFn& fn, std::span<const double> analytic,
                        const Tensor& point, double eps) {
  const auto numeric = numeric_gradient(fn, point, eps);
  return max_relative_error(analytic, numeric);
}

std::vector<double> hessian_vector_product(const ScalarFn& fn,
                                           const Tensor& point,
                                           const Tensor& direction) {
  if (direction.shape() != point.shape()) {
    throw ShapeError("direction must match the point's shape");
  }
  Tape tape;
  const Tensor x = tape.variable(point);
  const Tensor y = fn(x);
  if (!y.on_tape()) return std::vector<double>(point.numel(), 0.0);
  const Tensor g = tape.backward(y, x, /*create_graph=*/true);
  const Tensor gv = dot(g, direction.detach());
  if (!gv.on_tape()) return std::vector<double>(point.numel(), 0.0);
  return tape.backward(gv, x).to_vector();
}

double check_hessian_vector(const ScalarFn& fn, const Tensor& point,
                            const Tensor& direction, double eps) {
  const auto analytic = hessian_vector_product(fn, point, direction);
  const auto up = analytic_gradient(fn, along(point, direction, eps));
  const auto down = analytic_gradient(fn, along(point, direction, -eps));
  std::vector<double> numeric(up.size());
  for (std::size_t i = 0; i < up.size(); ++i) {
    numeric[i] = (up[i] - down[i]) / (2.0 * eps);
  }
  return max_relative_error(analytic, numeric);
}

}  // namespace gradlab::ag
