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

#include <functional>
#include <span>
#include <vector>

#include "gradlab/tensor.hpp"

namespace gradlab::ag {

// Scalar-valued function built from recordable ops. Called both with a tape
// variable (analytic path) and with plain constants (finite differences).
using ScalarFn = std::function<Tensor(const Tensor&)>;

// Central differences, one coordinate at a time.
std::vector<double> numeric_gradient(const ScalarFn& fn, const Tensor& point,
                                     double eps);

// Reverse-mode gradient of fn at point.
std::vector<double> analytic_gradient(const ScalarFn& fn, const Tensor& point);

// max_i |a_i - n_i| / max(1, |n_i|).
double max_relative_error(std::span<const double> analytic,
                          std::span<const double> numeric);

// Compares reverse mode against central differences.
double check_gradient(const ScalarFn& fn, const Tensor& point,
                      double eps = 1e-5);

// Same comparison for a caller-supplied gradient.
double compare_gradient(const ScalarFn& fn, std::span<const double> analytic,
                        const Tensor& point, double eps = 1e-5);

// Hessian-vector product by double backward.
std::vector<double> hessian_vector_product(const ScalarFn& fn,
                                           const Tensor& point,
                                           const Tensor& direction);

// Double-backward H*v against central differences of the first gradient
// along v.
double check_hessian_vector(const ScalarFn& fn, const Tensor& point,
                            const Tensor& direction, double eps = 1e-5);

}  // namespace gradlab::ag
