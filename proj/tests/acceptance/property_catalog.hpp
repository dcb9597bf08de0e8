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

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gradlab/gradcheck.hpp"
#include "gradlab/tensor.hpp"

namespace gradlab::acceptance {

// Activation pattern of the piecewise-linear parts of a function.
using PatternFn = std::function<std::vector<bool>(const ag::Tensor&)>;

struct PropertyCase {
  ag::ScalarFn fn;
  ag::Tensor point;
  // Direction for the Hessian-vector check.
  ag::Tensor direction;
  // When non-empty, only these coordinates are checked by finite differences.
  std::vector<std::size_t> coordinates;
  // Set for functions with relu kinks; probes straddling a kink are skipped.
  PatternFn pattern;
};

struct PropertyEntry {
  std::string name;
  bool second_order = true;
  std::function<PropertyCase(std::uint64_t seed)> make;
};

// Every differentiable primitive, the attack's composite losses and the full
// model losses, each wrapped into a scalar function of one tensor.
std::vector<PropertyEntry> property_catalog();

struct FirstOrderCheck {
  double error = 0.0;
  std::size_t checked = 0;
  std::size_t excluded = 0;
};

// Central differences on the case's coordinates (all when none are listed)
// against reverse mode, with the error measure of ag::max_relative_error.
// A coordinate whose two probes see different activation patterns lies in a
// kink neighborhood and is excluded.
FirstOrderCheck check_first_order(const PropertyCase& c, double eps = 1e-5);

// Hessian-vector product against central differences of the gradient along
// the case's direction. The step shrinks tenfold from `eps` until both
// probes share one activation pattern.
double check_second_order(const PropertyCase& c, double eps = 1e-5);

}  // namespace gradlab::acceptance
