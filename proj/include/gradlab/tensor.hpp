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
#include <deque>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gradlab::ag {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

class Tape;

// Dense row-major f64 array. Values are immutable and shared between copies;
// a tensor that carries a tape link is a node on that tape, otherwise it is a
// constant as far as differentiation is concerned.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double value);
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);

  bool defined() const { return data_ != nullptr; }
  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return data_ ? data_->size() : 0; }
  std::span<const double> values() const;
  double operator[](std::size_t i) const { return (*data_)[i]; }
  // The single value of a one-element tensor.
  double item() const;
  std::vector<double> to_vector() const;

  bool on_tape() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  std::size_t node() const { return node_; }
  Tensor detach() const;

 private:
  friend class Tape;

  Shape shape_;
  std::shared_ptr<const std::vector<double>> data_;
  Tape* tape_ = nullptr;
  std::size_t node_ = 0;
};

// Adjoint of one recorded op. Receives the upstream gradient, the op inputs,
// the op output, and which inputs need a gradient; returns one entry per input
// (undefined where not needed). Implementations must only use recordable ops
// so that a second differentiation pass through the adjoint is valid.
using BackwardFn = std::function<std::vector<Tensor>(
    const Tensor& grad_out, std::span<const Tensor> inputs,
    const Tensor& output, const std::vector<bool>& needs)>;

// Append-only record of differentiable operations. Confined to one thread.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Registers a leaf whose gradient may be requested.
  Tensor variable(const Tensor& value);

  // d loss / d t for each t in wrt. With create_graph the adjoint pass is
  // recorded on this tape, so the returned gradients can be differentiated
  // again.
  std::vector<Tensor> backward(const Tensor& loss, std::span<const Tensor> wrt,
                               bool create_graph = false);
  Tensor backward(const Tensor& loss, const Tensor& wrt,
                  bool create_graph = false);

  std::size_t size() const { return nodes_.size(); }
  std::string_view op_name(std::size_t node) const { return nodes_[node].op; }

  Tensor record(std::string_view op, const Tensor& value,
                std::vector<Tensor> inputs, BackwardFn backward);

 private:
  struct Node {
    std::string_view op;
    std::vector<Tensor> inputs;
    BackwardFn backward;
    Tensor output;
  };

  std::deque<Node> nodes_;
};

// Result of an op: recorded on the inputs' tape when any input is on one,
// otherwise returned as a constant. Rejects non-finite values.
Tensor make_result(std::string_view op, Tensor value,
                   std::vector<Tensor> inputs, BackwardFn backward);

}  // namespace gradlab::ag
