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

#include "gradlab/tensor.hpp"

#include <cmath>
#include <sstream>

#include "gradlab/error.hpp"
#include "gradlab/ops.hpp"

namespace gradlab::ag {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (const auto extent : shape) n *= extent;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)) {
  for (const auto extent : shape_) {
    if (extent == 0) {
      throw ShapeError("tensor extents must be positive, got " +
                       ag::to_string(shape_));
    }
  }
  if (ag::numel(shape_) != values.size()) {
    throw ShapeError("shape " + ag::to_string(shape_) + " needs " +
                     std::to_string(ag::numel(shape_)) + " values, got " +
                     std::to_string(values.size()));
  }
  data_ = std::make_shared<const std::vector<double>>(std::move(values));
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  const std::size_t n = ag::numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " +
                     ag::to_string(shape_));
  }
  return shape_[axis];
}

std::span<const double> Tensor::values() const {
  if (!data_) return {};
  return {data_->data(), data_->size()};
}

double Tensor::item() const {
  if (numel() != 1) {
    throw ShapeError("item() needs a one-element tensor, got " +
                     ag::to_string(shape_));
  }
  return (*data_)[0];
}

std::vector<double> Tensor::to_vector() const {
  if (!data_) return {};
  return *data_;
}

Tensor Tensor::detach() const {
  Tensor copy = *this;
  copy.tape_ = nullptr;
  copy.node_ = 0;
  return copy;
}

Tensor Tape::variable(const Tensor& value) {
  if (!value.defined()) throw TapeError("cannot register an undefined tensor");
  return record("leaf", value.detach(), {}, nullptr);
}

Tensor Tape::record(std::string_view op, const Tensor& value,
                    std::vector<Tensor> inputs, BackwardFn backward) {
  Tensor out = value.detach();
  out.tape_ = this;
  out.node_ = nodes_.size();
  nodes_.push_back(Node{op, std::move(inputs), std::move(backward), out});
  return out;
}

Tensor Tape::backward(const Tensor& loss, const Tensor& wrt,
                      bool create_graph) {
  return backward(loss, std::span<const Tensor>(&wrt, 1), create_graph).front();
}

std::vector<Tensor> Tape::backward(const Tensor& loss,
                                   std::span<const Tensor> wrt,
                                   bool create_graph) {
  if (loss.tape() != this) {
    throw TapeError("loss is not a node on this tape");
  }
  if (loss.numel() != 1) {
    throw ShapeError("backward needs a scalar loss, got " +
                     ag::to_string(loss.shape()));
  }
  for (const auto& t : wrt) {
    if (t.tape() != this) {
      throw TapeError("requested gradient of a tensor that is not on the tape");
    }
  }

  const std::size_t last = loss.node();
  std::vector<bool> is_wrt(last + 1, false);
  for (const auto& t : wrt) {
    if (t.node() <= last) is_wrt[t.node()] = true;
  }
  // reach[i]: node i is, or depends on, one of the requested tensors.
  std::vector<bool> reach(last + 1, false);
  for (std::size_t i = 0; i <= last; ++i) {
    if (is_wrt[i]) {
      reach[i] = true;
      continue;
    }
    for (const auto& in : nodes_[i].inputs) {
      if (in.tape() == this && reach[in.node()]) {
        reach[i] = true;
        break;
      }
    }
  }

  std::vector<Tensor> grads(last + 1);
  if (reach[last]) grads[last] = Tensor::full(loss.shape(), 1.0);

  for (std::size_t i = last + 1; i-- > 0;) {
    if (!reach[i] || !grads[i].defined()) continue;
    // Copies: recording the adjoint may grow the deque.
    const auto backward_fn = nodes_[i].backward;
    if (!backward_fn) continue;
    std::vector<Tensor> inputs = nodes_[i].inputs;
    Tensor output = nodes_[i].output;
    std::vector<bool> needs(inputs.size(), false);
    bool any = false;
    for (std::size_t j = 0; j < inputs.size(); ++j) {
      needs[j] = inputs[j].tape() == this && reach[inputs[j].node()];
      any = any || needs[j];
    }
    if (!any) continue;
    Tensor upstream = grads[i];
    if (!create_graph) {
      for (auto& in : inputs) in = in.detach();
      output = output.detach();
      upstream = upstream.detach();
    }
    std::vector<Tensor> in_grads = backward_fn(upstream, inputs, output, needs);
    if (!is_wrt[i]) grads[i] = Tensor();
    for (std::size_t j = 0; j < inputs.size(); ++j) {
      if (!needs[j] || j >= in_grads.size() || !in_grads[j].defined()) continue;
      auto& slot = grads[nodes_[i].inputs[j].node()];
      slot = slot.defined() ? add(slot, in_grads[j]) : in_grads[j];
    }
  }

  std::vector<Tensor> result;
  result.reserve(wrt.size());
  for (const auto& t : wrt) {
    if (t.node() <= last && grads[t.node()].defined()) {
      result.push_back(grads[t.node()]);
    } else {
      result.push_back(Tensor::zeros(t.shape()));
    }
  }
  return result;
}

Tensor make_result(std::string_view op, Tensor value,
                   std::vector<Tensor> inputs, BackwardFn backward) {
  for (const double v : value.values()) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string(op) + " produced a non-finite value");
    }
  }
  Tape* tape = nullptr;
  for (const auto& in : inputs) {
    if (!in.on_tape()) continue;
    if (tape && tape != in.tape()) {
      throw TapeError(std::string(op) + " mixes tensors from different tapes");
    }
    tape = in.tape();
  }
  if (!tape) return value;
  return tape->record(op, value, std::move(inputs), std::move(backward));
}

}  // namespace gradlab::ag
