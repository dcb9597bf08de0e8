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

#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gradlab/error.hpp"
#include "gradlab/tensor.hpp"

namespace gradlab {

struct Segment {
  std::string name;
  std::size_t offset = 0;
  ag::Shape shape;

  std::size_t size() const { return ag::numel(shape); }
  bool operator==(const Segment&) const = default;
};

// Named, contiguous, non-overlapping slices that tile a flat vector.
class SegmentTable {
 public:
  void append(std::string name, ag::Shape shape) {
    if (find(name)) throw ConfigError("duplicate segment name: " + name);
    segments_.push_back(Segment{std::move(name), total_, shape});
    total_ += ag::numel(shape);
  }

  const std::vector<Segment>& segments() const { return segments_; }
  std::size_t count() const { return segments_.size(); }
  std::size_t total() const { return total_; }

  std::optional<std::size_t> find(std::string_view name) const {
    for (std::size_t i = 0; i < segments_.size(); ++i) {
      if (segments_[i].name == name) return i;
    }
    return std::nullopt;
  }

  const Segment& at(std::string_view name) const {
    const auto i = find(name);
    if (!i) throw ConfigError("no segment named " + std::string(name));
    return segments_[*i];
  }

  bool operator==(const SegmentTable&) const = default;

 private:
  std::vector<Segment> segments_;
  std::size_t total_ = 0;
};

// Flat f64 vector with a shared segment table. The tag keeps weights and
// weight differences from being mixed up.
template <typename Tag>
class SegmentedVector {
 public:
  SegmentedVector() = default;
  SegmentedVector(std::shared_ptr<const SegmentTable> table,
                  std::vector<double> values)
      : table_(std::move(table)), values_(std::move(values)) {
    if (!table_ || values_.size() != table_->total()) {
      throw ShapeError("vector length does not match its segment table");
    }
  }

  static SegmentedVector zeros(std::shared_ptr<const SegmentTable> table) {
    std::vector<double> v(table->total(), 0.0);
    return SegmentedVector(std::move(table), std::move(v));
  }

  static SegmentedVector flatten(std::shared_ptr<const SegmentTable> table,
                                 std::span<const ag::Tensor> parts) {
    if (parts.size() != table->count()) {
      throw ShapeError("expected " + std::to_string(table->count()) +
                       " tensors, got " + std::to_string(parts.size()));
    }
    std::vector<double> v;
    v.reserve(table->total());
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (parts[i].shape() != table->segments()[i].shape) {
        throw ShapeError("tensor for segment " + table->segments()[i].name +
                         " has shape " + ag::to_string(parts[i].shape()));
      }
      const auto src = parts[i].values();
      v.insert(v.end(), src.begin(), src.end());
    }
    return SegmentedVector(std::move(table), std::move(v));
  }

  const SegmentTable& table() const { return *table_; }
  const std::shared_ptr<const SegmentTable>& table_ptr() const { return table_; }
  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  std::span<const double> segment(std::size_t i) const {
    const auto& s = table_->segments()[i];
    return std::span<const double>(values_).subspan(s.offset, s.size());
  }
  std::span<double> segment(std::size_t i) {
    const auto& s = table_->segments()[i];
    return std::span<double>(values_).subspan(s.offset, s.size());
  }

  // One constant tensor per segment.
  std::vector<ag::Tensor> unflatten() const {
    std::vector<ag::Tensor> out;
    out.reserve(table_->count());
    for (std::size_t i = 0; i < table_->count(); ++i) {
      const auto seg = segment(i);
      out.emplace_back(table_->segments()[i].shape,
                       std::vector<double>(seg.begin(), seg.end()));
    }
    return out;
  }

  double norm() const {
    double acc = 0.0;
    for (const double v : values_) acc += v * v;
    return std::sqrt(acc);
  }

  double segment_norm(std::size_t i) const {
    double acc = 0.0;
    for (const double v : segment(i)) acc += v * v;
    return std::sqrt(acc);
  }

  bool same_layout(const SegmentedVector& other) const {
    return table_ == other.table_ || *table_ == *other.table_;
  }

  bool operator==(const SegmentedVector& other) const {
    return same_layout(other) && values_ == other.values_;
  }

 private:
  std::shared_ptr<const SegmentTable> table_;
  std::vector<double> values_;
};

struct ParamTag {};
struct GradientTag {};
using ParamVector = SegmentedVector<ParamTag>;
using GradientVector = SegmentedVector<GradientTag>;

}  // namespace gradlab
