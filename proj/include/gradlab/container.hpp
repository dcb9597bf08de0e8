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
#include <filesystem>
#include <string>
#include <vector>

#include "gradlab/segmented.hpp"
#include "json.hpp"

namespace gradlab::io {

inline constexpr char kMagic[4] = {'G', 'O', 'B', 'F'};
inline constexpr std::uint16_t kFormatVersion = 1;

struct NamedTensor {
  std::string name;
  ag::Shape shape;
  std::vector<double> values;
};

// Role-tagged bundle of tensors with a JSON metadata block.
struct Container {
  std::string role;
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  const NamedTensor& get(const std::string& name) const;
  bool contains(const std::string& name) const;
};

std::string encode(const Container& c);
Container decode(const std::string& bytes, const std::string& origin = "<memory>");

void write_container(const std::filesystem::path& path, const Container& c);
Container read_container(const std::filesystem::path& path);

// Segments become tensors named `<prefix>.<segment>`.
template <typename Tag>
void append_segmented(Container& c, const std::string& prefix,
                      const SegmentedVector<Tag>& v) {
  for (std::size_t i = 0; i < v.table().count(); ++i) {
    const auto& seg = v.table().segments()[i];
    const auto part = v.segment(i);
    c.tensors.push_back({prefix + "." + seg.name, seg.shape, {part.begin(), part.end()}});
  }
}

template <typename Tag>
SegmentedVector<Tag> extract_segmented(const Container& c, const std::string& prefix,
                                       std::shared_ptr<const SegmentTable> table) {
  std::vector<double> values;
  values.reserve(table->total());
  for (const auto& seg : table->segments()) {
    const auto& t = c.get(prefix + "." + seg.name);
    if (t.shape != seg.shape) {
      throw ShapeError(prefix + "." + seg.name + " has shape " + ag::to_string(t.shape) +
                       ", model expects " + ag::to_string(seg.shape));
    }
    values.insert(values.end(), t.values.begin(), t.values.end());
  }
  return SegmentedVector<Tag>(std::move(table), std::move(values));
}

}  // namespace gradlab::io
