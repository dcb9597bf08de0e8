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


#include "gradlab/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "gradlab/error.hpp"

namespace gradlab::io {
namespace {

static_assert(std::endian::native == std::endian::little,
              "payload encoding assumes a little-endian host");

void put_u16(std::string& s, std::uint16_t v) {
  s.push_back(char(v & 0xff));
  s.push_back(char(v >> 8));
}

void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(char((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string& s, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(s[at + i])) << (8 * i);
  return v;
}

}  // namespace

const NamedTensor& Container::get(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t;
  }
  throw FormatError(role + " container has no tensor '" + name + "'");
}

bool Container::contains(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return true;
  }
  return false;
}

std::string encode(const Container& c) {
  nlohmann::json header{{"role", c.role}, {"metadata", c.metadata}};
  auto& list = header["tensors"] = nlohmann::json::array();
  for (const auto& t : c.tensors) {
    if (t.values.size() != ag::numel(t.shape)) {
      throw ShapeError("tensor " + t.name + " does not match its declared shape");
    }
    list.push_back({{"name", t.name}, {"shape", t.shape}});
  }
  const std::string text = header.dump();
  std::string out(kMagic, 4);
  put_u16(out, kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  for (const auto& t : c.tensors) {
    const auto* p = reinterpret_cast<const char*>(t.values.data());
    out.append(p, t.values.size() * sizeof(double));
  }
  return out;
}

Container decode(const std::string& bytes, const std::string& origin) {
  if (bytes.size() < 10 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError(origin + ": not a GOBF container (bad magic)");
  }
  const std::uint16_t version = std::uint16_t(static_cast<unsigned char>(bytes[4]) |
                                              (static_cast<unsigned char>(bytes[5]) << 8));
  if (version != kFormatVersion) {
    throw VersionError(origin + ": unsupported container version " + std::to_string(version));
  }
  const std::size_t header_len = get_u32(bytes, 6);
  if (bytes.size() < 10 + header_len) throw FormatError(origin + ": truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(10, header_len));
  } catch (const nlohmann::json::exception&) {
    throw FormatError(origin + ": header is not valid JSON");
  }
  Container c;
  std::size_t offset = 10 + header_len;
  try {
    c.role = header.at("role").get<std::string>();
    c.metadata = header.at("metadata");
    std::size_t total = 0;
    for (const auto& t : header.at("tensors")) {
      NamedTensor nt{t.at("name").get<std::string>(), t.at("shape").get<ag::Shape>(), {}};
      total += ag::numel(nt.shape);
      c.tensors.push_back(std::move(nt));
    }
    if (bytes.size() - offset != total * sizeof(double)) {
      throw FormatError(origin + ": payload is " + std::to_string(bytes.size() - offset) +
                        " bytes, header declares " + std::to_string(total * sizeof(double)));
    }
  } catch (const nlohmann::json::exception&) {
    throw FormatError(origin + ": malformed container header");
  }
  for (auto& t : c.tensors) {
    t.values.resize(ag::numel(t.shape));
    std::memcpy(t.values.data(), bytes.data() + offset, t.values.size() * sizeof(double));
    offset += t.values.size() * sizeof(double);
  }
  return c;
}

void write_container(const std::filesystem::path& path, const Container& c) {
  const std::string bytes = encode(c);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

Container read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  return decode(bytes, path.string());
}

}  // namespace gradlab::io
