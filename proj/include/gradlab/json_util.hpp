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
#include <limits>
#include <set>
#include <string>

#include "gradlab/error.hpp"
#include "json.hpp"

namespace gradlab {

// Reads a JSON object field by field and rejects anything left unread.
class StrictObject {
 public:
  StrictObject(const nlohmann::json& j, std::string context)
      : json_(j), context_(std::move(context)) {
    if (!j.is_object()) throw ConfigError(context_ + ": expected an object");
  }

  bool has(const std::string& key) const { return json_.contains(key); }

  const nlohmann::json& raw(const std::string& key) {
    if (!json_.contains(key)) throw ConfigError(context_ + ": missing key '" + key + "'");
    seen_.insert(key);
    return json_.at(key);
  }

  template <typename T>
  T require(const std::string& key) {
    return convert<T>(raw(key), key);
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    if (!json_.contains(key)) return fallback;
    return convert<T>(raw(key), key);
  }

  // Number, or the strings "inf" / "-inf".
  double number(const std::string& key, double fallback) {
    if (!json_.contains(key)) return fallback;
    return as_number(raw(key), context_ + "." + key);
  }

  void finish() const {
    for (const auto& [key, value] : json_.items()) {
      if (!seen_.count(key)) throw ConfigError(context_ + ": unknown key '" + key + "'");
    }
  }

  static double as_number(const nlohmann::json& v, const std::string& where) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
      const auto s = v.get<std::string>();
      if (s == "inf") return std::numeric_limits<double>::infinity();
      if (s == "-inf") return -std::numeric_limits<double>::infinity();
    }
    throw ConfigError(where + ": expected a number");
  }

  static nlohmann::json from_number(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
  }

 private:
  template <typename T>
  T convert(const nlohmann::json& v, const std::string& key) const {
    try {
      return v.get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(context_ + "." + key + ": wrong type");
    }
  }

  const nlohmann::json& json_;
  std::string context_;
  std::set<std::string> seen_;
};

}  // namespace gradlab
