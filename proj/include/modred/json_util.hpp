/*
 * Copyright 2026 The modred Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <initializer_list>
#include <string>
#include <string_view>

#include <json.hpp>

#include "modred/errors.hpp"

namespace modred {

using json = nlohmann::json;

// Strict object reader: every key must be known, and typed lookups report
// the offending path on failure.
class StrictObject {
 public:
  StrictObject(const json& j, std::string path, std::initializer_list<std::string_view> allowed)
      : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(path_ + ": expected a JSON object");
    for (const auto& [key, _] : j.items()) {
      bool ok = false;
      for (auto a : allowed) ok = ok || key == a;
      if (!ok) throw ConfigError(path_ + ": unknown key '" + key + "'");
    }
  }

  bool has(std::string_view key) const { return j_.contains(std::string(key)); }

  template <class T>
  void get_to(std::string_view key, T& out) const {
    const std::string k(key);
    if (!j_.contains(k)) return;
    try {
      out = j_.at(k).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(path_ + "." + k + ": " + e.what());
    }
  }

  const json& sub(std::string_view key) const { return j_.at(std::string(key)); }
  std::string child_path(std::string_view key) const { return path_ + "." + std::string(key); }

 private:
  const json& j_;
  std::string path_;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ConfigError(msg);
}

}  // namespace modred
