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

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string_view>

namespace modred::log {

enum class Level { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

// MODRED_LOG=error|warn|info|debug (default warn).
inline Level threshold() {
  static const Level level = [] {
    const char* env = std::getenv("MODRED_LOG");
    if (env == nullptr) return Level::kWarn;
    const std::string_view v(env);
    if (v == "error") return Level::kError;
    if (v == "info") return Level::kInfo;
    if (v == "debug") return Level::kDebug;
    return Level::kWarn;
  }();
  return level;
}

template <class... Args>
void write(Level level, const Args&... args) {
  if (static_cast<int>(level) > static_cast<int>(threshold())) return;
  static constexpr std::string_view kNames[] = {"error", "warn", "info", "debug"};
  std::ostringstream os;
  os << "[modred " << kNames[static_cast<int>(level)] << "] ";
  (os << ... << args);
  os << '\n';
  static std::mutex mu;
  std::lock_guard lock(mu);
  std::cerr << os.str();
}

template <class... Args> void error(const Args&... a) { write(Level::kError, a...); }
template <class... Args> void warn(const Args&... a) { write(Level::kWarn, a...); }
template <class... Args> void info(const Args&... a) { write(Level::kInfo, a...); }
template <class... Args> void debug(const Args&... a) { write(Level::kDebug, a...); }

}  // namespace modred::log
