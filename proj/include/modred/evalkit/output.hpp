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

/**
 * @file output.hpp
 * @brief Report files: matrix CSV, per-fold CSV and the JSON summary.
 */
#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "modred/datapipe/record.hpp"
#include "modred/errors.hpp"
#include "modred/evalkit/classify.hpp"
#include "modred/evalkit/reports.hpp"
#include "modred/json_util.hpp"

namespace modred::eval {

// 64-bit FNV-1a, hex encoded.
inline std::string fnv1a_hex(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Hash of the compact dump; nlohmann sorts object keys, so it is canonical.
inline std::string config_hash(const json& config) { return fnv1a_hex(config.dump()); }

inline std::vector<std::string> channel_names(std::size_t C) {
  std::vector<std::string> n;
  for (std::size_t c = 0; c < C; ++c) {
    n.push_back(C == data::kLeadNames.size() ? std::string(data::kLeadNames[c]) : "ch" + std::to_string(c));
  }
  return n;
}

namespace detail {

inline std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw DataError("cannot write " + p.string());
  return f;
}

}  // namespace detail

// Header of C channel names, then C rows of C values.
inline void write_matrix_csv(const fs::path& p, const Matrix& m) {
  auto f = detail::open_out(p);
  const auto names = channel_names(m.size());
  for (std::size_t c = 0; c < names.size(); ++c) f << (c ? "," : "") << names[c];
  f << '\n';
  for (const auto& row : m) {
    for (std::size_t j = 0; j < row.size(); ++j) f << (j ? "," : "") << format_real(row[j]);
    f << '\n';
  }
}

inline void write_cv_csv(const fs::path& p, const CvResult& r) {
  auto f = detail::open_out(p);
  f << "fold," << r.metric << '\n';
  for (std::size_t i = 0; i < r.per_fold.size(); ++i) f << i << ',' << format_real(r.per_fold[i]) << '\n';
}

inline json summary_json(const std::string& metric, double mean, double std, std::uint64_t seed,
                         const json& config) {
  return {{"metric", metric}, {"mean", mean}, {"std", std}, {"seed", seed}, {"config_hash", config_hash(config)}};
}

inline void write_json(const fs::path& p, const json& j) {
  auto f = detail::open_out(p);
  f << j.dump(2) << '\n';
}

}  // namespace modred::eval
