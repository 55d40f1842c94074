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

#include <array>
#include <cmath>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "modred/errors.hpp"

namespace modred::data {

// Standard 12-lead order; index 0 is lead I.
inline constexpr std::array<std::string_view, 12> kLeadNames = {"I",   "II",  "III", "aVR", "aVL", "aVF",
                                                                "V1",  "V2",  "V3",  "V4",  "V5",  "V6"};
inline constexpr std::size_t kLeadI = 0, kLeadII = 1, kLeadIII = 2, kLeadAVR = 3, kLeadAVL = 4, kLeadAVF = 5;

struct SignalRecord {
  std::string id;
  std::string subject_id;
  double fs_hz = 0.0;
  std::vector<std::vector<double>> channels;  // channel-major, all equal length
  std::map<std::string, std::string> labels;

  std::size_t n_channels() const { return channels.size(); }
  std::size_t n_samples() const { return channels.empty() ? 0 : channels[0].size(); }
  double duration_s() const { return static_cast<double>(n_samples()) / fs_hz; }

  void validate() const {
    if (!(fs_hz > 0.0) || !std::isfinite(fs_hz)) throw DataError("record " + id + ": fs_hz must be positive");
    if (channels.empty()) throw DataError("record " + id + ": no channels");
    for (const auto& ch : channels) {
      if (ch.size() != channels[0].size()) throw DataError("record " + id + ": channels differ in length");
      for (double v : ch) {
        if (!std::isfinite(v)) throw DataError("record " + id + ": non-finite sample");
      }
    }
  }

  bool operator==(const SignalRecord&) const = default;
};

}  // namespace modred::data
