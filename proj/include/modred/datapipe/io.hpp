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
 * @file io.hpp
 * @brief Manifest + raw waveform storage, and CSV import.
 *
 * manifest.json:
 *
 *     { "records": [ { "id", "subject_id", "fs_hz", "n_channels",
 *                      "n_samples", "labels": {..}, "path" } ] }
 *
 * "path" is relative to the manifest's directory. Each waveform file holds
 * n_channels * n_samples binary64 values, little-endian, channel-major.
 */
#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "modred/bytes.hpp"
#include "modred/datapipe/record.hpp"
#include "modred/errors.hpp"
#include "modred/json_util.hpp"

namespace modred::data {

namespace fs = std::filesystem;

struct ManifestEntry {
  std::string id;
  std::string subject_id;
  double fs_hz = 0.0;
  std::size_t n_channels = 0;
  std::size_t n_samples = 0;
  std::map<std::string, std::string> labels;
  std::string path;
};

struct Manifest {
  fs::path base_dir;
  std::vector<ManifestEntry> records;
};

inline Manifest load_manifest(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw MissingFileError("manifest not found: " + path.string());
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw MalformedManifestError("manifest " + path.string() + " is not valid JSON: " + e.what());
  }
  Manifest m;
  m.base_dir = path.parent_path();
  try {
    if (!j.is_object() || !j.contains("records") || !j.at("records").is_array()) {
      throw MalformedManifestError("manifest " + path.string() + ": expected an object with a \"records\" array");
    }
    for (const auto& r : j.at("records")) {
      ManifestEntry e;
      e.id = r.at("id").get<std::string>();
      e.subject_id = r.at("subject_id").get<std::string>();
      e.fs_hz = r.at("fs_hz").get<double>();
      e.n_channels = r.at("n_channels").get<std::size_t>();
      e.n_samples = r.at("n_samples").get<std::size_t>();
      if (r.contains("labels")) e.labels = r.at("labels").get<std::map<std::string, std::string>>();
      e.path = r.at("path").get<std::string>();
      if (!(e.fs_hz > 0.0) || e.n_channels == 0) {
        throw MalformedManifestError("manifest record " + e.id + ": fs_hz and n_channels must be positive");
      }
      m.records.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw MalformedManifestError("manifest " + path.string() + ": " + e.what());
  }
  return m;
}

inline SignalRecord read_record(const ManifestEntry& e, const fs::path& base_dir) {
  const fs::path file = base_dir / e.path;
  std::ifstream f(file, std::ios::binary);
  if (!f) throw MissingFileError("waveform file not found: " + file.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  const std::size_t expected = e.n_channels * e.n_samples * 8;
  if (bytes.size() != expected) {
    throw LengthMismatchError("record " + e.id + ": manifest implies " + std::to_string(expected) +
                              " bytes, file has " + std::to_string(bytes.size()));
  }
  SignalRecord rec{e.id, e.subject_id, e.fs_hz, {}, e.labels};
  ByteReader<LengthMismatchError> r(bytes);
  for (std::size_t c = 0; c < e.n_channels; ++c) rec.channels.push_back(r.f64s(e.n_samples));
  rec.validate();
  return rec;
}

inline std::vector<SignalRecord> read_all(const Manifest& m) {
  std::vector<SignalRecord> out;
  out.reserve(m.records.size());
  for (const auto& e : m.records) out.push_back(read_record(e, m.base_dir));
  return out;
}

inline std::vector<SignalRecord> load_dataset(const fs::path& manifest_path) {
  return read_all(load_manifest(manifest_path));
}

inline void write_waveform(const SignalRecord& rec, const fs::path& file) {
  ByteWriter w;
  for (const auto& ch : rec.channels) w.f64s(ch);
  fs::create_directories(file.parent_path());
  std::ofstream f(file, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write " + file.string());
  const auto& buf = w.buffer();
  f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!f) throw DataError("write failed: " + file.string());
}

// Writes <dir>/manifest.json and <dir>/records/<id>.f64 for every record.
inline fs::path write_dataset(const std::vector<SignalRecord>& records, const fs::path& dir) {
  json list = json::array();
  for (const auto& r : records) {
    r.validate();
    const std::string rel = "records/" + r.id + ".f64";
    write_waveform(r, dir / rel);
    list.push_back({{"id", r.id},
                    {"subject_id", r.subject_id},
                    {"fs_hz", r.fs_hz},
                    {"n_channels", r.n_channels()},
                    {"n_samples", r.n_samples()},
                    {"labels", r.labels},
                    {"path", rel}});
  }
  const fs::path manifest = dir / "manifest.json";
  std::ofstream f(manifest, std::ios::trunc);
  if (!f) throw DataError("cannot write " + manifest.string());
  f << json{{"records", list}}.dump(2) << '\n';
  return manifest;
}

// CSV with a header row of channel names and one sample per row.
inline SignalRecord import_csv(const fs::path& path, double fs_hz, std::string id, std::string subject_id,
                               std::vector<std::string>* channel_names = nullptr) {
  std::ifstream f(path);
  if (!f) throw MissingFileError("CSV not found: " + path.string());
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      const auto b = cell.find_first_not_of(" \t\r");
      const auto e = cell.find_last_not_of(" \t\r");
      cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
  };
  std::string line;
  if (!std::getline(f, line)) throw DataError("CSV " + path.string() + ": empty file");
  const auto header = split(line);
  if (header.empty()) throw DataError("CSV " + path.string() + ": empty header");
  if (channel_names) *channel_names = header;
  SignalRecord rec{std::move(id), std::move(subject_id), fs_hz, std::vector<std::vector<double>>(header.size()), {}};
  std::size_t row = 1;
  while (std::getline(f, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw LengthMismatchError("CSV " + path.string() + " row " + std::to_string(row) + ": expected " +
                                std::to_string(header.size()) + " columns, got " + std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cells[c], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != cells[c].size()) {
        throw DataError("CSV " + path.string() + " row " + std::to_string(row) + ": not a number: '" + cells[c] + "'");
      }
      rec.channels[c].push_back(v);
    }
  }
  rec.validate();
  return rec;
}

}  // namespace modred::data
