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

#include <stdexcept>
#include <string>

namespace modred {

// Process exit codes used by the command-line tool.
enum class ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kData = 3,
  kProtocol = 4,
  kNumeric = 5,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept { return ExitCode::kUsage; }
};

// Invalid configuration, bad arguments, schema violations.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Shape mismatches and other caller contract violations on tensors.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf produced anywhere in the numeric path.
class NumericError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kNumeric; }
};

class DataError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kData; }
};

class MissingFileError : public DataError {
 public:
  using DataError::DataError;
};

class MalformedManifestError : public DataError {
 public:
  using DataError::DataError;
};

class LengthMismatchError : public DataError {
 public:
  using DataError::DataError;
};

// Checkpoint files: bad magic, version, truncation, parameter mismatch.
class CheckpointError : public DataError {
 public:
  using DataError::DataError;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kProtocol; }
};

// The peer went away (EOF or reset) while a frame was expected.
class DisconnectError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

}  // namespace modred
