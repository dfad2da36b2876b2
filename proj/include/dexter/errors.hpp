/*
 * Copyright 2026 The DEXTER-OOD Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
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

namespace dexter {

// Base of every error raised by the library. The CLI maps ValidationError to
// exit code 1 and everything else to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user input: configuration values, parameter ranges, malformed files.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class StationarityError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class InvalidSpliceError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Input data that cannot be processed (short episodes, empty sets, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

class SimulationDivergedError : public Error {
 public:
  using Error::Error;
};

// Model, catalogue or dimension mismatch between persisted artifacts.
class IncompatibilityError : public Error {
 public:
  using Error::Error;
};

class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace dexter
