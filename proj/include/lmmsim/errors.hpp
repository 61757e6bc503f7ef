/* Copyright 2026 The lmmsim Authors.
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

namespace lmmsim {

// Base class for everything thrown by the simulator.
class SimError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// User-facing configuration problem; message names the offending field.
class ConfigError : public SimError {
 public:
  using SimError::SimError;
};

// Duplicate or unknown request id in the tracker registry.
class RegistryError : public SimError {
 public:
  using SimError::SimError;
};

// An embedding range was marked ready twice.
class DoubleEncodeError : public SimError {
 public:
  using SimError::SimError;
};

// An encode completion did not line up with a multimodal item boundary.
class AlignmentError : public SimError {
 public:
  using SimError::SimError;
};

// Prefill tried to consume a token whose embedding is not ready. This
// firing during a simulation is a scheduler bug, not a recoverable state.
class DependencyViolation : public SimError {
 public:
  using SimError::SimError;
};

// Malformed or empty input to an analysis function.
class InputError : public SimError {
 public:
  using SimError::SimError;
};

// A report is missing cells required by an analysis (e.g. compare).
class DataError : public SimError {
 public:
  using SimError::SimError;
};

class IoError : public SimError {
 public:
  using SimError::SimError;
};

// Broken internal invariant; always a bug.
class InternalError : public SimError {
 public:
  using SimError::SimError;
};

}  // namespace lmmsim
