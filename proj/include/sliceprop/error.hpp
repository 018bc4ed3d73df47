// Copyright 2026 The sliceprop Authors
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

#include <stdexcept>
#include <string>

namespace sliceprop {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Filesystem problems: missing, unreadable or unwritable paths.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unsupported file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Input that is well-formed but violates a precondition or invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Operation not permitted in the current state (locked label map, decided case, ...).
class StateError : public Error {
 public:
  using Error::Error;
};

/// Segmentation backend failure. Carries the backend id.
class BackendError : public Error {
 public:
  BackendError(std::string backend_id, const std::string& what)
      : Error("backend '" + backend_id + "': " + what), backend_id_(std::move(backend_id)) {}

  const std::string& backend_id() const noexcept { return backend_id_; }

 private:
  std::string backend_id_;
};

}  // namespace sliceprop
