// Copyright 2026 The OccFlow Authors.
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

#ifndef OCCFLOW_COMMON_HPP_
#define OCCFLOW_COMMON_HPP_

#include <stdexcept>
#include <string>

namespace occflow {

// Error categories map 1:1 onto the CLI exit codes (2/3/4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration: invalid recipe/config field, unknown key, architecture
// mismatch on checkpoint load. Exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Bad or missing input data: unreadable files, malformed scene lines,
// schema-version mismatch, empty datasets. Exit code 3.
class DataError : public Error {
 public:
  using Error::Error;
};

// Numerical failure: NaN loss, out-of-domain metric inputs. Exit code 4.
class NumericalError : public Error {
 public:
  using Error::Error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitDataError = 3;
inline constexpr int kExitNumericalError = 4;

}  // namespace occflow

#endif  // OCCFLOW_COMMON_HPP_
