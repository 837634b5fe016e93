// Copyright 2026 The dgnet Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DGNET_ERROR_HPP_
#define DGNET_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace dgnet {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes that cannot be combined by an operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid user-supplied configuration (K too large, f <= 0, bad skeleton...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed input text. Carries the 1-based line number of the offending record.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Well-formed data that violates a semantic constraint (joint count mismatch,
// checkpoint version...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Misuse of the gradient tape (double backward, detached root...).
class TapeError : public Error {
 public:
  using Error::Error;
};

// Non-finite values or singular numerical problems.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace dgnet

#endif  // DGNET_ERROR_HPP_
