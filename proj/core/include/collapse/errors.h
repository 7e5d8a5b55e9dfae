// Copyright 2026 The Patch Collapse Authors
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

#ifndef COLLAPSE_ERRORS_H_
#define COLLAPSE_ERRORS_H_

#include <stdexcept>
#include <string>

namespace collapse {

// Raised when caller-supplied data violates a documented precondition
// (bad indices, malformed files, invalid configuration values).
class InvalidInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when a numerical procedure cannot deliver its postcondition:
// loss divergence, non-convergence, loss of positive-definiteness,
// non-finite gradients.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace collapse

#endif  // COLLAPSE_ERRORS_H_
