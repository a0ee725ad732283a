// Copyright 2026 The gpcinfer authors
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

namespace gpcinfer {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed, inconsistent, or unknown user-provided configuration.
/// The CLI maps this class to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument values detected at a call boundary.
class InvalidArgumentError : public Error {
 public:
  using Error::Error;
};

/// A derivative order combination outside the supported closed-form set.
class UnsupportedDerivativeError : public InvalidArgumentError {
 public:
  using InvalidArgumentError::InvalidArgumentError;
};

/// Numerical failure: singular systems, failed factorizations, divergence.
/// The CLI maps this class (and subclasses) to exit code 3.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A tridiagonal solve hit a vanishing pivot.
class SingularSystemError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// A covariance estimate stayed indefinite after the maximum ridge.
class DegenerateCovarianceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace gpcinfer
