/*
* Copyright 2026 The catrl Authors.
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
* ============================================================================
*/

#ifndef CATRL_ERROR_HPP_
#define CATRL_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace catrl {

// Base for every error the library raises on bad input or failed estimation.
// The subclass determines the status code reported through the C API.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed configuration, schema mismatch, unreadable or invalid data.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Censoring calibration could not bracket or reach its target rate.
class CalibrationError : public Error {
 public:
  using Error::Error;
};

// Estimation failure: positivity violated in sample, empty stage, etc.
class FitError : public Error {
 public:
  using Error::Error;
};

}  // namespace catrl

#endif  // CATRL_ERROR_HPP_
