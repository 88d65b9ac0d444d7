// Copyright 2026 The dpsearch Authors
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

#ifndef DPSEARCH_ERRORS_H_
#define DPSEARCH_ERRORS_H_

#include <stdexcept>
#include <string>

namespace dpsearch {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input does not match a declared schema (missing column, missing monomial,
// mismatched feature lists or key domains).
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Malformed data values: non-numeric cells, keys outside the domain.
class DataError : public Error {
 public:
  using Error::Error;
};

// Invalid arguments to an operation.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

class BudgetError : public Error {
 public:
  using Error::Error;
};

// A mechanism cannot run in the requested configuration (e.g. shuffling
// under pure DP).
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

// Count entry is zero, negative or not finite.
class UndefinedStatistics : public Error {
 public:
  using Error::Error;
};

// Modelling assumption broken, e.g. a join-key domain of size one.
class AssumptionViolation : public Error {
 public:
  using Error::Error;
};

// No finite confidence bound exists at the requested tail probability.
class UnboundedConfidence : public Error {
 public:
  using Error::Error;
};

}  // namespace dpsearch

#endif  // DPSEARCH_ERRORS_H_
