// Copyright 2026 The cvdqs Authors
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

#pragma once

#include <stdexcept>
#include <string>

namespace cvdqs {

// Invalid argument or configuration: negative photon numbers, transmissivity
// outside [0,1], bad mode indices, mismatched cutoffs.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// The source brightness and NLA gain violate g_eff^2 * tanh(r) < 1.
class PhysicalityError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Probability weight lost to the Fock cutoff exceeds the declared tolerance.
class TruncationError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Post-selection produced a state with zero norm.
class ZeroSuccessError : public DomainError {
 public:
  using DomainError::DomainError;
};

// A numerical self-consistency check failed (e.g. an observable that should
// be real picked up an imaginary part).
class ConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw DomainError(what);
}

}  // namespace detail
}  // namespace cvdqs
