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

// Shared helpers for the unit tests: seeded random states and brute-force
// full-space operators built by explicit Kronecker products, independent of
// the kernel's gather/scatter path.

#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include <complex>
#include <numeric>
#include <random>
#include <vector>

#include "cvdqs/fock.hpp"

namespace cvdqs::testing {

using fock::CMatrix;
using fock::Complex;
using fock::CVector;
using fock::Cutoff;

// Random normalized state supported on basis states with total photon
// number <= max_total.
inline fock::FockVector random_state(int modes, Cutoff c, int max_total, std::mt19937& rng) {
  std::normal_distribution<double> nd;
  CVector v = CVector::Zero(fock::space_dim(modes, c));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const auto occ = fock::occupations(i, modes, c);
    if (std::accumulate(occ.begin(), occ.end(), 0) <= max_total) v(i) = Complex(nd(rng), nd(rng));
  }
  v.normalize();
  return {modes, c, v};
}

inline fock::FockDensity random_density(int modes, Cutoff c, int max_total, int rank, std::mt19937& rng) {
  const Eigen::Index d = fock::space_dim(modes, c);
  CMatrix rho = CMatrix::Zero(d, d);
  std::uniform_real_distribution<double> w(0.1, 1.0);
  for (int k = 0; k < rank; ++k) {
    const auto psi = random_state(modes, c, max_total, rng);
    rho += w(rng) * psi.amplitudes() * psi.amplitudes().adjoint();
  }
  rho /= rho.trace().real();
  return {modes, c, rho};
}

// I x ... x op (at `mode`) x ... x I
inline CMatrix embed(const CMatrix& op, int mode, int modes) {
  const Eigen::Index d = op.rows();
  CMatrix full = CMatrix::Identity(1, 1);
  for (int m = 0; m < modes; ++m) {
    const CMatrix f = m == mode ? op : CMatrix::Identity(d, d);
    full = Eigen::kroneckerProduct(full, f).eval();
  }
  return full;
}

inline double max_abs_diff(const CMatrix& a, const CMatrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

// Removes the global phase that makes the largest entry of `a` real positive.
inline CMatrix fix_phase(const CMatrix& a) {
  Eigen::Index r = 0, c = 0;
  a.cwiseAbs().maxCoeff(&r, &c);
  const Complex ph = a(r, c) / std::abs(a(r, c));
  return a / ph;
}

}  // namespace cvdqs::testing
