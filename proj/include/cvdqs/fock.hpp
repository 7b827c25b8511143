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

// Truncated Fock-space kernel.
//
// Multimode basis states are ordered with mode 0 as the most significant
// digit: index(n_0, ..., n_{M-1}) = sum_m n_m * d^(M-1-m), d = n_max + 1.
//
// Quadrature convention (shared by the whole library):
//   x = (a + a^dag) / 2        vacuum variance 1/4
//   p = -i (a - a^dag)         vacuum variance 1
// so that [x, p] = i on the untruncated space. The x scaling gives the
// homodyne shot noise 1/(2 sqrt(M)) for the averaged estimator, and exp(-i a p)
// is the displacement by a along x.

#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cvdqs/error.hpp"

namespace cvdqs::fock {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline constexpr double kDefaultTruncationTolerance = 1e-6;

class Cutoff {
 public:
  explicit Cutoff(int n_max) : n_max_(n_max) {
    detail::require(n_max >= 1, "cutoff: n_max must be >= 1, got " + std::to_string(n_max));
  }
  int n_max() const { return n_max_; }
  int dim() const { return n_max_ + 1; }
  friend bool operator==(Cutoff, Cutoff) = default;

 private:
  int n_max_;
};

// (n_max + 1)^modes
inline Eigen::Index space_dim(int modes, Cutoff cutoff) {
  Eigen::Index d = 1;
  for (int m = 0; m < modes; ++m) d *= cutoff.dim();
  return d;
}

inline std::vector<int> occupations(Eigen::Index index, int modes, Cutoff cutoff) {
  std::vector<int> occ(static_cast<std::size_t>(modes));
  for (int m = modes - 1; m >= 0; --m) {
    occ[static_cast<std::size_t>(m)] = static_cast<int>(index % cutoff.dim());
    index /= cutoff.dim();
  }
  return occ;
}

inline Eigen::Index basis_index(std::span<const int> occ, Cutoff cutoff) {
  Eigen::Index index = 0;
  for (int n : occ) {
    detail::require(n >= 0 && n <= cutoff.n_max(), "basis_index: occupation outside cutoff");
    index = index * cutoff.dim() + n;
  }
  return index;
}

// ---------------------------------------------------------------------------
// Operators
// ---------------------------------------------------------------------------

class ModeOperator {
 public:
  ModeOperator(Cutoff cutoff, CMatrix entries) : cutoff_(cutoff), m_(std::move(entries)) {
    detail::require(m_.rows() == cutoff.dim() && m_.cols() == cutoff.dim(),
                    "ModeOperator: matrix dimensions do not match cutoff");
  }

  static ModeOperator identity(Cutoff c) { return {c, CMatrix::Identity(c.dim(), c.dim())}; }

  static ModeOperator annihilation(Cutoff c) {
    CMatrix a = CMatrix::Zero(c.dim(), c.dim());
    for (int n = 1; n <= c.n_max(); ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
    return {c, std::move(a)};
  }

  static ModeOperator creation(Cutoff c) { return annihilation(c).adjoint(); }

  static ModeOperator number(Cutoff c) {
    CMatrix n = CMatrix::Zero(c.dim(), c.dim());
    for (int k = 0; k <= c.n_max(); ++k) n(k, k) = static_cast<double>(k);
    return {c, std::move(n)};
  }

  static ModeOperator diagonal(Cutoff c, std::span<const double> diag) {
    detail::require(static_cast<int>(diag.size()) == c.dim(), "ModeOperator::diagonal: size mismatch");
    CMatrix d = CMatrix::Zero(c.dim(), c.dim());
    for (int k = 0; k < c.dim(); ++k) d(k, k) = diag[static_cast<std::size_t>(k)];
    return {c, std::move(d)};
  }

  Cutoff cutoff() const { return cutoff_; }
  const CMatrix& matrix() const { return m_; }
  Complex operator()(int row, int col) const { return m_(row, col); }

  ModeOperator adjoint() const { return {cutoff_, m_.adjoint()}; }

  friend ModeOperator operator*(const ModeOperator& a, const ModeOperator& b) {
    detail::require(a.cutoff_ == b.cutoff_, "ModeOperator: cutoff mismatch");
    return {a.cutoff_, a.m_ * b.m_};
  }
  friend ModeOperator operator+(const ModeOperator& a, const ModeOperator& b) {
    detail::require(a.cutoff_ == b.cutoff_, "ModeOperator: cutoff mismatch");
    return {a.cutoff_, a.m_ + b.m_};
  }
  friend ModeOperator operator-(const ModeOperator& a, const ModeOperator& b) {
    detail::require(a.cutoff_ == b.cutoff_, "ModeOperator: cutoff mismatch");
    return {a.cutoff_, a.m_ - b.m_};
  }
  friend ModeOperator operator*(Complex s, const ModeOperator& a) { return {a.cutoff_, s * a.m_}; }

 private:
  Cutoff cutoff_;
  CMatrix m_;
};

// Operator on an ordered pair of modes, basis index n_first * d + n_second.
class TwoModeOperator {
 public:
  TwoModeOperator(Cutoff cutoff, CMatrix entries) : cutoff_(cutoff), m_(std::move(entries)) {
    const Eigen::Index d2 = space_dim(2, cutoff);
    detail::require(m_.rows() == d2 && m_.cols() == d2,
                    "TwoModeOperator: matrix dimensions do not match cutoff");
  }

  static TwoModeOperator product(const ModeOperator& first, const ModeOperator& second) {
    detail::require(first.cutoff() == second.cutoff(), "TwoModeOperator: cutoff mismatch");
    return {first.cutoff(), Eigen::kroneckerProduct(first.matrix(), second.matrix()).eval()};
  }

  Cutoff cutoff() const { return cutoff_; }
  const CMatrix& matrix() const { return m_; }

 private:
  Cutoff cutoff_;
  CMatrix m_;
};

struct Quadratures {
  ModeOperator x;
  ModeOperator p;
};

inline Quadratures quadratures(Cutoff c) {
  const ModeOperator a = ModeOperator::annihilation(c);
  const ModeOperator ad = a.adjoint();
  return {Complex(0.5, 0.0) * (a + ad), Complex(0.0, -1.0) * (a - ad)};
}

// ---------------------------------------------------------------------------
// States
// ---------------------------------------------------------------------------

class FockVector {
 public:
  FockVector(int modes, Cutoff cutoff, CVector amplitudes)
      : modes_(modes), cutoff_(cutoff), amps_(std::move(amplitudes)) {
    detail::require(modes >= 1, "FockVector: mode count must be >= 1");
    detail::require(amps_.size() == space_dim(modes, cutoff), "FockVector: amplitude count mismatch");
  }

  static FockVector vacuum(int modes, Cutoff c) { return basis(c, std::vector<int>(static_cast<std::size_t>(modes), 0)); }

  static FockVector basis(Cutoff c, std::span<const int> occ) {
    const int modes = static_cast<int>(occ.size());
    CVector v = CVector::Zero(space_dim(modes, c));
    v(basis_index(occ, c)) = 1.0;
    return {modes, c, std::move(v)};
  }
  static FockVector basis(Cutoff c, std::initializer_list<int> occ) {
    return basis(c, std::span<const int>(occ.begin(), occ.size()));
  }

  int modes() const { return modes_; }
  Cutoff cutoff() const { return cutoff_; }
  Eigen::Index dim() const { return amps_.size(); }
  const CVector& amplitudes() const { return amps_; }
  Complex operator[](Eigen::Index i) const { return amps_(i); }
  Complex amplitude(std::span<const int> occ) const { return amps_(basis_index(occ, cutoff_)); }
  Complex amplitude(std::initializer_list<int> occ) const {
    return amplitude(std::span<const int>(occ.begin(), occ.size()));
  }

  double squared_norm() const { return amps_.squaredNorm(); }
  // 1 - sum |amplitude|^2
  double norm_deficit() const { return 1.0 - squared_norm(); }
  // Trace of |psi><psi|, so pure and mixed states share generic code.
  double trace() const { return squared_norm(); }

 private:
  int modes_;
  Cutoff cutoff_;
  CVector amps_;
};

class FockDensity {
 public:
  FockDensity(int modes, Cutoff cutoff, CMatrix entries)
      : modes_(modes), cutoff_(cutoff), rho_(std::move(entries)) {
    detail::require(modes >= 1, "FockDensity: mode count must be >= 1");
    const Eigen::Index d = space_dim(modes, cutoff);
    detail::require(rho_.rows() == d && rho_.cols() == d, "FockDensity: matrix dimensions mismatch");
  }

  explicit FockDensity(const FockVector& psi)
      : FockDensity(psi.modes(), psi.cutoff(), psi.amplitudes() * psi.amplitudes().adjoint()) {}

  int modes() const { return modes_; }
  Cutoff cutoff() const { return cutoff_; }
  Eigen::Index dim() const { return rho_.rows(); }
  const CMatrix& matrix() const { return rho_; }
  Complex operator()(Eigen::Index i, Eigen::Index j) const { return rho_(i, j); }

  double trace() const { return rho_.trace().real(); }

 private:
  int modes_;
  Cutoff cutoff_;
  CMatrix rho_;
};

// rho = sum_k |psi_k><psi_k| over unnormalized pure branches, e.g. the Kraus
// branches of a loss channel. Every operation that is linear in the state
// acts branch by branch, so this is equivalent to the dense density matrix
// at a fraction of the memory.
class FockEnsemble {
 public:
  explicit FockEnsemble(std::vector<FockVector> branches) : branches_(std::move(branches)) {
    detail::require(!branches_.empty(), "FockEnsemble: at least one branch required");
    for (const auto& b : branches_) {
      detail::require(b.modes() == branches_.front().modes() && b.cutoff() == branches_.front().cutoff(),
                      "FockEnsemble: branches must share mode count and cutoff");
    }
  }
  explicit FockEnsemble(FockVector pure) : FockEnsemble(std::vector<FockVector>{std::move(pure)}) {}

  int modes() const { return branches_.front().modes(); }
  Cutoff cutoff() const { return branches_.front().cutoff(); }
  const std::vector<FockVector>& branches() const { return branches_; }

  double trace() const {
    double t = 0.0;
    for (const auto& b : branches_) t += b.squared_norm();
    return t;
  }

  FockDensity to_density() const {
    const Eigen::Index d = branches_.front().dim();
    CMatrix rho = CMatrix::Zero(d, d);
    for (const auto& b : branches_) rho.noalias() += b.amplitudes() * b.amplitudes().adjoint();
    return {modes(), cutoff(), std::move(rho)};
  }

 private:
  std::vector<FockVector> branches_;
};

// ---------------------------------------------------------------------------
// Local operator application
// ---------------------------------------------------------------------------

namespace detail {
using cvdqs::detail::require;

struct LocalLayout {
  std::vector<Eigen::Index> offsets;  // one per local basis state of the targets
  std::vector<Eigen::Index> bases;    // one per basis state of the remaining modes
};

inline LocalLayout local_layout(int modes, Cutoff c, std::span<const int> targets) {
  for (std::size_t i = 0; i < targets.size(); ++i) {
    cvdqs::detail::require(targets[i] >= 0 && targets[i] < modes,
                           "mode index " + std::to_string(targets[i]) + " out of range for " +
                               std::to_string(modes) + " modes");
    for (std::size_t j = 0; j < i; ++j) {
      cvdqs::detail::require(targets[i] != targets[j], "mode indices must be distinct");
    }
  }
  const Eigen::Index d = c.dim();
  std::vector<Eigen::Index> stride(static_cast<std::size_t>(modes));
  Eigen::Index s = 1;
  for (int m = modes - 1; m >= 0; --m) {
    stride[static_cast<std::size_t>(m)] = s;
    s *= d;
  }

  LocalLayout layout;
  const std::size_t k = targets.size();
  Eigen::Index local = 1;
  for (std::size_t i = 0; i < k; ++i) local *= d;
  layout.offsets.resize(static_cast<std::size_t>(local));
  for (Eigen::Index l = 0; l < local; ++l) {
    Eigen::Index rem = l, off = 0;
    for (std::size_t i = k; i-- > 0;) {
      off += (rem % d) * stride[static_cast<std::size_t>(targets[i])];
      rem /= d;
    }
    layout.offsets[static_cast<std::size_t>(l)] = off;
  }

  std::vector<int> rest;
  for (int m = 0; m < modes; ++m) {
    if (std::find(targets.begin(), targets.end(), m) == targets.end()) rest.push_back(m);
  }
  Eigen::Index nb = 1;
  for (std::size_t i = 0; i < rest.size(); ++i) nb *= d;
  layout.bases.resize(static_cast<std::size_t>(nb));
  for (Eigen::Index b = 0; b < nb; ++b) {
    Eigen::Index rem = b, off = 0;
    for (std::size_t i = rest.size(); i-- > 0;) {
      off += (rem % d) * stride[static_cast<std::size_t>(rest[i])];
      rem /= d;
    }
    layout.bases[static_cast<std::size_t>(b)] = off;
  }
  return layout;
}

// Left-multiplies every column of `states` by `op` acting on the target modes.
inline void apply_local_columns(CMatrix& states, const CMatrix& op, const LocalLayout& layout) {
  const auto local = static_cast<Eigen::Index>(layout.offsets.size());
  const auto nb = static_cast<Eigen::Index>(layout.bases.size());
  const Eigen::Index ncols = states.cols();
  CMatrix gathered(local, nb * ncols);
  for (Eigen::Index j = 0; j < ncols; ++j) {
    for (Eigen::Index b = 0; b < nb; ++b) {
      const Eigen::Index base = layout.bases[static_cast<std::size_t>(b)];
      for (Eigen::Index l = 0; l < local; ++l) {
        gathered(l, j * nb + b) = states(base + layout.offsets[static_cast<std::size_t>(l)], j);
      }
    }
  }
  const CMatrix result = op * gathered;
  for (Eigen::Index j = 0; j < ncols; ++j) {
    for (Eigen::Index b = 0; b < nb; ++b) {
      const Eigen::Index base = layout.bases[static_cast<std::size_t>(b)];
      for (Eigen::Index l = 0; l < local; ++l) {
        states(base + layout.offsets[static_cast<std::size_t>(l)], j) = result(l, j * nb + b);
      }
    }
  }
}

inline CVector apply_local(const CVector& v, const CMatrix& op, int modes, Cutoff c,
                           std::span<const int> targets) {
  CMatrix m = v;
  apply_local_columns(m, op, local_layout(modes, c, targets));
  return m.col(0);
}

// op * rho * op^dag
inline CMatrix sandwich_local(const CMatrix& rho, const CMatrix& op, int modes, Cutoff c,
                              std::span<const int> targets) {
  const LocalLayout layout = local_layout(modes, c, targets);
  CMatrix left = rho;
  apply_local_columns(left, op, layout);
  // (A rho) A^dag = (A (A rho)^dag)^dag
  CMatrix right = left.adjoint();
  apply_local_columns(right, op, layout);
  return right.adjoint();
}

inline CMatrix left_local(const CMatrix& rho, const CMatrix& op, int modes, Cutoff c,
                          std::span<const int> targets) {
  CMatrix out = rho;
  apply_local_columns(out, op, local_layout(modes, c, targets));
  return out;
}

inline void require_cutoff(Cutoff state, Cutoff op) {
  cvdqs::detail::require(state == op, "operator cutoff does not match state cutoff");
}

}  // namespace detail

// Single-mode operator on `mode`.
inline FockVector apply(const ModeOperator& op, int mode, const FockVector& psi) {
  detail::require_cutoff(psi.cutoff(), op.cutoff());
  const int t[] = {mode};
  return {psi.modes(), psi.cutoff(), detail::apply_local(psi.amplitudes(), op.matrix(), psi.modes(), psi.cutoff(), t)};
}

inline FockVector apply(const TwoModeOperator& op, int first, int second, const FockVector& psi) {
  detail::require_cutoff(psi.cutoff(), op.cutoff());
  const int t[] = {first, second};
  return {psi.modes(), psi.cutoff(), detail::apply_local(psi.amplitudes(), op.matrix(), psi.modes(), psi.cutoff(), t)};
}

// op rho op^dag; for a pure state this is op|psi>.
inline FockVector sandwich(const ModeOperator& op, int mode, const FockVector& psi) { return apply(op, mode, psi); }

inline FockDensity sandwich(const ModeOperator& op, int mode, const FockDensity& rho) {
  detail::require_cutoff(rho.cutoff(), op.cutoff());
  const int t[] = {mode};
  return {rho.modes(), rho.cutoff(), detail::sandwich_local(rho.matrix(), op.matrix(), rho.modes(), rho.cutoff(), t)};
}

inline FockDensity sandwich(const TwoModeOperator& op, int first, int second, const FockDensity& rho) {
  detail::require_cutoff(rho.cutoff(), op.cutoff());
  const int t[] = {first, second};
  return {rho.modes(), rho.cutoff(), detail::sandwich_local(rho.matrix(), op.matrix(), rho.modes(), rho.cutoff(), t)};
}

inline FockEnsemble sandwich(const ModeOperator& op, int mode, const FockEnsemble& rho) {
  std::vector<FockVector> out;
  out.reserve(rho.branches().size());
  for (const auto& b : rho.branches()) out.push_back(apply(op, mode, b));
  return FockEnsemble(std::move(out));
}

inline FockEnsemble sandwich(const TwoModeOperator& op, int first, int second, const FockEnsemble& rho) {
  std::vector<FockVector> out;
  out.reserve(rho.branches().size());
  for (const auto& b : rho.branches()) out.push_back(apply(op, first, second, b));
  return FockEnsemble(std::move(out));
}

// ---------------------------------------------------------------------------
// Sources and channels
// ---------------------------------------------------------------------------

// Single-mode squeezed vacuum with mean photon number n_s, squeezed along x:
//   c_{2k} = (-tanh r)^k sqrt((2k)!) / (2^k k! sqrt(cosh r)),  sinh^2 r = n_s.
inline FockVector sv_fock(double n_s, Cutoff c) {
  detail::require(n_s >= 0.0 && std::isfinite(n_s), "sv_fock: mean photon number must be >= 0");
  const double r = std::asinh(std::sqrt(n_s));
  const double t = std::tanh(r);
  CVector v = CVector::Zero(c.dim());
  double amp = 1.0 / std::sqrt(std::cosh(r));
  v(0) = amp;
  for (int k = 1; 2 * k <= c.n_max(); ++k) {
    amp *= -t * std::sqrt((2.0 * k - 1.0) / (2.0 * k));
    v(2 * k) = amp;
  }
  return {1, c, std::move(v)};
}

// Smallest even cutoff at which the squeezed-vacuum tail weight drops below
// `tail`, capped at `max_cutoff`.
inline Cutoff sv_working_cutoff(double n_s, double tail = 1e-16, int min_cutoff = 2, int max_cutoff = 400) {
  detail::require(n_s >= 0.0, "sv_working_cutoff: mean photon number must be >= 0");
  const double r = std::asinh(std::sqrt(n_s));
  const double t = std::tanh(r);
  double weight = 1.0 / std::cosh(r);
  double remaining = 1.0 - weight;
  int n = 0;
  while (n < max_cutoff && remaining > tail) {
    n += 2;
    weight *= t * t * (n - 1.0) / n;
    remaining -= weight;
  }
  return Cutoff(std::clamp(std::max(n, 2), min_cutoff, max_cutoff));
}

// Truncates or zero-pads every mode to a new cutoff.
inline FockVector with_cutoff(const FockVector& psi, Cutoff target) {
  CVector out = CVector::Zero(space_dim(psi.modes(), target));
  const int keep = std::min(psi.cutoff().n_max(), target.n_max());
  for (Eigen::Index i = 0; i < psi.dim(); ++i) {
    if (psi[i] == Complex(0.0)) continue;
    const auto occ = occupations(i, psi.modes(), psi.cutoff());
    if (std::any_of(occ.begin(), occ.end(), [keep](int n) { return n > keep; })) continue;
    out(basis_index(occ, target)) = psi[i];
  }
  return {psi.modes(), target, std::move(out)};
}

inline FockEnsemble with_cutoff(const FockEnsemble& rho, Cutoff target) {
  std::vector<FockVector> out;
  out.reserve(rho.branches().size());
  for (const auto& b : rho.branches()) out.push_back(with_cutoff(b, target));
  return FockEnsemble(std::move(out));
}

// One empty level on top. Quadratic moments of x and p evaluated at the
// larger cutoff are exact for the original state: the truncated x^2 misses
// the n_max -> n_max + 1 coupling.
template <class State>
State with_headroom(const State& s) {
  return with_cutoff(s, Cutoff(s.cutoff().n_max() + 1));
}

inline TwoModeOperator beamsplitter_unitary(double theta, Cutoff c) {
  const ModeOperator a = ModeOperator::annihilation(c);
  const ModeOperator ad = a.adjoint();
  // a^dag b - a b^dag on the truncated pair space
  const CMatrix gen = Eigen::kroneckerProduct(ad.matrix(), a.matrix()).eval() -
                      Eigen::kroneckerProduct(a.matrix(), ad.matrix()).eval();
  const CMatrix scaled = theta * gen;
  return {c, scaled.exp()};
}

// Unitary evolution: U|psi> for pure states, U rho U^dag for mixed ones.
inline FockVector evolve(const TwoModeOperator& u, int first, int second, const FockVector& psi) {
  return apply(u, first, second, psi);
}
inline FockDensity evolve(const TwoModeOperator& u, int first, int second, const FockDensity& rho) {
  return sandwich(u, first, second, rho);
}
inline FockEnsemble evolve(const TwoModeOperator& u, int first, int second, const FockEnsemble& rho) {
  return sandwich(u, first, second, rho);
}

// exp(theta (a^dag b - a b^dag)) with a = mode_a, b = mode_b. Exact on every
// photon-number sector whose total fits within the cutoff.
template <class State>
State beamsplitter(double theta, int mode_a, int mode_b, const State& state) {
  detail::require(mode_a != mode_b, "beamsplitter: modes must differ");
  return evolve(beamsplitter_unitary(theta, state.cutoff()), mode_a, mode_b, state);
}

// Mixing angles of the chain (0,1), (0,2), ..., (0,M-1) that spreads mode 0
// uniformly: stage k taps 1/sqrt(M) of the original amplitude into mode k.
// Angles are negative so every output mode receives +1/sqrt(M).
inline std::vector<double> balanced_splitter_angles(int modes) {
  detail::require(modes >= 1, "balanced_splitter: M must be >= 1");
  std::vector<double> angles;
  for (int k = 1; k < modes; ++k) {
    angles.push_back(-std::asin(1.0 / std::sqrt(static_cast<double>(modes - k + 1))));
  }
  return angles;
}

template <class State>
State balanced_splitter(int modes, const State& state) {
  detail::require(modes >= 1, "balanced_splitter: M must be >= 1");
  detail::require(state.modes() == modes, "balanced_splitter: state has " + std::to_string(state.modes()) +
                                              " modes, expected " + std::to_string(modes));
  State out = state;
  const auto angles = balanced_splitter_angles(modes);
  for (int k = 1; k < modes; ++k) out = beamsplitter(angles[static_cast<std::size_t>(k - 1)], 0, k, out);
  return out;
}

namespace detail {
inline double binomial(int n, int k) {
  double b = 1.0;
  for (int i = 1; i <= k; ++i) b = b * (n - k + i) / i;
  return b;
}
}  // namespace detail

// E_k = sum_n sqrt(C(n,k) (1-eta)^k eta^(n-k)) |n-k><n|, k = 0..n_max.
inline std::vector<ModeOperator> loss_kraus(double eta, Cutoff c) {
  detail::require(eta >= 0.0 && eta <= 1.0, "pure_loss: transmissivity must lie in [0,1], got " + std::to_string(eta));
  std::vector<ModeOperator> ks;
  for (int k = 0; k <= c.n_max(); ++k) {
    CMatrix e = CMatrix::Zero(c.dim(), c.dim());
    for (int n = k; n <= c.n_max(); ++n) {
      e(n - k, n) = std::sqrt(detail::binomial(n, k) * std::pow(1.0 - eta, k) * std::pow(eta, n - k));
    }
    ks.emplace_back(c, std::move(e));
  }
  return ks;
}

inline FockDensity pure_loss(double eta, int mode, const FockDensity& rho) {
  const auto ks = loss_kraus(eta, rho.cutoff());
  CMatrix acc = CMatrix::Zero(rho.dim(), rho.dim());
  for (const auto& k : ks) acc += sandwich(k, mode, rho).matrix();
  return {rho.modes(), rho.cutoff(), std::move(acc)};
}

// Kraus-branch form; branches with zero weight are dropped.
inline FockEnsemble pure_loss(double eta, int mode, const FockEnsemble& rho) {
  const auto ks = loss_kraus(eta, rho.cutoff());
  std::vector<FockVector> out;
  for (const auto& b : rho.branches()) {
    for (const auto& k : ks) {
      FockVector branch = apply(k, mode, b);
      if (branch.squared_norm() > 0.0) out.push_back(std::move(branch));
    }
  }
  if (out.empty()) out.push_back(FockVector(rho.modes(), rho.cutoff(), CVector::Zero(rho.branches().front().dim())));
  return FockEnsemble(std::move(out));
}

inline FockEnsemble pure_loss(double eta, int mode, const FockVector& psi) {
  return pure_loss(eta, mode, FockEnsemble(psi));
}

// Truncated exp(alpha a^dag - conj(alpha) a); accurate only well below the cutoff.
inline ModeOperator displacement(Complex alpha, Cutoff c) {
  const ModeOperator a = ModeOperator::annihilation(c);
  const CMatrix gen = alpha * a.adjoint().matrix() - std::conj(alpha) * a.matrix();
  return {c, gen.exp()};
}

// ---------------------------------------------------------------------------
// Observables
// ---------------------------------------------------------------------------

// Sum of weighted single-mode operators, sum_t w_t O_t(mode_t).
class Observable {
 public:
  struct Term {
    int mode;
    ModeOperator op;
    Complex weight;
  };

  Observable() = default;
  Observable(int mode, ModeOperator op, Complex weight = 1.0) { add(mode, std::move(op), weight); }

  // (1/M) sum_m op_m
  static Observable mode_average(const ModeOperator& op, int modes) {
    Observable o;
    for (int m = 0; m < modes; ++m) o.add(m, op, 1.0 / modes);
    return o;
  }
  static Observable mode_sum(const ModeOperator& op, int modes) {
    Observable o;
    for (int m = 0; m < modes; ++m) o.add(m, op, 1.0);
    return o;
  }

  Observable& add(int mode, ModeOperator op, Complex weight = 1.0) {
    if (!terms_.empty()) {
      detail::require(op.cutoff() == terms_.front().op.cutoff(), "Observable: cutoff mismatch between terms");
    }
    terms_.push_back({mode, std::move(op), weight});
    return *this;
  }

  const std::vector<Term>& terms() const { return terms_; }

  bool is_hermitian(double tol = 1e-14) const {
    return std::all_of(terms_.begin(), terms_.end(), [tol](const Term& t) {
      return std::abs(t.weight.imag()) <= tol && (t.op.matrix() - t.op.matrix().adjoint()).cwiseAbs().maxCoeff() <= tol;
    });
  }

  void check_shape(int modes, Cutoff c) const {
    detail::require(!terms_.empty(), "Observable: no terms");
    for (const auto& t : terms_) {
      detail::require(t.op.cutoff() == c, "observable/state cutoff mismatch");
      detail::require(t.mode >= 0 && t.mode < modes, "observable mode " + std::to_string(t.mode) +
                                                          " out of range for " + std::to_string(modes) + " modes");
    }
  }

  CVector apply(const CVector& v, int modes, Cutoff c) const {
    CVector out = CVector::Zero(v.size());
    for (const auto& t : terms_) {
      const int target[] = {t.mode};
      out += t.weight * fock::detail::apply_local(v, t.op.matrix(), modes, c, target);
    }
    return out;
  }

  CMatrix apply_left(const CMatrix& rho, int modes, Cutoff c) const {
    CMatrix out = CMatrix::Zero(rho.rows(), rho.cols());
    for (const auto& t : terms_) {
      const int target[] = {t.mode};
      out += t.weight * fock::detail::left_local(rho, t.op.matrix(), modes, c, target);
    }
    return out;
  }

 private:
  std::vector<Term> terms_;
};

namespace detail {

struct Moments {
  Complex first;
  Complex second;
};

inline Moments moments(const Observable& o, const FockVector& psi) {
  o.check_shape(psi.modes(), psi.cutoff());
  const CVector ov = o.apply(psi.amplitudes(), psi.modes(), psi.cutoff());
  const CVector oov = o.apply(ov, psi.modes(), psi.cutoff());
  return {psi.amplitudes().dot(ov), psi.amplitudes().dot(oov)};
}

inline Moments moments(const Observable& o, const FockDensity& rho) {
  o.check_shape(rho.modes(), rho.cutoff());
  const CMatrix orho = o.apply_left(rho.matrix(), rho.modes(), rho.cutoff());
  const CMatrix oorho = o.apply_left(orho, rho.modes(), rho.cutoff());
  return {orho.trace(), oorho.trace()};
}

inline Moments moments(const Observable& o, const FockEnsemble& rho) {
  Moments m{0.0, 0.0};
  for (const auto& b : rho.branches()) {
    const Moments mb = moments(o, b);
    m.first += mb.first;
    m.second += mb.second;
  }
  return m;
}

inline constexpr double kImaginaryTolerance = 1e-10;

inline double variance_from(const Moments& m, const Observable& o) {
  detail::require(o.is_hermitian(1e-12), "variance: observable must be Hermitian");
  const Complex v = m.second - m.first * m.first;
  if (std::abs(v.imag()) > kImaginaryTolerance) {
    throw ConsistencyError("variance: imaginary part " + std::to_string(v.imag()) + " exceeds tolerance");
  }
  return v.real();
}

}  // namespace detail

// Tr(rho O), with the state taken as given (no renormalization).
template <class State>
Complex expectation(const Observable& o, const State& state) {
  return detail::moments(o, state).first;
}

// Tr(rho O^2) - Tr(rho O)^2
template <class State>
double variance(const Observable& o, const State& state) {
  return detail::variance_from(detail::moments(o, state), o);
}

template <class State>
Complex expectation(const ModeOperator& op, int mode, const State& state) {
  return expectation(Observable(mode, op), state);
}

template <class State>
double variance(const ModeOperator& op, int mode, const State& state) {
  return variance(Observable(mode, op), state);
}

// Single-mode shorthand; the state must have exactly one mode.
template <class State>
Complex expectation(const ModeOperator& op, const State& state) {
  detail::require(state.modes() == 1, "expectation: single-mode operator needs a mode index for multimode states");
  return expectation(op, 0, state);
}

template <class State>
double variance(const ModeOperator& op, const State& state) {
  detail::require(state.modes() == 1, "variance: single-mode operator needs a mode index for multimode states");
  return variance(op, 0, state);
}

// ---------------------------------------------------------------------------
// State manipulation
// ---------------------------------------------------------------------------

inline FockVector tensor(const FockVector& a, const FockVector& b) {
  detail::require(a.cutoff() == b.cutoff(), "tensor: cutoff mismatch");
  return {a.modes() + b.modes(), a.cutoff(), Eigen::kroneckerProduct(a.amplitudes(), b.amplitudes()).eval()};
}

inline FockDensity tensor(const FockDensity& a, const FockDensity& b) {
  detail::require(a.cutoff() == b.cutoff(), "tensor: cutoff mismatch");
  return {a.modes() + b.modes(), a.cutoff(), Eigen::kroneckerProduct(a.matrix(), b.matrix()).eval()};
}

inline FockEnsemble tensor(const FockEnsemble& a, const FockVector& b) {
  std::vector<FockVector> out;
  out.reserve(a.branches().size());
  for (const auto& br : a.branches()) out.push_back(tensor(br, b));
  return FockEnsemble(std::move(out));
}

// Traces out `mode`, leaving the remaining modes in their original order.
inline FockDensity partial_trace(const FockDensity& rho, int mode) {
  detail::require(rho.modes() >= 2, "partial_trace: need at least two modes");
  const int t[] = {mode};
  const auto layout = detail::local_layout(rho.modes(), rho.cutoff(), t);
  const auto nb = static_cast<Eigen::Index>(layout.bases.size());
  CMatrix out = CMatrix::Zero(nb, nb);
  for (Eigen::Index i = 0; i < nb; ++i) {
    for (Eigen::Index j = 0; j < nb; ++j) {
      Complex s = 0.0;
      for (const auto off : layout.offsets) {
        s += rho(layout.bases[static_cast<std::size_t>(i)] + off, layout.bases[static_cast<std::size_t>(j)] + off);
      }
      out(i, j) = s;
    }
  }
  return {rho.modes() - 1, rho.cutoff(), std::move(out)};
}

template <class State>
struct Normalized {
  State state;
  double factor;  // trace (or squared norm) before rescaling
};

inline Normalized<FockDensity> normalize(const FockDensity& rho) {
  const double tr = rho.trace();
  if (!(tr > 0.0)) throw ZeroSuccessError("normalize: state has zero trace");
  return {FockDensity(rho.modes(), rho.cutoff(), rho.matrix() / tr), tr};
}

inline Normalized<FockVector> normalize(const FockVector& psi) {
  const double n2 = psi.squared_norm();
  if (!(n2 > 0.0)) throw ZeroSuccessError("normalize: state has zero norm");
  return {FockVector(psi.modes(), psi.cutoff(), psi.amplitudes() / std::sqrt(n2)), n2};
}

inline Normalized<FockEnsemble> normalize(const FockEnsemble& rho) {
  const double tr = rho.trace();
  if (!(tr > 0.0)) throw ZeroSuccessError("normalize: state has zero trace");
  std::vector<FockVector> out;
  out.reserve(rho.branches().size());
  const double s = 1.0 / std::sqrt(tr);
  for (const auto& b : rho.branches()) out.emplace_back(b.modes(), b.cutoff(), b.amplitudes() * s);
  return {FockEnsemble(std::move(out)), tr};
}

struct DensityCheck {
  double hermiticity_error;  // max |rho - rho^dag|
  double trace;
  double min_eigenvalue;

  bool ok(double herm_tol = 1e-12, double eig_floor = -1e-10) const {
    return hermiticity_error <= herm_tol && min_eigenvalue >= eig_floor;
  }
};

inline DensityCheck check_density(const FockDensity& rho) {
  const CMatrix& m = rho.matrix();
  const double herm = (m - m.adjoint()).cwiseAbs().maxCoeff();
  const CMatrix sym = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(sym, Eigen::EigenvaluesOnly);
  return {herm, rho.trace(), es.eigenvalues().minCoeff()};
}

}  // namespace cvdqs::fock
