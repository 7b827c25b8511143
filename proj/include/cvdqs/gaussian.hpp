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

// Covariance-matrix engine for zero-mean Gaussian probes.
//
// Quadratures are ordered (x_0, p_0, x_1, p_1, ...) in the symmetric
// convention x = (a + a^dag)/2, p = (a - a^dag)/(2i), vacuum variance 1/4 for
// both. The Fock kernel's momentum is p_fock = -i(a - a^dag) = 2 p, so
// variances of p convert with kFockMomentumScale^2 = 4.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "cvdqs/error.hpp"
#include "cvdqs/fock.hpp"

namespace cvdqs::gaussian {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kVacuumVariance = 0.25;
inline constexpr double kFockMomentumScale = 2.0;

// Omega = direct sum of [[0, 1], [-1, 0]]
inline MatrixXd symplectic_form(int modes) {
  MatrixXd omega = MatrixXd::Zero(2 * modes, 2 * modes);
  for (int m = 0; m < modes; ++m) {
    omega(2 * m, 2 * m + 1) = 1.0;
    omega(2 * m + 1, 2 * m) = -1.0;
  }
  return omega;
}

class GaussianState {
 public:
  GaussianState(VectorXd mean, MatrixXd cov) : mean_(std::move(mean)), cov_(std::move(cov)) {
    detail::require(cov_.rows() == cov_.cols() && cov_.rows() % 2 == 0 && cov_.rows() > 0,
                    "GaussianState: covariance must be 2M x 2M");
    detail::require(mean_.size() == cov_.rows(), "GaussianState: mean length must be 2M");
    detail::require((cov_ - cov_.transpose()).cwiseAbs().maxCoeff() <= 1e-12,
                    "GaussianState: covariance is not symmetric");
  }

  static GaussianState vacuum(int modes) {
    detail::require(modes >= 1, "GaussianState: mode count must be >= 1");
    return {VectorXd::Zero(2 * modes), kVacuumVariance * MatrixXd::Identity(2 * modes, 2 * modes)};
  }

  int modes() const { return static_cast<int>(cov_.rows() / 2); }
  const VectorXd& mean() const { return mean_; }
  const MatrixXd& cov() const { return cov_; }

  double x_variance(int mode) const { return cov_(2 * mode, 2 * mode); }
  double p_variance(int mode) const { return cov_(2 * mode + 1, 2 * mode + 1); }

  // 1 / sqrt(det(4 cov)); equals 1 for pure states in this convention.
  double purity() const { return 1.0 / std::sqrt((4.0 * cov_).determinant()); }

  // Smallest eigenvalue of cov + i Omega / 4; >= 0 for physical states.
  double uncertainty_margin() const {
    const Eigen::MatrixXcd h = cov_.cast<std::complex<double>>() +
                               std::complex<double>(0.0, 0.25) * symplectic_form(modes()).cast<std::complex<double>>();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }

 private:
  VectorXd mean_;
  MatrixXd cov_;
};

// cov = diag(e^{-2r}, e^{2r}) / 4 with sinh^2 r = n_s.
inline GaussianState sv_gaussian(double n_s) {
  detail::require(n_s >= 0.0 && std::isfinite(n_s), "sv_gaussian: mean photon number must be >= 0");
  const double r = std::asinh(std::sqrt(n_s));
  MatrixXd cov(2, 2);
  cov << kVacuumVariance * std::exp(-2.0 * r), 0.0, 0.0, kVacuumVariance * std::exp(2.0 * r);
  return {VectorXd::Zero(2), cov};
}

// Identical pure loss on every mode.
inline GaussianState loss_gaussian(const GaussianState& s, double eta) {
  detail::require(eta >= 0.0 && eta <= 1.0, "loss_gaussian: transmissivity must lie in [0,1]");
  const Eigen::Index n = s.cov().rows();
  return {std::sqrt(eta) * s.mean(), eta * s.cov() + (1.0 - eta) * kVacuumVariance * MatrixXd::Identity(n, n)};
}

inline GaussianState tensor(const GaussianState& a, const GaussianState& b) {
  const Eigen::Index na = a.cov().rows(), nb = b.cov().rows();
  VectorXd mean(na + nb);
  mean << a.mean(), b.mean();
  MatrixXd cov = MatrixXd::Zero(na + nb, na + nb);
  cov.topLeftCorner(na, na) = a.cov();
  cov.bottomRightCorner(nb, nb) = b.cov();
  return {std::move(mean), std::move(cov)};
}

// Heisenberg-picture quadrature map of exp(theta (a^dag b - a b^dag)):
//   a -> cos(theta) a + sin(theta) b,  b -> -sin(theta) a + cos(theta) b.
inline MatrixXd beamsplitter_symplectic(double theta, int mode_a, int mode_b, int modes) {
  detail::require(mode_a != mode_b && mode_a >= 0 && mode_b >= 0 && mode_a < modes && mode_b < modes,
                  "beamsplitter_symplectic: invalid mode indices");
  MatrixXd s = MatrixXd::Identity(2 * modes, 2 * modes);
  const double c = std::cos(theta), sn = std::sin(theta);
  for (int q = 0; q < 2; ++q) {
    const int ia = 2 * mode_a + q, ib = 2 * mode_b + q;
    s(ia, ia) = c;
    s(ia, ib) = sn;
    s(ib, ia) = -sn;
    s(ib, ib) = c;
  }
  return s;
}

inline GaussianState apply_symplectic(const GaussianState& st, const MatrixXd& s) {
  return {s * st.mean(), s * st.cov() * s.transpose()};
}

// The balanced network as one symplectic matrix, built from the same chain of
// two-mode splitters as fock::balanced_splitter.
inline MatrixXd balanced_splitter_symplectic(int modes) {
  MatrixXd s = MatrixXd::Identity(2 * modes, 2 * modes);
  const auto angles = fock::balanced_splitter_angles(modes);
  for (int k = 1; k < modes; ++k) {
    s = beamsplitter_symplectic(angles[static_cast<std::size_t>(k - 1)], 0, k, modes) * s;
  }
  return s;
}

// A single-mode input is padded with M-1 vacua; an M-mode input is used as is.
inline GaussianState splitter_gaussian(const GaussianState& st, int modes) {
  detail::require(modes >= 1, "splitter_gaussian: M must be >= 1");
  GaussianState in = st;
  if (st.modes() == 1 && modes > 1) in = tensor(st, GaussianState::vacuum(modes - 1));
  detail::require(in.modes() == modes, "splitter_gaussian: state mode count does not match M");
  return apply_symplectic(in, balanced_splitter_symplectic(modes));
}

// sqrt(Var((1/M) sum_m x_m))
inline double avg_x_std(const GaussianState& st) {
  const int m = st.modes();
  VectorXd w = VectorXd::Zero(2 * m);
  for (int k = 0; k < m; ++k) w(2 * k) = 1.0 / m;
  return std::sqrt(w.dot(st.cov() * w));
}

// Var(sum_m p_m) in the Fock kernel's p = -i(a - a^dag) convention.
inline double sum_p_variance_fock(const GaussianState& st) {
  const int m = st.modes();
  VectorXd w = VectorXd::Zero(2 * m);
  for (int k = 0; k < m; ++k) w(2 * k + 1) = kFockMomentumScale;
  return w.dot(st.cov() * w);
}

}  // namespace cvdqs::gaussian
