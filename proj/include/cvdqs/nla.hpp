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

// Noiseless linear amplification: the effective-channel algebra for the
// ideal amplifier g^n, the truncated scissor-based operator T = Pi_N g^n, and
// a circuit-level single-scissor simulation used to validate T for N = 1.

#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "cvdqs/error.hpp"
#include "cvdqs/fock.hpp"

namespace cvdqs::nla {

using fock::Cutoff;
using fock::ModeOperator;

enum class NlaKind { ideal, practical };

struct NlaSpec {
  NlaKind kind = NlaKind::ideal;
  double gain = 1.0;
  int scissors = 0;  // practical only

  static NlaSpec ideal(double g) {
    NlaSpec s{NlaKind::ideal, g, 0};
    s.validate();
    return s;
  }
  static NlaSpec practical(double g, int n) {
    NlaSpec s{NlaKind::practical, g, n};
    s.validate();
    return s;
  }

  void validate() const {
    detail::require(std::isfinite(gain) && gain >= 1.0,
                    "NLA gain must be >= 1 (noiseless attenuation is not supported), got " + std::to_string(gain));
    if (kind == NlaKind::practical) detail::require(scissors >= 1, "practical NLA needs at least one scissor");
  }
};

struct EffectiveChannel {
  double g_eff;
  double eta_eff;
};

namespace detail {
using cvdqs::detail::require;
inline void check_gain_eta(double g, double eta) {
  cvdqs::detail::require(std::isfinite(g) && g >= 1.0, "NLA gain must be >= 1, got " + std::to_string(g));
  cvdqs::detail::require(eta > 0.0 && eta <= 1.0, "transmissivity must lie in (0,1], got " + std::to_string(eta));
}
}  // namespace detail

// Loss eta followed by NLA g equals NLA g_eff followed by loss eta_eff.
inline double effective_gain(double g, double eta) {
  detail::check_gain_eta(g, eta);
  return std::sqrt(1.0 + (g * g - 1.0) * eta);
}

inline double effective_transmissivity(double g, double eta) {
  detail::check_gain_eta(g, eta);
  return g * g * eta / (1.0 + (g * g - 1.0) * eta);
}

inline EffectiveChannel effective_channel(double g, double eta) {
  return {effective_gain(g, eta), effective_transmissivity(g, eta)};
}

// lambda = g_eff^2 tanh(r); the amplified squeezed vacuum exists iff lambda < 1.
inline double squeezing_after_gain(double n_s, double g_eff) {
  cvdqs::detail::require(n_s >= 0.0, "mean photon number must be >= 0");
  cvdqs::detail::require(g_eff >= 1.0, "effective gain must be >= 1");
  return g_eff * g_eff * std::sqrt(n_s / (n_s + 1.0));
}

// Mean photon number of g_eff^n applied to SV(n_s):
//   sqrt(N_eff / (N_eff + 1)) = g_eff^2 sqrt(n_s / (n_s + 1)).
inline double effective_sv_photons(double n_s, double g_eff) {
  const double lambda = squeezing_after_gain(n_s, g_eff);
  if (lambda >= 1.0) {
    throw PhysicalityError("unphysical NLA gain for this source brightness: g_eff^2 sqrt(N_S/(N_S+1)) = " +
                           std::to_string(lambda) + " >= 1");
  }
  return lambda * lambda / (1.0 - lambda * lambda);
}

// N! / ((N-n)! N^n), n = 0..N
inline std::vector<double> projector_coefficients(int scissors) {
  cvdqs::detail::require(scissors >= 1, "scissor count must be >= 1");
  std::vector<double> c(static_cast<std::size_t>(scissors + 1));
  c[0] = 1.0;
  for (int n = 1; n <= scissors; ++n) {
    c[static_cast<std::size_t>(n)] = c[static_cast<std::size_t>(n - 1)] * (scissors - n + 1) / scissors;
  }
  return c;
}

inline ModeOperator projector_pi(int scissors, double g, Cutoff c) {
  cvdqs::detail::require(std::isfinite(g) && g >= 1.0, "NLA gain must be >= 1");
  cvdqs::detail::require(scissors <= c.n_max(), "cutoff " + std::to_string(c.n_max()) +
                                                     " cannot hold the scissor truncation at N = " + std::to_string(scissors));
  const auto coeff = projector_coefficients(scissors);
  const double pref = std::pow(1.0 / (g * g + 1.0), 0.5 * scissors);
  std::vector<double> diag(static_cast<std::size_t>(c.dim()), 0.0);
  for (int n = 0; n <= scissors; ++n) diag[static_cast<std::size_t>(n)] = pref * coeff[static_cast<std::size_t>(n)];
  return ModeOperator::diagonal(c, diag);
}

// T = Pi_N g^n. Sub-normalized: T^dag T <= 1, so it is a valid Kraus element
// and Tr(T rho T) is the heralding probability.
inline ModeOperator nla_operator(int scissors, double g, Cutoff c) {
  const ModeOperator pi = projector_pi(scissors, g, c);
  std::vector<double> diag(static_cast<std::size_t>(c.dim()));
  for (int n = 0; n < c.dim(); ++n) diag[static_cast<std::size_t>(n)] = pi(n, n).real() * std::pow(g, n);
  return ModeOperator::diagonal(c, diag);
}

// g^n clipped at the cutoff. Unbounded in the limit, so only used for checks
// on states whose weight near the cutoff is negligible.
inline ModeOperator clipped_ideal_nla(double g, Cutoff c) {
  cvdqs::detail::require(std::isfinite(g) && g >= 1.0, "NLA gain must be >= 1");
  std::vector<double> diag(static_cast<std::size_t>(c.dim()));
  for (int n = 0; n < c.dim(); ++n) diag[static_cast<std::size_t>(n)] = std::pow(g, n);
  return ModeOperator::diagonal(c, diag);
}

// Reference line g^{-2N} for the best achievable success probability at
// high fidelity; reported only, no construction attains it here.
inline double optimal_success_reference(double g, int scissors) { return std::pow(g, -2.0 * scissors); }

template <class State>
struct PostSelected {
  State state;
  double p_success;  // joint probability that every NLA heralds
};

namespace detail {

template <class State>
State apply_all(const State& rho, std::span<const NlaSpec> specs) {
  cvdqs::detail::require(static_cast<int>(specs.size()) == rho.modes(),
                         "apply_practical_nla: need one NlaSpec per mode");
  State out = rho;
  for (int m = 0; m < rho.modes(); ++m) {
    const NlaSpec& s = specs[static_cast<std::size_t>(m)];
    s.validate();
    cvdqs::detail::require(s.kind == NlaKind::practical, "apply_practical_nla: ideal NLAs cannot be applied numerically");
    out = fock::sandwich(nla_operator(s.scissors, s.gain, rho.cutoff()), m, out);
  }
  return out;
}

}  // namespace detail

// rho_out = T rho T / Tr(T rho T) with T the tensor product of the per-mode
// operators; p_success = Tr(T rho T).
template <class State>
PostSelected<State> apply_practical_nla(const State& rho, std::span<const NlaSpec> specs) {
  const State unnorm = detail::apply_all(rho, specs);
  const double p = unnorm.trace();
  if (!(p > 0.0)) throw ZeroSuccessError("apply_practical_nla: zero success probability");
  auto n = fock::normalize(unnorm);
  return {std::move(n.state), p};
}

// ---------------------------------------------------------------------------
// Circuit-level quantum scissor
// ---------------------------------------------------------------------------
//
// Modes: 0 = input, 1 = ancilla arm, 2 = output. The ancilla photon enters
// mode 1 and meets BS1 (modes 1,2) with transmissivity gamma = 1/(1+g^2), so
// it stays in the arm with amplitude sqrt(gamma) and reaches the output with
// amplitude -sqrt(1-gamma). BS2 (modes 0,1) is balanced. Success means one
// photon in total at the two detectors.
//
// With our splitter convention the two herald patterns give
//   arm detector clicks:   K = sqrt(gamma/2) diag(1, +g)
//   input detector clicks: K = sqrt(gamma/2) diag(1, -g)
// The second pattern is phase-corrected by (-1)^n on the output, after
// which both patterns carry the same map, each with half the weight.

enum class ScissorHerald { arm_detector, input_detector };

// Conditional output map (output amplitudes, rows) for one herald pattern
// acting on input Fock states up to the cutoff (columns). Rows above n = 1
// are always zero.
inline ModeOperator scissor_kraus(double g, Cutoff c, ScissorHerald herald) {
  cvdqs::detail::require(std::isfinite(g) && g >= 1.0, "scissor gain must be >= 1");
  const double gamma = 1.0 / (1.0 + g * g);
  const double theta1 = std::acos(std::sqrt(gamma));
  const double theta2 = M_PI / 4.0;
  // Up to n_max + 1 photons pass through the circuit.
  const Cutoff circuit(c.n_max() + 1);
  const auto bs1 = fock::beamsplitter_unitary(theta1, circuit);
  const auto bs2 = fock::beamsplitter_unitary(theta2, circuit);
  const int click_in = herald == ScissorHerald::input_detector ? 1 : 0;
  const int click_arm = 1 - click_in;

  fock::CMatrix k = fock::CMatrix::Zero(c.dim(), c.dim());
  for (int m = 0; m <= c.n_max(); ++m) {
    fock::FockVector psi = fock::FockVector::basis(circuit, {m, 1, 0});
    psi = fock::apply(bs1, 1, 2, psi);
    psi = fock::apply(bs2, 0, 1, psi);
    for (int out = 0; out <= c.n_max(); ++out) {
      k(out, m) = psi.amplitude({click_in, click_arm, out});
    }
  }
  return {c, std::move(k)};
}

// Success map of the scissor with both herald patterns merged after phase
// correction: sqrt(2) times the arm-detector map. Its square gives the full
// heralding probability, so it is directly comparable with nla_operator(1, g).
inline ModeOperator scissor_success_operator(double g, Cutoff c) {
  return std::complex<double>(std::sqrt(2.0), 0.0) * scissor_kraus(g, c, ScissorHerald::arm_detector);
}

// Unnormalized conditional output of one scissor on a single-mode input.
inline fock::FockVector scissor_oracle(double g, const fock::FockVector& input) {
  cvdqs::detail::require(input.modes() == 1, "scissor_oracle: single-mode input required");
  return fock::apply(scissor_success_operator(g, input.cutoff()), 0, input);
}

}  // namespace cvdqs::nla
