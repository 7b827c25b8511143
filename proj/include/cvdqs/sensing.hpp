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

// End-to-end sensing pipelines for estimating a common displacement with M
// homodyne sensors, closed-form sensitivities, and Cramer-Rao bounds.
//
// The displacement itself never enters numerically: every pipeline state has
// zero mean quadratures and variances are displacement invariant, so the rms
// error of the averaged estimator (1/M) sum_m x_m is sqrt(Var(xbar)) of the
// probe.

#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cvdqs/error.hpp"
#include "cvdqs/fock.hpp"
#include "cvdqs/gaussian.hpp"
#include "cvdqs/nla.hpp"

namespace cvdqs::sensing {

using fock::Cutoff;

enum class Scheme { entangled_ideal_nla, entangled_no_nla, entangled_practical_nla, product_optimal };

inline constexpr Scheme kAllSchemes[] = {Scheme::entangled_ideal_nla, Scheme::entangled_no_nla,
                                         Scheme::entangled_practical_nla, Scheme::product_optimal};

inline std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::entangled_no_nla: return "entangled_no_nla";
    case Scheme::entangled_ideal_nla: return "entangled_ideal_nla";
    case Scheme::entangled_practical_nla: return "entangled_practical_nla";
    case Scheme::product_optimal: return "product_optimal";
  }
  return "unknown";
}

// Tolerance on sum_m |<x_m>| for the zero-mean premise of the estimator.
inline constexpr double kUnbiasedTolerance = 1e-10;
// Default cutoff for NLA-free Fock simulations.
inline constexpr int kNoNlaCutoff = 8;

struct ScenarioConfig {
  int M = 4;
  double n_s = 0.04;
  double eta = 0.5;
  std::optional<nla::NlaSpec> nla;
  std::optional<int> cutoff;
  Scheme scheme = Scheme::entangled_no_nla;
  double eta_local = 1.0;  // product baseline only
  double truncation_tolerance = fock::kDefaultTruncationTolerance;

  void validate() const {
    detail::require(M >= 1, "scenario: M must be >= 1");
    detail::require(n_s >= 0.0 && std::isfinite(n_s), "scenario: N_S must be >= 0");
    detail::require(eta > 0.0 && eta <= 1.0, "scenario: eta must lie in (0,1]");
    detail::require(eta_local > 0.0 && eta_local <= 1.0, "scenario: eta_local must lie in (0,1]");
    if (nla) nla->validate();
    if (cutoff) detail::require(*cutoff >= 1, "scenario: cutoff must be >= 1");
    if (scheme == Scheme::entangled_practical_nla) {
      detail::require(nla && nla->kind == nla::NlaKind::practical, "scenario: practical scheme needs a practical NLA spec");
      if (cutoff) {
        detail::require(*cutoff >= nla->scissors, "scenario: cutoff " + std::to_string(*cutoff) +
                                                      " is below the scissor count " + std::to_string(nla->scissors));
      }
    }
    if (scheme == Scheme::entangled_ideal_nla) {
      detail::require(nla && nla->kind == nla::NlaKind::ideal, "scenario: ideal scheme needs an ideal NLA spec");
    }
  }

  // Practical NLA outputs hold at most N photons per mode, hence N*M in total;
  // a per-mode cutoff of N*M represents every contributing photon sector.
  int effective_cutoff() const {
    if (cutoff) return *cutoff;
    if (scheme == Scheme::entangled_practical_nla && nla) return std::max(5, nla->scissors * M);
    return kNoNlaCutoff;
  }
};

struct SensitivityPoint {
  Scheme scheme = Scheme::entangled_no_nla;
  double probe_power = 0.0;
  double delta_alpha = 0.0;
  double p_success = 1.0;
  std::optional<int> cutoff;  // set for Fock-simulated points
  double trunc_deficit = 0.0;
  bool zero_success_idealization = false;  // ideal NLA: p_success is 0 by construction
};

// ---------------------------------------------------------------------------
// Closed forms
// ---------------------------------------------------------------------------

namespace detail {
using cvdqs::detail::require;
inline double sqrt_sum(double n) { return std::sqrt(n + 1.0) + std::sqrt(n); }
}  // namespace detail

// (1/2) sqrt( eta / (M (sqrt(N+1)+sqrt(N))^2) + (1-eta)/M )
inline double delta_alpha_entangled(int M, double n_s, double eta) {
  cvdqs::detail::require(M >= 1, "M must be >= 1");
  cvdqs::detail::require(n_s >= 0.0, "N_S must be >= 0");
  cvdqs::detail::require(eta >= 0.0 && eta <= 1.0, "eta must lie in [0,1]");
  const double s = detail::sqrt_sum(n_s);
  return 0.5 * std::sqrt(eta / (M * s * s) + (1.0 - eta) / M);
}

// M identical squeezed vacua sharing n_total photons, each behind eta_local.
inline double delta_alpha_product(int M, double n_total, double eta_local = 1.0) {
  return delta_alpha_entangled(M, n_total / M, eta_local);
}

// Ideal NLAs of gain g at every node, evaluated through the effective channel.
inline SensitivityPoint delta_alpha_ideal_nla(int M, double n_s, double eta, double g) {
  const auto ch = nla::effective_channel(g, eta);
  const double n_eff = nla::effective_sv_photons(n_s, ch.g_eff);
  SensitivityPoint pt;
  pt.scheme = Scheme::entangled_ideal_nla;
  pt.probe_power = n_eff * ch.eta_eff;
  pt.delta_alpha = delta_alpha_entangled(M, n_eff, ch.eta_eff);
  pt.p_success = 0.0;
  pt.zero_success_idealization = true;
  return pt;
}

// Probe power N_eff * eta_eff reached by ideal NLAs of gain g.
inline double ideal_nla_probe_power(double n_s, double eta, double g) {
  const auto ch = nla::effective_channel(g, eta);
  return nla::effective_sv_photons(n_s, ch.g_eff) * ch.eta_eff;
}

// Gain at which ideal NLAs deliver the requested probe power (bisection on
// the monotone map g -> N_eff eta_eff below the physicality boundary).
inline double ideal_nla_gain_for_power(double n_s, double eta, double power) {
  cvdqs::detail::require(n_s > 0.0, "ideal_nla_gain_for_power: N_S must be > 0");
  const double p_min = n_s * eta;
  cvdqs::detail::require(power >= p_min, "ideal_nla_gain_for_power: power below the unamplified probe power");
  // g_eff^2 tanh r = 1  <=>  1 + (g^2 - 1) eta = 1 / tanh r
  const double tanh_r = std::sqrt(n_s / (n_s + 1.0));
  const double g_edge = std::sqrt(1.0 + (1.0 / tanh_r - 1.0) / eta);
  double lo = 1.0, hi = g_edge;
  for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    double p;
    try {
      p = ideal_nla_probe_power(n_s, eta, mid);
    } catch (const PhysicalityError&) {
      hi = mid;
      continue;
    }
    (p < power ? lo : hi) = mid;
  }
  return lo;
}

inline double crlb_entangled(int M, double n_s, double eta) {
  cvdqs::detail::require(M >= 1 && n_s >= 0.0 && eta >= 0.0 && eta <= 1.0, "crlb_entangled: invalid arguments");
  const double s = detail::sqrt_sum(n_s);
  return 0.5 / std::sqrt(M * eta * s * s + M * (1.0 - eta));
}

inline double crlb_product(int M, double n_s, double eta) { return crlb_entangled(M, n_s / M, eta); }

// 10 log10(delta_p^2 / delta_e^2)
inline double advantage_db(double delta_p, double delta_e) {
  cvdqs::detail::require(delta_p > 0.0 && delta_e > 0.0, "advantage_db: errors must be positive");
  return 10.0 * std::log10(delta_p * delta_p / (delta_e * delta_e));
}

// ---------------------------------------------------------------------------
// Quantum Fisher information for exp(-i alpha sum_m p_m)
// ---------------------------------------------------------------------------

// 4 Var(sum_m p_m), exact for pure states. The state is normalized first.
inline double qfi_pure_displacement(const fock::FockVector& psi) {
  const auto n = fock::normalize(fock::with_headroom(psi));
  const auto q = fock::quadratures(n.state.cutoff());
  return 4.0 * fock::variance(fock::Observable::mode_sum(q.p, psi.modes()), n.state);
}

// Same quantity from a covariance matrix; for mixed states it is the
// convexity upper bound on the QFI.
inline double qfi_pure_displacement(const gaussian::GaussianState& st) {
  return 4.0 * gaussian::sum_p_variance_fock(st);
}

// ---------------------------------------------------------------------------
// Fock pipelines
// ---------------------------------------------------------------------------

struct LossySource {
  fock::FockEnsemble state;  // single mode, truncated to the simulation cutoff
  double deficit;            // 1 - trace after truncation
};

// SV(n_s) through loss eta, built at a working cutoff wide enough that the
// source tail is below 1e-16, then truncated to `c`.
inline LossySource lossy_source(double n_s, double eta, Cutoff c) {
  const Cutoff work(std::max(c.n_max(), fock::sv_working_cutoff(n_s).n_max()));
  const auto lossy = fock::pure_loss(eta, 0, fock::sv_fock(n_s, work));
  auto truncated = fock::with_cutoff(lossy, c);
  const double deficit = 1.0 - truncated.trace();
  return {std::move(truncated), deficit};
}

struct ProbeStatistics {
  double delta_alpha;
  double probe_power;
  double max_abs_mean_x;
};

// Statistics of a normalized M-mode probe, evaluated with one level of
// headroom so the quadrature variance is exact for the truncated state.
template <class State>
ProbeStatistics probe_statistics(const State& state) {
  const State rho = fock::with_headroom(state);
  const int M = rho.modes();
  const auto q = fock::quadratures(rho.cutoff());
  const auto n_op = fock::ModeOperator::number(rho.cutoff());
  double power = 0.0, max_mean = 0.0;
  for (int m = 0; m < M; ++m) {
    power += fock::expectation(n_op, m, rho).real();
    max_mean = std::max(max_mean, std::abs(fock::expectation(q.x, m, rho)));
  }
  const double var = fock::variance(fock::Observable::mode_average(q.x, M), rho);
  return {std::sqrt(var), power, max_mean};
}

namespace detail {

inline void check_unbiased(const ProbeStatistics& st) {
  if (st.max_abs_mean_x > kUnbiasedTolerance) {
    throw ConsistencyError("probe has nonzero mean quadrature " + std::to_string(st.max_abs_mean_x) +
                           "; the averaged homodyne estimator would be biased");
  }
}

inline void check_deficit(double deficit, double tol, int cutoff) {
  if (deficit > tol) {
    throw TruncationError("truncation deficit " + std::to_string(deficit) + " exceeds tolerance " +
                          std::to_string(tol) + " at cutoff " + std::to_string(cutoff) + "; increase the cutoff");
  }
}

// Lossy source spread over M modes by the balanced network. Loss is applied
// to the source before splitting; identical loss on every mode commutes with
// the network.
inline fock::FockEnsemble distributed_probe(const ScenarioConfig& cfg, Cutoff c, double& deficit) {
  auto src = lossy_source(cfg.n_s, cfg.eta, c);
  deficit = src.deficit;
  check_deficit(deficit, cfg.truncation_tolerance, c.n_max());
  if (cfg.M == 1) return std::move(src.state);
  const auto joint = fock::tensor(src.state, fock::FockVector::vacuum(cfg.M - 1, c));
  return fock::balanced_splitter(cfg.M, joint);
}

}  // namespace detail

inline SensitivityPoint simulate_practical(const ScenarioConfig& cfg) {
  detail::require(cfg.scheme == Scheme::entangled_practical_nla, "simulate_practical: scheme must be entangled_practical_nla");
  cfg.validate();
  const Cutoff c(cfg.effective_cutoff());
  detail::require(c.n_max() >= cfg.nla->scissors, "simulate_practical: cutoff below scissor count");

  double deficit = 0.0;
  const auto probe = detail::distributed_probe(cfg, c, deficit);
  const std::vector<nla::NlaSpec> specs(static_cast<std::size_t>(cfg.M), *cfg.nla);
  const auto out = nla::apply_practical_nla(probe, specs);
  const auto st = probe_statistics(out.state);
  detail::check_unbiased(st);

  SensitivityPoint pt;
  pt.scheme = Scheme::entangled_practical_nla;
  pt.probe_power = st.probe_power;
  pt.delta_alpha = st.delta_alpha;
  pt.p_success = out.p_success;
  pt.cutoff = c.n_max();
  pt.trunc_deficit = deficit;
  return pt;
}

// NLA-free pipeline in the Fock kernel; cross-checks the closed form.
inline SensitivityPoint simulate_no_nla_fock(const ScenarioConfig& cfg) {
  cfg.validate();
  const Cutoff c(cfg.cutoff.value_or(kNoNlaCutoff));
  double deficit = 0.0;
  const auto probe = detail::distributed_probe(cfg, c, deficit);
  const auto normalized = fock::normalize(probe);
  const auto st = probe_statistics(normalized.state);
  detail::check_unbiased(st);

  SensitivityPoint pt;
  pt.scheme = Scheme::entangled_no_nla;
  pt.probe_power = st.probe_power;
  pt.delta_alpha = st.delta_alpha;
  pt.p_success = 1.0;
  pt.cutoff = c.n_max();
  pt.trunc_deficit = deficit;
  return pt;
}

// Dispatch on cfg.scheme. Closed forms are used wherever they are exact.
inline SensitivityPoint evaluate(const ScenarioConfig& cfg) {
  cfg.validate();
  switch (cfg.scheme) {
    case Scheme::entangled_no_nla: {
      SensitivityPoint pt;
      pt.scheme = cfg.scheme;
      pt.probe_power = cfg.n_s * cfg.eta;
      pt.delta_alpha = delta_alpha_entangled(cfg.M, cfg.n_s, cfg.eta);
      return pt;
    }
    case Scheme::entangled_ideal_nla:
      return delta_alpha_ideal_nla(cfg.M, cfg.n_s, cfg.eta, cfg.nla->gain);
    case Scheme::entangled_practical_nla:
      return simulate_practical(cfg);
    case Scheme::product_optimal: {
      SensitivityPoint pt;
      pt.scheme = cfg.scheme;
      pt.probe_power = cfg.n_s * cfg.eta_local;
      pt.delta_alpha = delta_alpha_product(cfg.M, cfg.n_s, cfg.eta_local);
      return pt;
    }
  }
  throw DomainError("evaluate: unknown scheme");
}

}  // namespace cvdqs::sensing
