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

// Invariant suite behind the `validate` command.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cvdqs/fock.hpp"
#include "cvdqs/gaussian.hpp"
#include "cvdqs/nla.hpp"
#include "cvdqs/sensing.hpp"

namespace cvdqs::validate {

struct CheckResult {
  std::string name;
  bool passed;
  std::string detail;
};

struct Options {
  sensing::ScenarioConfig scenario = [] {
    sensing::ScenarioConfig c;
    c.scheme = sensing::Scheme::entangled_practical_nla;
    c.nla = nla::NlaSpec::practical(2.2, 2);
    return c;
  }();
  // Fault injection: scales the n = 1 entry of the practical operator by
  // (1 + projector_perturbation) wherever the suite builds it.
  double projector_perturbation = 0.0;
  std::uint32_t seed = 20240601;
};

namespace detail {

inline std::string sci(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

inline fock::ModeOperator practical_operator(int scissors, double g, fock::Cutoff c, double perturbation) {
  auto t = nla::nla_operator(scissors, g, c);
  if (perturbation == 0.0) return t;
  fock::CMatrix m = t.matrix();
  m(1, 1) *= 1.0 + perturbation;
  return {c, std::move(m)};
}

inline fock::FockVector random_two_mode(fock::Cutoff c, std::mt19937& rng) {
  // support on total photon number <= n_max, where the splitter is exact
  std::normal_distribution<double> nd;
  fock::CVector v = fock::CVector::Zero(fock::space_dim(2, c));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const auto occ = fock::occupations(i, 2, c);
    if (occ[0] + occ[1] <= c.n_max()) v(i) = {nd(rng), nd(rng)};
  }
  return {2, c, v / v.norm()};
}

}  // namespace detail

// Fock pipeline and covariance engine against the closed-form no-NLA error.
inline CheckResult engine_equivalence() {
  double fock_err = 0.0, gauss_err = 0.0;
  for (double eta : {0.3, 0.5, 1.0}) {
    sensing::ScenarioConfig cfg;
    cfg.M = 4;
    cfg.n_s = 0.04;
    cfg.eta = eta;
    cfg.cutoff = sensing::kNoNlaCutoff;
    const double exact = sensing::delta_alpha_entangled(cfg.M, cfg.n_s, eta);
    fock_err = std::max(fock_err, std::abs(sensing::simulate_no_nla_fock(cfg).delta_alpha - exact));
    const auto g = gaussian::splitter_gaussian(gaussian::loss_gaussian(gaussian::sv_gaussian(cfg.n_s), eta), cfg.M);
    gauss_err = std::max(gauss_err, std::abs(gaussian::avg_x_std(g) - exact));
  }
  return {"engine equivalence", fock_err <= 1e-4 && gauss_err <= 1e-8,
          "fock " + detail::sci(fock_err) + " <= 1e-4, gaussian " + detail::sci(gauss_err) + " <= 1e-8"};
}

inline double commutator_gap(const fock::ModeOperator& op, double theta, const fock::FockVector& psi) {
  const auto both = fock::TwoModeOperator::product(op, op);
  const auto a = fock::apply(both, 0, 1, fock::beamsplitter(theta, 0, 1, psi));
  const auto b = fock::beamsplitter(theta, 0, 1, fock::apply(both, 0, 1, psi));
  return (a.amplitudes() - b.amplitudes()).cwiseAbs().maxCoeff();
}

inline CheckResult ideal_commutation(const Options& opt, int trials = 20) {
  std::mt19937 rng(opt.seed);
  std::uniform_real_distribution<double> th(-M_PI, M_PI), gd(1.0, 3.0);
  const fock::Cutoff c(6);
  double worst = 0.0;
  for (int i = 0; i < trials; ++i) {
    const double theta = th(rng), g = gd(rng);
    worst = std::max(worst, commutator_gap(nla::clipped_ideal_nla(g, c), theta, detail::random_two_mode(c, rng)));
  }
  return {"ideal amplifier commutes with splitter", worst <= 1e-10, "max gap " + detail::sci(worst) + " <= 1e-10"};
}

inline CheckResult practical_noncommutation(const Options& opt) {
  const fock::Cutoff c(4);
  const auto t = detail::practical_operator(1, 2.0, c, opt.projector_perturbation);
  const double gap = commutator_gap(t, M_PI / 4, fock::FockVector::basis(c, {1, 1}));
  return {"practical amplifier does not commute", gap >= 1e-3, "witness " + detail::sci(gap) + " >= 1e-3"};
}

inline CheckResult scissor_oracle(const Options& opt) {
  double worst = 0.0;
  for (double g : {1.0, 1.5, 2.0, 3.0}) {
    const fock::Cutoff c(3);
    fock::CMatrix circuit = nla::scissor_success_operator(g, c).matrix();
    fock::CMatrix target = detail::practical_operator(1, g, c, opt.projector_perturbation).matrix();
    // compare up to a global phase fixed on the vacuum entry
    circuit /= circuit(0, 0) / std::abs(circuit(0, 0));
    target /= target(0, 0) / std::abs(target(0, 0));
    worst = std::max(worst, (circuit - target).cwiseAbs().maxCoeff());
  }
  return {"scissor circuit matches practical operator", worst <= 1e-12, "max entry gap " + detail::sci(worst) + " <= 1e-12"};
}

inline CheckResult effective_channel(int cutoff = 14) {
  const double ns = 0.04, eta = 0.5;
  const fock::Cutoff c(cutoff);
  const auto q = fock::quadratures(c);
  const auto source = fock::pure_loss(eta, 0, fock::sv_fock(ns, fock::sv_working_cutoff(ns)));
  double worst = 0.0;
  for (double g : {1.0, 1.25, 1.5, 1.75, 2.0}) {
    const auto amplified = fock::normalize(fock::sandwich(nla::clipped_ideal_nla(g, c), 0, fock::with_cutoff(source, c)));
    const auto ch = nla::effective_channel(g, eta);
    const auto predicted =
        gaussian::loss_gaussian(gaussian::sv_gaussian(nla::effective_sv_photons(ns, ch.g_eff)), ch.eta_eff);
    const double fm2 = gaussian::kFockMomentumScale * gaussian::kFockMomentumScale;
    worst = std::max(worst, std::abs(fock::variance(q.x, amplified.state) - predicted.x_variance(0)));
    worst = std::max(worst, std::abs(fock::variance(q.p, amplified.state) - fm2 * predicted.p_variance(0)));
  }
  return {"effective channel equivalence", worst <= 1e-3, "max variance gap " + detail::sci(worst) + " <= 1e-3"};
}

inline CheckResult bound_ordering() {
  bool ok = true;
  double eq_gap = 0.0;
  for (int k = 1; k <= 10; ++k) {
    const double eta = 0.1 * k;
    ok = ok && sensing::crlb_entangled(4, 0.04, eta) <= sensing::delta_alpha_entangled(4, 0.04, eta) + 1e-15;
    ok = ok && sensing::crlb_product(4, 0.04, eta) <= sensing::delta_alpha_product(4, 0.04, eta) + 1e-15;
  }
  eq_gap = std::max(std::abs(sensing::crlb_entangled(4, 0.04, 1.0) - sensing::delta_alpha_entangled(4, 0.04, 1.0)),
                    std::abs(sensing::crlb_product(4, 0.04, 1.0) - sensing::delta_alpha_product(4, 0.04, 1.0)));
  return {"bound ordering", ok && eq_gap <= 1e-9,
          std::string(ok ? "bounds below formulas" : "bound above formula") + ", lossless gap " + detail::sci(eq_gap)};
}

// The configured practical scenario runs end to end with a sane result.
inline CheckResult practical_pipeline(const Options& opt) {
  const auto pt = sensing::simulate_practical(opt.scenario);
  const bool ok = pt.p_success > 0.0 && pt.p_success <= 1.0 && pt.delta_alpha > 0.0;
  return {"practical pipeline", ok,
          "delta_alpha " + detail::sci(pt.delta_alpha) + ", p_success " + detail::sci(pt.p_success) + ", cutoff " +
              std::to_string(*pt.cutoff)};
}

inline std::vector<CheckResult> run_all(const Options& opt) {
  opt.scenario.validate();
  return {engine_equivalence(),    ideal_commutation(opt), practical_noncommutation(opt), scissor_oracle(opt),
          effective_channel(),     bound_ordering(),       practical_pipeline(opt)};
}

inline bool all_passed(const std::vector<CheckResult>& results) {
  for (const auto& r : results) {
    if (!r.passed) return false;
  }
  return true;
}

}  // namespace cvdqs::validate
