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

#include <gtest/gtest.h>

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <random>
#include <vector>

#include "cvdqs/fock.hpp"
#include "cvdqs/gaussian.hpp"
#include "cvdqs/nla.hpp"
#include "cvdqs/sensing.hpp"
#include "test_support.hpp"

namespace cvdqs::sensing {
namespace {

using fock::CMatrix;

ScenarioConfig practical(int M, double ns, double eta, int n, double g, std::optional<int> cutoff = std::nullopt) {
  ScenarioConfig cfg;
  cfg.M = M;
  cfg.n_s = ns;
  cfg.eta = eta;
  cfg.nla = nla::NlaSpec::practical(g, n);
  cfg.scheme = Scheme::entangled_practical_nla;
  cfg.cutoff = cutoff;
  return cfg;
}

// ---------------------------------------------------------------------------
// closed forms

TEST(DeltaAlphaEntangled, Examples) {
  for (double eta : {0.1, 0.5, 1.0}) EXPECT_NEAR(delta_alpha_entangled(4, 0.0, eta), 0.25, 1e-15);
  EXPECT_NEAR(delta_alpha_entangled(4, 0.04, 0.5), 0.228587950723607, 1e-13);
  EXPECT_NEAR(delta_alpha_entangled(4, 0.04, 1.0), 0.204950975679639, 1e-13);
  EXPECT_NEAR(delta_alpha_entangled(4, 0.04, 0.3), 0.237384647207040, 1e-13);
}

TEST(DeltaAlphaEntangled, Asymptote) {
  const int M = 4;
  const double n_per_mode = 100.0;
  const double e = delta_alpha_entangled(M, M * n_per_mode, 1.0);
  EXPECT_NEAR(e, 0.006246098625, 1e-11);
  EXPECT_NEAR(e / (1.0 / (4.0 * M * std::sqrt(n_per_mode))), 1.0, 0.01);
}

TEST(DeltaAlphaProduct, Examples) {
  EXPECT_NEAR(delta_alpha_product(4, 0.0), 0.25, 1e-15);
  EXPECT_NEAR(delta_alpha_product(4, 0.16), 0.204950975679639, 1e-13);
  const double p = delta_alpha_product(4, 400.0);
  EXPECT_NEAR(p, 0.01246890528, 1e-10);
  EXPECT_NEAR(p / (1.0 / (4.0 * std::sqrt(4.0 * 100.0))), 1.0, 0.01);
}

TEST(DeltaAlphaIdealNla, UnitGainReducesToNoNla) {
  for (double eta : {0.2, 0.5, 0.9}) {
    const auto pt = delta_alpha_ideal_nla(4, 0.04, eta, 1.0);
    EXPECT_NEAR(pt.delta_alpha, delta_alpha_entangled(4, 0.04, eta), 1e-15);
    EXPECT_NEAR(pt.probe_power, 0.04 * eta, 1e-15);
  }
}

TEST(DeltaAlphaIdealNla, OperatingPoint) {
  const auto pt = delta_alpha_ideal_nla(4, 0.04, 0.5, 2.5);
  EXPECT_NEAR(pt.delta_alpha, 0.133132244799382, 1e-12);
  EXPECT_NEAR(pt.probe_power, 0.880923450789793, 1e-12);
  EXPECT_EQ(pt.p_success, 0.0);
  EXPECT_TRUE(pt.zero_success_idealization);
  EXPECT_THROW(delta_alpha_ideal_nla(4, 0.04, 0.5, 3.5), PhysicalityError);
}

TEST(DeltaAlphaIdealNla, DecreasesWithGainWhenLossless) {
  double prev = delta_alpha_ideal_nla(4, 0.04, 1.0, 1.0).delta_alpha;
  for (double g = 1.05;; g += 0.05) {
    SensitivityPoint pt;
    try {
      pt = delta_alpha_ideal_nla(4, 0.04, 1.0, g);
    } catch (const PhysicalityError&) {
      EXPECT_GT(g, 1.5);
      break;
    }
    EXPECT_LT(pt.delta_alpha, prev);
    prev = pt.delta_alpha;
  }
}

TEST(IdealNlaGainForPower, InvertsProbePower) {
  for (double target : {0.05, 0.2, 0.6, 1.5}) {
    const double g = ideal_nla_gain_for_power(0.04, 0.5, target);
    EXPECT_NEAR(ideal_nla_probe_power(0.04, 0.5, g), target, 1e-9 * std::max(1.0, target));
  }
  EXPECT_THROW(ideal_nla_gain_for_power(0.04, 0.5, 0.001), DomainError);
}

// ---------------------------------------------------------------------------
// bounds

TEST(Bounds, EqualityWhenLossless) {
  EXPECT_NEAR(crlb_entangled(4, 0.04, 1.0), delta_alpha_entangled(4, 0.04, 1.0), 1e-15);
  EXPECT_NEAR(crlb_product(4, 0.04, 1.0), delta_alpha_product(4, 0.04, 1.0), 1e-15);
  EXPECT_LT(crlb_entangled(4, 0.04, 0.5), delta_alpha_entangled(4, 0.04, 0.5));
  EXPECT_NEAR(crlb_entangled(4, 0.0, 0.5), 0.25, 1e-15);
  EXPECT_NEAR(crlb_product(4, 0.0, 0.5), 0.25, 1e-15);
}

TEST(Bounds, OrderingOverRandomScenarios) {
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> ed(1e-3, 1.0), nd(0.0, 5.0);
  for (int i = 0; i < 500; ++i) {
    const int M = 1 + static_cast<int>(rng() % 8);
    const double eta = ed(rng), ns = nd(rng);
    EXPECT_LE(crlb_entangled(M, ns, eta), delta_alpha_entangled(M, ns, eta) + 1e-15);
    EXPECT_LE(crlb_product(M, ns, eta), delta_alpha_product(M, ns, eta) + 1e-15);
  }
}

TEST(Qfi, VacuumIsShotNoise) {
  for (int M : {1, 2, 3}) {
    EXPECT_NEAR(qfi_pure_displacement(fock::FockVector::vacuum(M, fock::Cutoff(2))), 4.0 * M, 1e-13);
    EXPECT_NEAR(qfi_pure_displacement(gaussian::GaussianState::vacuum(M)), 4.0 * M, 1e-13);
  }
}

TEST(Qfi, SingleModeSqueezedVacuum) {
  const double ns = 0.3;
  const double s = std::sqrt(ns + 1.0) + std::sqrt(ns);
  EXPECT_NEAR(qfi_pure_displacement(fock::sv_fock(ns, fock::Cutoff(40))), 4.0 * s * s, 1e-9);
}

TEST(Qfi, LosslessDistributedProbe) {
  // anti-squeezed p feels the source tail: 8 leaves ~4e-5, 10 leaves ~2e-6
  const fock::Cutoff c(10);
  auto psi = fock::tensor(fock::sv_fock(0.04, c), fock::FockVector::vacuum(3, c));
  psi = fock::balanced_splitter(4, psi);
  const double qfi = qfi_pure_displacement(psi);
  EXPECT_NEAR(qfi, 23.8067449773988, 1e-5);
  EXPECT_NEAR(1.0 / std::sqrt(qfi), crlb_entangled(4, 0.04, 1.0), 1e-7);
  EXPECT_NEAR(qfi_pure_displacement(gaussian::splitter_gaussian(gaussian::sv_gaussian(0.04), 4)), 23.8067449773988,
              1e-12);
}

TEST(AdvantageDb, Examples) {
  EXPECT_DOUBLE_EQ(advantage_db(0.3, 0.3), 0.0);
  const double adv = advantage_db(delta_alpha_product(4, 400.0), delta_alpha_entangled(4, 400.0, 1.0));
  EXPECT_NEAR(adv, 6.00439, 1e-4);
  EXPECT_THROW(advantage_db(0.0, 0.1), DomainError);
}

TEST(AdvantageDb, DecreasesWithEqualLoss) {
  double prev = 1e9;
  for (int k = 10; k >= 1; --k) {
    const double eta = 0.1 * k;
    const double adv = advantage_db(delta_alpha_product(4, 400.0, eta), delta_alpha_entangled(4, 400.0, eta));
    EXPECT_LT(adv, prev) << eta;
    prev = adv;
  }
}

// ---------------------------------------------------------------------------
// Fock pipelines

TEST(SimulatePractical, VacuumSource) {
  for (double g : {1.0, 2.0}) {
    const auto pt = simulate_practical(practical(4, 0.0, 0.5, 2, g));
    EXPECT_NEAR(pt.delta_alpha, 0.25, 1e-14);
    EXPECT_NEAR(pt.probe_power, 0.0, 1e-15);
    EXPECT_NEAR(pt.p_success / std::pow(g * g + 1.0, -8.0), 1.0, 1e-12);
  }
}

TEST(SimulatePractical, DefaultCutoffCoversAllSectors) {
  EXPECT_EQ(practical(4, 0.04, 0.5, 2, 2.0).effective_cutoff(), 8);
  EXPECT_EQ(practical(2, 0.04, 0.5, 1, 2.0).effective_cutoff(), 5);
  const auto a = simulate_practical(practical(3, 0.04, 0.5, 2, 2.2));
  const auto b = simulate_practical(practical(3, 0.04, 0.5, 2, 2.2, 10));
  EXPECT_NEAR(a.delta_alpha, b.delta_alpha, 1e-12);
  EXPECT_NEAR(a.p_success / b.p_success, 1.0, 1e-12);
}

TEST(SimulatePractical, RejectsCutoffBelowScissors) {
  EXPECT_THROW(simulate_practical(practical(2, 0.04, 0.5, 2, 2.0, 1)), DomainError);
  auto cfg = practical(2, 0.04, 0.5, 2, 2.0);
  cfg.scheme = Scheme::entangled_no_nla;
  EXPECT_THROW(simulate_practical(cfg), DomainError);
}

TEST(SimulatePractical, TruncationErrorAsksForLargerCutoff) {
  try {
    simulate_practical(practical(2, 1.0, 0.9, 1, 1.5, 3));
    FAIL();
  } catch (const TruncationError& e) {
    EXPECT_NE(std::string(e.what()).find("increase the cutoff"), std::string::npos);
  }
}

// Independent dense recomputation: Kronecker-built operators, loss applied
// after the splitter, no library state types.
struct DensePoint {
  double delta_alpha, probe_power, p_success;
};

DensePoint dense_brute_force(double ns, double eta, double g, int nmax) {
  const int d = nmax + 1;
  CMatrix a = CMatrix::Zero(d, d);
  for (int n = 1; n < d; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  const CMatrix id = CMatrix::Identity(d, d);
  const CMatrix a0 = Eigen::kroneckerProduct(a, id).eval();
  const CMatrix a1 = Eigen::kroneckerProduct(id, a).eval();

  // squeezed vacuum from the Bogoliubov series
  Eigen::VectorXcd sv = Eigen::VectorXcd::Zero(d);
  const double r = std::asinh(std::sqrt(ns));
  double term = 1.0 / std::sqrt(std::cosh(r));
  for (int k = 0; 2 * k < d; ++k) {
    sv(2 * k) = term;
    term *= -std::tanh(r) * std::sqrt((2.0 * k + 1.0) * (2.0 * k + 2.0)) / (2.0 * (k + 1.0));
  }
  Eigen::VectorXcd vac = Eigen::VectorXcd::Zero(d);
  vac(0) = 1.0;
  Eigen::VectorXcd psi = Eigen::kroneckerProduct(sv, vac).eval();

  const CMatrix gen = (a0.adjoint() * a1 - a0 * a1.adjoint()) * (-M_PI / 4.0);
  const CMatrix u = gen.exp();
  psi = u * psi;
  CMatrix rho = psi * psi.adjoint();

  auto kraus = [&](int k) {
    CMatrix e = CMatrix::Zero(d, d);
    for (int n = k; n < d; ++n) {
      e(n - k, n) = std::sqrt(std::tgamma(n + 1.0) / (std::tgamma(k + 1.0) * std::tgamma(n - k + 1.0)) *
                              std::pow(1.0 - eta, k) * std::pow(eta, n - k));
    }
    return e;
  };
  for (int mode = 0; mode < 2; ++mode) {
    CMatrix out = CMatrix::Zero(d * d, d * d);
    for (int k = 0; k < d; ++k) {
      const CMatrix e = mode == 0 ? Eigen::kroneckerProduct(kraus(k), id).eval() : Eigen::kroneckerProduct(id, kraus(k)).eval();
      out += e * rho * e.adjoint();
    }
    rho = out;
  }

  CMatrix t = CMatrix::Zero(d, d);
  t(0, 0) = 1.0 / std::sqrt(g * g + 1.0);
  t(1, 1) = g / std::sqrt(g * g + 1.0);
  const CMatrix tt = Eigen::kroneckerProduct(t, t).eval();
  rho = tt * rho * tt.adjoint();
  const double p = rho.trace().real();
  rho /= p;

  const CMatrix xbar = 0.5 * ((a0 + a0.adjoint()) + (a1 + a1.adjoint())) / 2.0;
  const double mean = (rho * xbar).trace().real();
  const double var = (rho * xbar * xbar).trace().real() - mean * mean;
  const double power = (rho * (a0.adjoint() * a0 + a1.adjoint() * a1)).trace().real();
  return {std::sqrt(var), power, p};
}

TEST(SimulatePractical, MatchesDenseBruteForce) {
  const auto pt = simulate_practical(practical(2, 0.02, 0.7, 1, 1.5));
  const auto ref = dense_brute_force(0.02, 0.7, 1.5, 10);
  EXPECT_NEAR(pt.delta_alpha, ref.delta_alpha, 1e-8);
  EXPECT_NEAR(pt.probe_power, ref.probe_power, 1e-8);
  EXPECT_NEAR(pt.p_success, ref.p_success, 1e-8);
  EXPECT_NEAR(pt.p_success / ref.p_success, 1.0, 1e-7);
}

TEST(SimulateNoNlaFock, MatchesClosedForm) {
  for (double eta : {0.3, 0.5, 1.0}) {
    ScenarioConfig cfg;
    cfg.M = 4;
    cfg.n_s = 0.04;
    cfg.eta = eta;
    const auto pt = simulate_no_nla_fock(cfg);
    EXPECT_NEAR(pt.delta_alpha, delta_alpha_entangled(4, 0.04, eta), 1e-4) << eta;
    EXPECT_NEAR(pt.probe_power, 0.04 * eta, 1e-6) << eta;
    const auto g = gaussian::splitter_gaussian(gaussian::loss_gaussian(gaussian::sv_gaussian(0.04), eta), 4);
    EXPECT_NEAR(gaussian::avg_x_std(g), delta_alpha_entangled(4, 0.04, eta), 1e-8) << eta;
  }
}

// Post-selected outputs hold at most N photons per mode, so accepted practical
// results do not move when the cutoff grows from 6 to 10.
TEST(TruncationConvergence, PracticalResultsStableFromSixToTen) {
  std::mt19937 rng(2718);
  std::uniform_real_distribution<double> nd(0.0, 0.1), ed(0.05, 1.0), gd(1.0, 3.0);
  int accepted = 0;
  for (int trial = 0; trial < 30; ++trial) {
    auto cfg = practical(1 + static_cast<int>(rng() % 2), nd(rng), ed(rng), 1 + static_cast<int>(rng() % 2), gd(rng));
    SensitivityPoint low;
    cfg.cutoff = 6;
    try {
      low = simulate_practical(cfg);
    } catch (const TruncationError&) {
      continue;
    }
    ++accepted;
    cfg.cutoff = 10;
    const auto high = simulate_practical(cfg);
    EXPECT_LT(std::abs(low.delta_alpha * low.delta_alpha - high.delta_alpha * high.delta_alpha), 1e-6);
    EXPECT_LT(std::abs(low.probe_power - high.probe_power), 1e-6);
    EXPECT_LT(std::abs(low.p_success / high.p_success - 1.0), 1e-6);
  }
  EXPECT_GT(accepted, 15);
}

// Without post-selection the dropped tail shifts the variance through the
// coherences between kept and dropped levels, of order sqrt(deficit) rather
// than the deficit itself. An accepted point at n_max = 6 can still move by
// more than 1e-6; by n_max = 10 the change is well below it.
TEST(TruncationConvergence, NoNlaPathNeedsMoreThanSixLevels) {
  ScenarioConfig cfg;
  cfg.M = 1;
  cfg.n_s = 0.075191520446844004;
  cfg.eta = 0.5945418476690979;
  auto var_at = [&](int cutoff) {
    cfg.cutoff = cutoff;
    const auto pt = simulate_no_nla_fock(cfg);
    EXPECT_LE(pt.trunc_deficit, cfg.truncation_tolerance);
    return pt.delta_alpha * pt.delta_alpha;
  };
  const double v6 = var_at(6), v10 = var_at(10), v14 = var_at(14);
  EXPECT_GT(std::abs(v6 - v10), 1e-6);
  EXPECT_LT(std::abs(v10 - v14), 1e-7);
  const double exact = std::pow(delta_alpha_entangled(1, cfg.n_s, cfg.eta), 2);
  EXPECT_NEAR(v14, exact, 1e-10);
}

TEST(EngineEquivalence, RandomNoNlaScenarios) {
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> nd(0.0, 0.1), ed(0.05, 1.0);
  for (int trial = 0; trial < 12; ++trial) {
    ScenarioConfig cfg;
    cfg.M = 1 + static_cast<int>(rng() % 3);
    cfg.n_s = nd(rng);
    cfg.eta = ed(rng);
    cfg.cutoff = 10;
    const auto pt = simulate_no_nla_fock(cfg);
    const auto g = gaussian::splitter_gaussian(gaussian::loss_gaussian(gaussian::sv_gaussian(cfg.n_s), cfg.eta), cfg.M);
    EXPECT_NEAR(pt.delta_alpha, gaussian::avg_x_std(g), 1e-4) << cfg.M << " " << cfg.n_s << " " << cfg.eta;
  }
}

TEST(Evaluate, NoNlaAndProduct) {
  ScenarioConfig cfg;
  const auto e = evaluate(cfg);
  EXPECT_NEAR(e.delta_alpha, 0.228587950723607, 1e-13);
  EXPECT_EQ(e.p_success, 1.0);
  cfg.scheme = Scheme::product_optimal;
  cfg.n_s = 0.16;
  EXPECT_NEAR(evaluate(cfg).delta_alpha, 0.204950975679639, 1e-13);
  cfg.scheme = Scheme::entangled_ideal_nla;
  EXPECT_THROW(evaluate(cfg), DomainError);
  cfg.M = 0;
  cfg.scheme = Scheme::entangled_no_nla;
  EXPECT_THROW(evaluate(cfg), DomainError);
}

TEST(Ordering, IdealBelowPracticalBelowNoNlaAtMatchedPower) {
  const double ns = 0.04, eta = 0.5;
  for (double g = 1.5; g <= 2.51; g += 0.25) {
    const auto prac = simulate_practical(practical(4, ns, eta, 2, g));
    const double g_ideal = ideal_nla_gain_for_power(ns, eta, prac.probe_power);
    const auto ideal = delta_alpha_ideal_nla(4, ns, eta, g_ideal);
    const double no_nla = delta_alpha_entangled(4, prac.probe_power / eta, eta);
    EXPECT_LE(ideal.delta_alpha, prac.delta_alpha) << g;
    EXPECT_LT(prac.delta_alpha, no_nla) << g;
  }
}

TEST(DisplacementInvariance, AveragedQuadratureVariance) {
  const double alpha = 0.3;
  auto cfg = practical(2, 0.04, 0.5, 1, 2.0);
  const fock::Cutoff c(cfg.effective_cutoff());
  double deficit = 0.0;
  const auto probe = detail::distributed_probe(cfg, c, deficit);
  const std::vector<nla::NlaSpec> specs(2, *cfg.nla);
  const auto out = nla::apply_practical_nla(probe, specs);

  const fock::Cutoff wide(30);
  auto shifted = fock::with_cutoff(out.state, wide);
  const auto d = fock::displacement(alpha, wide);
  for (int m = 0; m < 2; ++m) shifted = fock::sandwich(d, m, shifted);
  const auto xbar_wide = fock::Observable::mode_average(fock::quadratures(wide).x, 2);
  const auto xbar = fock::Observable::mode_average(fock::quadratures(c).x, 2);
  EXPECT_NEAR(fock::variance(xbar_wide, shifted), fock::variance(xbar, out.state), 1e-8);
  EXPECT_NEAR(fock::expectation(xbar_wide, shifted).real(), alpha, 1e-8);
}

TEST(Unbiasedness, PipelineProbesHaveZeroMean) {
  std::mt19937 rng(77);
  std::uniform_real_distribution<double> gd(1.0, 3.0), ed(0.2, 1.0);
  for (int i = 0; i < 5; ++i) {
    const int M = 2 + static_cast<int>(rng() % 2);
    EXPECT_NO_THROW(simulate_practical(practical(M, 0.04, ed(rng), 1 + static_cast<int>(rng() % 2), gd(rng), 8)));
  }
  EXPECT_THROW(detail::check_unbiased({0.2, 0.1, 1e-6}), ConsistencyError);
}

}  // namespace
}  // namespace cvdqs::sensing
