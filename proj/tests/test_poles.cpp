#include <gtest/gtest.h>

#include "hadcomp/poles.hpp"
#include "oracles.hpp"

using namespace hadcomp;

namespace {

const Channel pipi(139.57, 139.57);
const Channel kk(493.68, 493.68);

double rel(cplx a, cplx b) { return std::abs(a - b) / std::abs(b); }

double rel(const CMatrix& a, const CMatrix& b) {
  return (a - b).cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff();
}

// 1x1 constant kernel with K^-1 = -G(s_B).
CoupledChannelModel constructed_bound_state(double sB) {
  const double a = -1.0, L = 1000.0;
  CMatrix K(1, 1);
  K << -1.0 / loop_G(pipi, a, L, cplx{sB, 0.0}, Sheet::I).real();
  return {{pipi}, SubtractionScheme{{a}, L}, KernelModel::constant(K)};
}

CoupledChannelModel two_channel_bare_pole() {
  CVector g(2);
  g << 2500.0, 4000.0;
  return {{pipi, kk}, SubtractionScheme{{-1.0, -1.0}, 1000.0}, KernelModel::bare_pole(g, 950.0)};
}

}  // namespace

TEST(FindPole, ConstructedBoundState) {
  const double sB = 250.0 * 250.0;
  const auto m = constructed_bound_state(sB);
  const auto p = find_pole(m, {Sheet::I}, cplx{0.97 * sB, 0.0});
  EXPECT_LT(std::abs(p.location.z - sB), 1e-10 * sB);
  EXPECT_GT(p.newton_steps, 0);
}

TEST(FindPole, ERESheetTwoResonance) {
  // a, r from k_R = 100 - 20i; oracle: roots of the quadratic.
  const double mu = 500.0;
  const double kr = 100.0, ki = 20.0;
  EREModel m{-2.0 * ki / (kr * kr + ki * ki), -1.0 / ki, mu};
  const auto [k1, k2] = oracles::ere_roots(m.a, m.r);
  const cplx kR = std::abs(k1 - cplx{kr, -ki}) < std::abs(k2 - cplx{kr, -ki}) ? k1 : k2;
  const cplx E0 = kR * kR / (2.0 * mu);
  const auto p = find_pole(m, Sheet::II, E0 * cplx{1.05, 0.03});
  const cplx k = m.momentum(p.location);
  EXPECT_LT(rel(k, kR), 1e-8);
  EXPECT_LT(std::abs(k - cplx{100.0, -20.0}), 1e-8 * 100.0);
  EXPECT_LE(p.location.z.imag(), 0.0);
}

TEST(FindPole, SingletVirtualState) {
  const double mu = 938.272 * 939.565 / (938.272 + 939.565);
  EREModel m{fm_to_inv_mev(-23.7), fm_to_inv_mev(2.7), mu};
  const auto [k1, k2] = oracles::ere_roots(m.a, m.r);
  const cplx kv = std::abs(k1) < std::abs(k2) ? k1 : k2;  // the shallow root
  ASSERT_LT(kv.imag(), 0.0);
  const auto p = find_pole(m, Sheet::II, cplx{-0.05, 0.0});
  const cplx k = m.momentum(p.location);
  EXPECT_LT(rel(k, kv), 1e-8);
  EXPECT_NEAR(k.real(), 0.0, 1e-9);
  EXPECT_GT(std::abs(k), 3.0);
  EXPECT_LT(std::abs(k), 30.0);
}

TEST(FindPole, ConjugatePoleWithConjugateCouplings) {
  const auto m = two_channel_bare_pole();
  const std::vector<Sheet> sh{Sheet::II, Sheet::I};
  const auto p = find_pole(m, sh, cplx{8.5e5, -2.0e4});
  ASSERT_LT(p.location.z.imag(), 0.0);
  ASSERT_GT(p.location.z.real(), pipi.threshold_s());
  ASSERT_LT(p.location.z.real(), kk.threshold_s());
  const auto q = find_pole(m, sh, std::conj(p.location.z) + cplx{2000.0, 1000.0});
  EXPECT_LT(rel(q.location.z, std::conj(p.location.z)), 1e-10);
  const auto gp = extract_couplings(m, p, ResidueMethod::contour);
  const auto gq = extract_couplings(m, q, ResidueMethod::contour);
  // Couplings are fixed up to an overall sign.
  const cplx sgn = gq.g(0) / std::conj(gp.g(0));
  EXPECT_NEAR(std::abs(sgn), 1.0, 1e-7);
  EXPECT_LT((gq.g - sgn * gp.g.conjugate()).cwiseAbs().maxCoeff(), 1e-7 * gp.g.cwiseAbs().maxCoeff());
}

TEST(FindPole, BasinIndependence) {
  const auto m = two_channel_bare_pole();
  const std::vector<Sheet> sh{Sheet::II, Sheet::I};
  const auto ref = find_pole(m, sh, cplx{8.5e5, -2.0e4});
  const double d = 0.3 * std::abs(ref.location.z.imag());
  for (int i = -1; i <= 1; ++i) {
    for (int j = -1; j <= 1; ++j) {
      const auto p = find_pole(m, sh, ref.location.z + cplx{i * d, j * d});
      EXPECT_LT(rel(p.location.z, ref.location.z), 1e-10) << i << "," << j;
    }
  }
}

TEST(FindPole, Failures) {
  SearchOptions o;
  o.branch_points = {cplx{4.0, 0.0}};
  EXPECT_THROW(
      {
        try {
          find_zero([](cplx z) { return z - 4.0; }, cplx{3.0, 0.5}, o);
        } catch (const Error& e) {
          EXPECT_EQ(e.kind(), ErrorKind::branch_point_convergence);
          throw;
        }
      },
      Error);
  SearchOptions few;
  few.max_iters = 20;
  EXPECT_THROW(
      {
        try {
          find_zero([](cplx z) { return std::exp(z) + 0.0 * z; }, cplx{1.0, 0.0}, few);
        } catch (const Error& e) {
          EXPECT_EQ(e.kind(), ErrorKind::search_failed);
          throw;
        }
      },
      Error);
}

TEST(FindPole, MullerFallbackOnFlatStart) {
  // Newton's derivative vanishes at the start; Muller recovers the root.
  const auto r = find_zero([](cplx z) { return z * z * z - 8.0; }, cplx{0.0, 0.0}, SearchOptions{});
  EXPECT_TRUE(r.used_muller);
  EXPECT_NEAR(std::abs(r.z * r.z * r.z - 8.0), 0.0, 1e-8);
}

TEST(Residues, MethodsAgreeOnConstantKBoundState) {
  const double sB = 250.0 * 250.0;
  const auto m = constructed_bound_state(sB);
  const auto p = find_pole(m, {Sheet::I}, cplx{0.97 * sB, 0.0});
  const auto c = extract_couplings(m, p, ResidueMethod::contour);
  const auto f = extract_couplings(m, p, ResidueMethod::pole_factor);
  const auto d = extract_couplings(m, p, ResidueMethod::finite_difference);
  EXPECT_LT(rel(c.R, f.R), 1e-6);
  EXPECT_LT(rel(c.R, d.R), 1e-6);
  EXPECT_LT(rel(f.R, d.R), 1e-6);
  // Oracle: g^2 = -1/(dT^-1/ds) with T^-1 = K^-1 + G, derivative by wide-step differences of G.
  const double h = 10.0;
  const cplx dG = (loop_G(pipi, -1.0, 1000.0, sB + h, Sheet::I) - loop_G(pipi, -1.0, 1000.0, sB - h, Sheet::I)) /
                  (2.0 * h);
  EXPECT_LT(rel(c.R(0, 0), -1.0 / dG), 1e-6);
}

TEST(Residues, MethodsAgreeOnCoupledResonance) {
  const auto m = two_channel_bare_pole();
  const auto p = find_pole(m, {Sheet::II, Sheet::I}, cplx{8.5e5, -2.0e4});
  const auto c = extract_couplings(m, p, ResidueMethod::contour);
  const auto f = extract_couplings(m, p, ResidueMethod::pole_factor);
  const auto d = extract_couplings(m, p, ResidueMethod::finite_difference);
  EXPECT_LT(rel(c.R, f.R), 1e-6);
  EXPECT_LT(rel(c.R, d.R), 1e-6);
  EXPECT_LT(c.rank1_residual, 1e-8);
  EXPECT_FALSE(c.contamination_warning);
}

TEST(Residues, ContourRadiusIndependence) {
  const auto m = two_channel_bare_pole();
  const auto p = find_pole(m, {Sheet::II, Sheet::I}, cplx{8.5e5, -2.0e4});
  const auto a = extract_couplings(m, p, ResidueMethod::contour);
  ResidueOptions half;
  half.radius = 0.5 * a.radius;
  const auto b = extract_couplings(m, p, ResidueMethod::contour, half);
  EXPECT_LT(rel(a.R, b.R), 1e-8);
}

TEST(Residues, ContourMustAvoidCuts) {
  const auto m = two_channel_bare_pole();
  const auto p = find_pole(m, {Sheet::II, Sheet::I}, cplx{8.5e5, -2.0e4});
  ResidueOptions big;
  big.radius = 2.0 * std::abs(p.location.z.imag());
  EXPECT_THROW(extract_couplings(m, p, ResidueMethod::contour, big), Error);
}

TEST(Residues, EREBoundStateClosedForm) {
  // Bound state at k = i kappa; E-plane residue kappa / (mu (1 - r kappa)).
  const double mu = 469.459, kappa = 45.7, r = fm_to_inv_mev(1.75);
  EREModel m{1.0 / (kappa - 0.5 * r * kappa * kappa), r, mu};
  const double EB = kappa * kappa / (2.0 * mu);
  const auto p = find_pole(m, Sheet::I, cplx{-0.9 * EB, 0.0});
  EXPECT_LT(std::abs(p.location.z + EB), 1e-10 * EB);
  const double g2 = kappa / (mu * (1.0 - r * kappa));
  for (auto method : {ResidueMethod::contour, ResidueMethod::pole_factor, ResidueMethod::finite_difference}) {
    const auto c = extract_couplings(m, p, method);
    EXPECT_LT(rel(c.g(0) * c.g(0), cplx{g2, 0.0}), 1e-8) << to_string(method);
  }
}

TEST(Residues, CDDPole) {
  CDDModel m{2500.0, 4.0, 35.0, 470.0};
  const auto p = find_pole(m, Sheet::II, cplx{6.0, -3.0});
  const auto c = extract_couplings(m, p, ResidueMethod::contour);
  const auto f = extract_couplings(m, p, ResidueMethod::pole_factor);
  const auto d = extract_couplings(m, p, ResidueMethod::finite_difference);
  EXPECT_LT(rel(c.R, f.R), 1e-6);
  EXPECT_LT(rel(c.R, d.R), 1e-6);
}

TEST(Residues, RankOneFactorization) {
  CVector g(3);
  g << cplx{2.0, 1.0}, cplx{-0.5, 0.3}, cplx{0.1, -4.0};
  const CMatrix R = g * g.transpose();
  const CVector h = rank1_factor(R);
  EXPECT_LT((h * h.transpose() - R).cwiseAbs().maxCoeff(), 1e-13);
  // The largest coupling carries a phase in (-pi/2, pi/2].
  Eigen::Index m;
  h.cwiseAbs().maxCoeff(&m);
  EXPECT_GT(h(m).real(), 0.0);
}

TEST(Residues, NarrowResonanceWidthMatchesPhaseShift) {
  CVector g(1);
  g << 400.0;
  CoupledChannelModel m({pipi}, SubtractionScheme{{-1.0}, 1000.0}, KernelModel::bare_pole(g, 780.0));
  const auto p = find_pole(m, {Sheet::II}, cplx{780.0 * 780.0, -3000.0});
  const auto c = extract_couplings(m, p, ResidueMethod::contour);
  const double Gamma = partial_widths(m, p.location, c.g)[0];
  // Breit-Wigner width from the phase shift: delta = 90 deg at M_BW, Gamma = 2 / (d delta/dE).
  auto delta = [&](double E) {
    const auto S = S_matrix(m, E * E);
    double d = 0.5 * std::arg(S.S(0, 0));
    if (d < 0) d += pi;
    return d;
  };
  double lo = 760.0, hi = 800.0;
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    (delta(mid) < 0.5 * pi ? lo : hi) = mid;
  }
  const double MBW = 0.5 * (lo + hi), h = 1e-3;
  const double slope = (delta(MBW + h) - delta(MBW - h)) / (2.0 * h);
  const double Gamma_BW = 2.0 / slope;
  EXPECT_LT(std::abs(Gamma - Gamma_BW) / Gamma_BW, 0.02) << Gamma << " vs " << Gamma_BW;
}
