#include <gtest/gtest.h>

#include <random>

#include "hadcomp/amplitudes.hpp"

using namespace hadcomp;

namespace {

const Channel pipi(139.57, 139.57);
const Channel kk(493.68, 493.68);

CoupledChannelModel two_channel_constant() {
  CMatrix K(2, 2);
  K << 25.0, 12.0, 12.0, -18.0;
  return {{pipi, kk}, SubtractionScheme{{-1.2, -1.0}, 1000.0}, KernelModel::constant(K)};
}

CoupledChannelModel narrow_bare_pole(double g0 = 400.0, double M0 = 780.0) {
  CVector g(1);
  g << g0;
  return {{pipi}, SubtractionScheme{{-1.0}, 1000.0}, KernelModel::bare_pole(g, M0)};
}

}  // namespace

TEST(Kernel, ConstantBelowThresholdGivesRealT) {
  CMatrix K(1, 1);
  K << 30.0;
  CoupledChannelModel m({pipi}, SubtractionScheme{{-1.0}, 1000.0}, KernelModel::constant(K));
  for (double s : {2.0e4, 5.0e4, 7.0e4}) {
    const CMatrix T = m.T(physical_point(cplx{s, 0.0}, 1));
    EXPECT_EQ(T(0, 0).imag(), 0.0) << s;
  }
}

TEST(Kernel, RejectsAsymmetricAndMismatched) {
  CMatrix K(2, 2);
  K << 1.0, 2.0, 3.0, 4.0;
  EXPECT_THROW(KernelModel::constant(K), Error);
  CMatrix K1 = CMatrix::Identity(1, 1);
  EXPECT_THROW(CoupledChannelModel({pipi, kk}, SubtractionScheme{{-1.0, -1.0}, 1000.0}, KernelModel::constant(K1)),
               Error);
  EXPECT_THROW(CoupledChannelModel({pipi}, SubtractionScheme{{-1.0, -1.0}, 1000.0}, KernelModel::constant(K1)),
               Error);
}

TEST(Kernel, PolynomialAndDerivative) {
  CMatrix c0(1, 1), c1(1, 1), c2(1, 1);
  c0 << 2.0;
  c1 << 3.0;
  c2 << -0.5;
  const auto k = KernelModel::polynomial({c0, c1, c2});
  const cplx s{1.3, 0.2};
  EXPECT_LT(std::abs(k.K(s)(0, 0) - (2.0 + 3.0 * s - 0.5 * s * s)), 1e-14);
  EXPECT_LT(std::abs(k.dK_ds(s)(0, 0) - (3.0 - s)), 1e-14);
}

TEST(Kernel, BarePoleDerivativeMatchesDifference) {
  CVector g(2);
  g << 300.0, 150.0;
  const auto k = KernelModel::bare_pole(g, 900.0);
  const cplx s{7.0e5, -2.0e4};
  const double h = 1.0;
  const CMatrix fd = (k.K(s + h) - k.K(s - h)) / (2.0 * h);
  EXPECT_LT((fd - k.dK_ds(s)).cwiseAbs().maxCoeff(), 1e-8 * k.dK_ds(s).cwiseAbs().maxCoeff());
  EXPECT_THROW(k.K(cplx{900.0 * 900.0, 0.0}), Error);
}

TEST(Amplitude, BarePoleFiniteAtBareMass) {
  const auto m = narrow_bare_pole();
  const CMatrix T = m.T(physical_point(cplx{780.0 * 780.0, 0.0}, 1));
  EXPECT_TRUE(std::isfinite(std::abs(T(0, 0))));
}

TEST(Unitarity, SingleChannelModulusOne) {
  const auto m = narrow_bare_pole();
  for (double sqs = 290.0; sqs < 1500.0; sqs += 37.0) {
    const auto S = S_matrix(m, sqs * sqs);
    EXPECT_NEAR(std::abs(S.S(0, 0)), 1.0, 1e-12) << sqs;
  }
}

TEST(Unitarity, TwoChannelConstantK) {
  const auto m = two_channel_constant();
  for (double sqs = 1000.0; sqs < 2500.0; sqs += 50.0) {
    const auto S = S_matrix(m, sqs * sqs);
    ASSERT_EQ(S.open.size(), 2u);
    // Direct check against the identity, not via unitarity_defect.
    const CMatrix P = S.S * S.S.adjoint();
    EXPECT_LT((P - CMatrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-10) << sqs;
  }
  // Between the thresholds only the pi pi block is kept.
  const auto S1 = S_matrix(m, 600.0 * 600.0);
  ASSERT_EQ(S1.open.size(), 1u);
  EXPECT_NEAR(std::abs(S1.S(0, 0)), 1.0, 1e-12);
}

TEST(Unitarity, InverseTHasMinusRhoImaginaryPart) {
  const auto m = two_channel_constant();
  for (double sqs : {1100.0, 1400.0, 2000.0}) {
    const double s = sqs * sqs;
    const CMatrix Tinv = m.T(physical_point(cplx{s, 0.0}, 2)).inverse();
    EXPECT_NEAR(Tinv(0, 0).imag(), -phase_space(pipi, cplx{s, 0.0}, Sheet::I).real(), 1e-10);
    EXPECT_NEAR(Tinv(1, 1).imag(), -phase_space(kk, cplx{s, 0.0}, Sheet::I).real(), 1e-10);
    EXPECT_NEAR(Tinv(0, 1).imag(), 0.0, 1e-10);
  }
}

TEST(Unitarity, NoOpenChannel) {
  const auto m = two_channel_constant();
  EXPECT_THROW(S_matrix(m, 5.0e4), Error);
  EREModel ere{-0.01, 0.005, 469.0};
  EXPECT_THROW(S_matrix(ere, -1.0), Error);
}

TEST(Unitarity, NonrelativisticFamilies) {
  EREModel ere{-3.846e-3, -0.05, 500.0};
  CDDModel cdd{3000.0, 5.0, 40.0, 500.0};
  for (double E = 0.5; E < 200.0; E *= 1.7) {
    EXPECT_LT(unitarity_defect(S_matrix(ere, E).S), 1e-12) << E;
    EXPECT_LT(unitarity_defect(S_matrix(cdd, E).S), 1e-12) << E;
  }
}

TEST(RealAnalyticity, EREAndCDD) {
  EREModel ere{0.02, 0.004, 470.0};
  CDDModel cdd{2000.0, 3.0, 30.0, 470.0};
  for (cplx E : {cplx{3.0, 1.0}, cplx{-4.0, 2.0}, cplx{20.0, 0.5}}) {
    for (Sheet sh : {Sheet::I, Sheet::II}) {
      SheetedPoint p{E, {sh}}, pc{std::conj(E), {sh}};
      EXPECT_LT(std::abs(ere.t(pc) - std::conj(ere.t(p))), 1e-14 * std::abs(ere.t(p)));
      EXPECT_LT(std::abs(cdd.t(pc) - std::conj(cdd.t(p))), 1e-14 * std::abs(cdd.t(p)));
    }
  }
}

TEST(CDD, AmplitudeVanishesAtMZ) {
  CDDModel cdd{2500.0, 4.0, 35.0, 470.0};
  EXPECT_LT(std::abs(cdd.t(physical_point(cplx{4.0, 0.0}, 1))), 1e-10);
}

TEST(PhaseShift, ConstantKIsSmooth) {
  const auto m = two_channel_constant();
  std::vector<double> grid;
  for (double sqs = 290.0; sqs < 2000.0; sqs += 5.0) grid.push_back(sqs * sqs);
  const auto t = phase_shift(m, grid);
  ASSERT_TRUE(t.unwrapped[0]);
  for (std::size_t i = 1; i < grid.size(); ++i)
    EXPECT_LT(std::abs(t.delta_deg[0][i] - t.delta_deg[0][i - 1]), 10.0);
  // K K column is NaN below its threshold.
  EXPECT_TRUE(std::isnan(t.delta_deg[1][0]));
  EXPECT_FALSE(std::isnan(t.delta_deg[1].back()));
}

TEST(PhaseShift, NarrowResonanceRisesBy180) {
  const auto m = narrow_bare_pole(150.0, 780.0);
  std::vector<double> grid;
  for (double sqs = 700.0; sqs <= 860.0; sqs += 0.25) grid.push_back(sqs * sqs);
  const auto t = phase_shift(m, grid);
  ASSERT_TRUE(t.unwrapped[0]);
  const auto& d = t.delta_deg[0];
  EXPECT_NEAR(d.back() - d.front(), 180.0, 15.0);
  // Passes through 90 degrees (mod 180) inside the window.
  bool crossed = false;
  for (std::size_t i = 1; i < d.size(); ++i) {
    const double a = std::fmod(d[i - 1] - 90.0 + 3600.0, 180.0), b = std::fmod(d[i] - 90.0 + 3600.0, 180.0);
    if (std::abs(a - b) > 90.0) crossed = true;
  }
  EXPECT_TRUE(crossed);
  // Single channel: inelasticity identically one.
  for (double e : t.inelasticity) EXPECT_NEAR(e, 1.0, 1e-12);
}

TEST(PhaseShift, UnwrapStableUnderRefinement) {
  const auto m = narrow_bare_pole(150.0, 780.0);
  std::vector<double> coarse, fine;
  for (int i = 0; i <= 320; ++i) coarse.push_back(std::pow(700.0 + 0.5 * i, 2));
  for (int i = 0; i <= 640; ++i) fine.push_back(std::pow(700.0 + 0.25 * i, 2));
  const auto a = phase_shift(m, coarse), b = phase_shift(m, fine);
  for (std::size_t i = 0; i < coarse.size(); ++i) EXPECT_NEAR(a.delta_deg[0][i], b.delta_deg[0][2 * i], 1e-9);
}

TEST(PhaseShift, GuardRefusesAmbiguousSteps) {
  std::vector<double> deg{10.0, 20.0, -70.0};  // step of exactly 90 after continuation
  const auto copy = deg;
  EXPECT_FALSE(unwrap_phases(deg));
  EXPECT_EQ(deg, copy);
  std::vector<double> ok{80.0, 89.0, -88.0, -80.0};
  EXPECT_TRUE(unwrap_phases(ok));
  EXPECT_NEAR(ok[2], 92.0, 1e-12);
  EXPECT_NEAR(ok[3], 100.0, 1e-12);
}
