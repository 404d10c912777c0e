#include <gtest/gtest.h>

#include "hadcomp/core.hpp"

using namespace hadcomp;

TEST(Channel, DerivedQuantities) {
  Channel ch(100.0, 300.0, 1, "1P1");
  EXPECT_DOUBLE_EQ(ch.mu(), 75.0);
  EXPECT_DOUBLE_EQ(ch.threshold_E(), 400.0);
  EXPECT_DOUBLE_EQ(ch.threshold_s(), 160000.0);
  EXPECT_LT(ch.mu(), std::min(ch.m1(), ch.m2()));
  EXPECT_EQ(ch.spin_label(), "1P1");
}

TEST(Channel, RejectsBadMasses) {
  EXPECT_THROW(Channel(0.0, 1.0), Error);
  EXPECT_THROW(Channel(1.0, -2.0), Error);
  EXPECT_THROW(Channel(1.0, 1.0, -1), Error);
}

TEST(Momentum, BoundStateBranchIsPositiveImaginary) {
  Channel ch(938.272, 939.565);
  const double EB = 2.2245;
  auto pt = physical_point(cplx{-EB, 0.0}, 1);
  const auto m = cm_momentum(ch, 0, pt, Kinematics::nonrelativistic);
  EXPECT_NEAR(m.k.real(), 0.0, 1e-14);
  EXPECT_NEAR(m.k.imag(), std::sqrt(2.0 * ch.mu() * EB), 1e-12);
}

TEST(Momentum, ResonanceOnSecondSheetIsInFourthQuadrant) {
  Channel ch(500.0, 500.0);
  const cplx ER{20.0, -5.0};
  SheetedPoint pt{ER, {Sheet::II}};
  const auto m = cm_momentum(ch, 0, pt, Kinematics::nonrelativistic);
  EXPECT_GT(m.k.real(), 0.0);
  EXPECT_LT(m.k.imag(), 0.0);
  EXPECT_NEAR(std::abs(m.k * m.k - 2.0 * ch.mu() * ER), 0.0, 1e-10);
}

TEST(Momentum, EqualMassRelativistic) {
  // s = 250^2, m = 100: k = sqrt(s/4 - m^2) = 75
  Channel ch(100.0, 100.0);
  const auto k = relativistic_momentum(ch, cplx{250.0 * 250.0, 0.0}, Sheet::I);
  EXPECT_NEAR(k.real(), 75.0, 1e-12);
  EXPECT_EQ(k.imag(), 0.0);
}

TEST(Momentum, SecondSheetFlipsSign) {
  Channel ch(139.57, 493.68);
  for (cplx s : {cplx{4.0e5, 3.0e4}, cplx{9.0e5, -2.0e5}, cplx{1.0e5, 0.0}, cplx{-3.0e5, 1.0e3}}) {
    const cplx k1 = relativistic_momentum(ch, s, Sheet::I);
    const cplx k2 = relativistic_momentum(ch, s, Sheet::II);
    EXPECT_EQ(k1, -k2);
    EXPECT_GE(k1.imag(), 0.0);
  }
}

TEST(Momentum, SchwarzReflectionOnFirstSheet) {
  // p^I has Im >= 0 on both half planes, so the reflection carries a sign:
  // rho (p / sqrt s) and k^2 reflect plainly, p itself as -conj.
  Channel ch(139.57, 139.57);
  for (cplx s : {cplx{3.0e5, 2.0e4}, cplx{5.0e4, 1.0e3}, cplx{8.0e5, 4.0e5}}) {
    const cplx k = relativistic_momentum(ch, s, Sheet::I);
    const cplx kc = relativistic_momentum(ch, std::conj(s), Sheet::I);
    EXPECT_NEAR(std::abs(kc * kc - std::conj(k * k)), 0.0, 1e-9 * std::norm(k));
  }
}

TEST(Momentum, SingularAtSZero) {
  Channel ch(1.0, 2.0);
  EXPECT_THROW(relativistic_momentum(ch, cplx{0.0, 0.0}, Sheet::I), Error);
  EXPECT_THROW(phase_space(ch, cplx{0.0, 0.0}, Sheet::I), Error);
}

TEST(Momentum, PrescriptionOnTheCut) {
  Channel ch(100.0, 100.0);
  const cplx s{250.0 * 250.0, 0.0};
  EXPECT_GT(relativistic_momentum(ch, s, Sheet::I, Prescription::above).real(), 0.0);
  EXPECT_LT(relativistic_momentum(ch, s, Sheet::I, Prescription::below).real(), 0.0);
  EXPECT_THROW(relativistic_momentum(ch, s, Sheet::I, Prescription::none), Error);
  EXPECT_THROW(relativistic_momentum(ch, cplx{4.0e4, 0.0}, Sheet::I, Prescription::none), Error);
  // Off the cut no prescription is needed.
  EXPECT_NO_THROW(relativistic_momentum(ch, cplx{3.0e4, 0.0}, Sheet::I, Prescription::none));
}

TEST(PhaseSpace, Values) {
  Channel ch(100.0, 100.0);
  const cplx rho = phase_space(ch, cplx{62500.0, 0.0}, Sheet::I);
  EXPECT_NEAR(rho.real(), 75.0 / (8.0 * pi * 250.0), 1e-15);
  EXPECT_NEAR(rho.real(), 0.011937, 5e-7);
  // Below threshold: purely imaginary.
  const cplx below = phase_space(ch, cplx{30000.0, 0.0}, Sheet::I);
  EXPECT_EQ(below.real(), 0.0);
  EXPECT_GT(below.imag(), 0.0);
  // Sheet II flips the sign.
  EXPECT_EQ(phase_space(ch, cplx{62500.0, 0.0}, Sheet::II), -rho);
}

TEST(PhaseSpace, RealPositiveAboveThreshold) {
  Channel ch(139.57, 493.68);
  for (int i = 1; i <= 40; ++i) {
    const double s = ch.threshold_s() * (1.0 + 0.05 * i);
    const cplx rho = phase_space(ch, cplx{s, 0.0}, Sheet::I);
    EXPECT_GT(rho.real(), 0.0);
    EXPECT_EQ(rho.imag(), 0.0);
  }
}

TEST(Units, FmConversion) {
  EXPECT_NEAR(fm_to_inv_mev(hbarc), 1.0, 1e-15);
  EXPECT_NEAR(inv_mev_to_fm(fm_to_inv_mev(-23.7)), -23.7, 1e-13);
}
