#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>

#include "hadcomp/lseq.hpp"
#include "oracles.hpp"

using namespace hadcomp;

namespace {

// Deuteron-like scales.
constexpr double mu = 469.459;
constexpr double beta = 285.9;
constexpr double kappaD = 45.7;

double yamaguchi_lambda(double kappa) { return 4.0 * pi * beta * (beta + kappa) * (beta + kappa) / mu; }

Potential deuteron() {
  return Potential::separable(yamaguchi_lambda(kappaD), mu, {FormFactor::yamaguchi(beta)}, {"3S1"});
}

// kappa = -i k for the closed-form s-wave integral.
cplx oracle_I(cplx E, Sheet sheet) {
  return oracles::yamaguchi_I(mu, beta, -I_unit * nonrelativistic_momentum(mu, E, sheet));
}

cplx oracle_dI(cplx E, Sheet sheet) {
  return oracles::yamaguchi_dI_dE(mu, beta, -I_unit * nonrelativistic_momentum(mu, E, sheet));
}

// Real-axis GSL integral of q^2 f^2/(2 pi^2 (q^2/2mu - E)^n) for E < 0.
double gsl_loop(const FormFactor& f, double E, int n) {
  return oracles::integrate(
             [&](double q) {
               const double v = f(q).real();
               return q * q * v * v / (2.0 * pi * pi * std::pow(q * q / (2.0 * mu) - E, n));
             },
             0.0, 3.0 * f.scale()) +
         oracles::integrate(
             [&](double q) {
               const double v = f(q).real();
               return q * q * v * v / (2.0 * pi * pi * std::pow(q * q / (2.0 * mu) - E, n));
             },
             3.0 * f.scale(), std::numeric_limits<double>::infinity());
}

}  // namespace

TEST(FormFactor, DerivativesMatchDifferences) {
  const cplx k{130.0, -40.0};
  const double h = 1e-3;
  for (const auto& f : {FormFactor::yamaguchi(250.0, 0), FormFactor::yamaguchi(250.0, 1, 2.0),
                        FormFactor::yamaguchi(300.0, 2), FormFactor::gaussian(400.0, 0), FormFactor::gaussian(400.0, 2)}) {
    const cplx fd = (f(k + h) - f(k - h)) / (2.0 * h);
    EXPECT_LT(std::abs(fd - f.derivative(k)), 1e-7 * std::abs(fd));
  }
}

TEST(LoopIntegral, MatchesClosedFormOnBothSheets) {
  const Potential p = deuteron();
  for (cplx E : {cplx{-2.2, 0.0}, cplx{-40.0, 0.0}, cplx{15.0, -3.0}, cplx{30.0, 8.0}, cplx{-10.0, -20.0}}) {
    for (Sheet sh : {Sheet::I, Sheet::II}) {
      const cplx I = loop_integral(p, E, sh).total;
      const cplx dI = loop_integral_dE(p, E, sh).total;
      EXPECT_LT(std::abs(I - oracle_I(E, sh)), 1e-11 * std::abs(oracle_I(E, sh))) << E;
      EXPECT_LT(std::abs(dI - oracle_dI(E, sh)), 1e-10 * std::abs(oracle_dI(E, sh))) << E;
    }
  }
  // On the cut from above.
  for (double E : {0.5, 12.0, 90.0}) {
    const cplx I = loop_integral(p, E, Sheet::I).total;
    EXPECT_LT(std::abs(I - oracle_I(E, Sheet::I)), 1e-11 * std::abs(oracle_I(E, Sheet::I)));
    const double k = std::sqrt(2.0 * mu * E);
    const double F = std::norm(FormFactor::yamaguchi(beta)(k));
    EXPECT_NEAR(I.imag(), mu * k * F / (2.0 * pi), 1e-11 * mu * k * F);
  }
  EXPECT_THROW(loop_integral(p, cplx{5.0, 0.0}, Sheet::I, Prescription::none), Error);
}

TEST(LoopIntegral, GaussianAgainstRealAxisQuadrature) {
  const auto f = FormFactor::gaussian(350.0, 0);
  const Potential p = Potential::separable(1e-4, mu, {f});
  for (double E : {-1.0, -25.0}) {
    EXPECT_LT(std::abs(loop_integral(p, E, Sheet::I).total - gsl_loop(f, E, 1)), 1e-11 * gsl_loop(f, E, 1));
    EXPECT_LT(std::abs(loop_integral_dE(p, E, Sheet::I).total - gsl_loop(f, E, 2)), 1e-10 * gsl_loop(f, E, 2));
  }
}

TEST(SolveT, ZeroPotentialGivesZero) {
  const Potential p = Potential::separable(0.0, mu, {FormFactor::yamaguchi(beta)});
  const CMatrix T = solve_T(p, cplx{-3.0, 0.0}, {10.0, 100.0});
  EXPECT_EQ(T.cwiseAbs().maxCoeff(), 0.0);
}

TEST(SolveT, NystromMatchesSeparableClosedForm) {
  const Potential p = deuteron();
  const std::vector<double> k{0.0, 30.0, 150.0, 600.0};
  // Complex energies close to the cut resolve only algebraically on a real grid; stay clear of it.
  for (cplx E : {cplx{-5.0, 0.0}, cplx{-60.0, 0.0}, cplx{20.0, -30.0}, cplx{-10.0, 15.0}, cplx{8.0, 0.0},
                 cplx{75.0, 0.0}}) {
    const CMatrix T = solve_T(p, E, k);
    const cplx tau = yamaguchi_lambda(kappaD) / (1.0 - yamaguchi_lambda(kappaD) * oracle_I(E, Sheet::I));
    double worst = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i)
      for (std::size_t j = 0; j < k.size(); ++j) {
        const cplx ref = tau / ((k[i] * k[i] + beta * beta) * (k[j] * k[j] + beta * beta));
        worst = std::max(worst, std::abs(T(i, j) - ref) / std::abs(ref));
      }
    EXPECT_LT(worst, 1e-10) << E;
    EXPECT_LT((T - T.transpose()).cwiseAbs().maxCoeff(), 1e-12 * T.cwiseAbs().maxCoeff());
  }
}

TEST(SolveT, ResolutionErrorOnCoarseGrid) {
  LSOptions o;
  o.n_nodes = 4;
  o.resolution_tol = 1e-12;
  try {
    solve_T(deuteron(), cplx{-5.0, 0.0}, {10.0}, o);
    FAIL() << "expected a resolution error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::resolution);
  }
}

TEST(BoundState, DeuteronLikeYamaguchi) {
  const Potential p = deuteron();
  const BoundState b = bound_state(p);
  const double EB = -kappaD * kappaD / (2.0 * mu);
  EXPECT_LT(std::abs(b.E - EB), 1e-8 * std::abs(EB));
  EXPECT_LT(b.resolution_change, 1e-10);
  EXPECT_LT(b.g.homogeneous_residual, 1e-10);
  // g(k) = f(k) / sqrt(I'(E_B)).
  const double norm = std::sqrt(oracle_dI(EB, Sheet::I).real());
  for (double k : {0.0, 50.0, 300.0, 1500.0}) {
    const double ref = 1.0 / ((k * k + beta * beta) * norm);
    EXPECT_LT(std::abs(b.g(0, k) - ref), 1e-8 * ref) << k;
  }
  const auto X = X_bound(b);
  EXPECT_LT(std::abs(X.X - 1.0), 1e-6);
  EXPECT_FALSE(X.cutoff_warning);
  EXPECT_LT(residue_deviation(b, 40.0, 200, p.map_scale()), 1e-8);
}

TEST(BoundState, StableUnderCutoffDoubling) {
  const Potential p = deuteron();
  BoundStateOptions o;
  const BoundState a = bound_state(p, o);
  o.grid.map_scale = 2.0 * p.map_scale();
  const BoundState b = bound_state(p, o);
  EXPECT_LT(std::abs(a.E - b.E), 1e-10 * std::abs(a.E));
  EXPECT_LT(std::abs(X_bound(a).X - X_bound(b).X), 1e-8);
}

TEST(BoundState, GaussianFormFactor) {
  const auto f = FormFactor::gaussian(400.0, 0);
  const double lambda = 1.0 / gsl_loop(f, -8.0, 1);  // bound at E = -8 MeV
  const Potential p = Potential::separable(lambda, mu, {f});
  const BoundState b = bound_state(p);
  EXPECT_NEAR(b.E, -8.0, 1e-8 * 8.0);
  EXPECT_LT(std::abs(X_bound(b).X - 1.0), 1e-6);
}

TEST(BoundState, TwoCoupledWavesShareUnitCompositeness) {
  const auto fS = FormFactor::yamaguchi(beta, 0);
  for (double mix : {0.0, 0.3, 1.0}) {
    const auto fD = FormFactor::yamaguchi(1.4 * beta, 2, mix * 1.4 * beta * 1.4 * beta);
    // lambda fixed by binding at E = -2.2 MeV, from GSL integrals.
    const double E0 = -2.2;
    const double lambda = 1.0 / (gsl_loop(fS, E0, 1) + gsl_loop(fD, E0, 1));
    const Potential p = Potential::separable(lambda, mu, {fS, fD}, {"3S1", "3D1"});
    const BoundState b = bound_state(p);
    EXPECT_NEAR(b.E, E0, 1e-8 * 2.2);
    const auto X = X_bound(b);
    EXPECT_LT(std::abs(X.X - 1.0), 1e-6) << mix;
    const double dS = gsl_loop(fS, E0, 2), dD = gsl_loop(fD, E0, 2);
    EXPECT_NEAR(X.X_wave[0], dS / (dS + dD), 1e-7) << mix;
    EXPECT_NEAR(X.X_wave[1], dD / (dS + dD), 1e-7) << mix;
    if (mix == 0.0) EXPECT_EQ(X.X_wave[1], 0.0);
  }
}

TEST(BoundState, RankTwoGeneralKernel) {
  const auto f1 = FormFactor::yamaguchi(250.0), f2 = FormFactor::gaussian(500.0);
  // Attractive Yamaguchi term above its binding strength plus a short-range repulsive core.
  const double l1 = 1.5 * 4.0 * pi * std::pow(250.0, 3) / mu;
  const double l2 = -0.5 / gsl_loop(f2, -1e-9, 1);
  auto V = [&](std::size_t, std::size_t, double k, double kp) {
    return l1 * f1(k).real() * f1(kp).real() + l2 * f2(k).real() * f2(kp).real();
  };
  const Potential p = Potential::general(mu, {"1S0"}, V, 500.0);
  const auto all = bound_states(p);
  ASSERT_FALSE(all.empty());
  for (const auto& b : all) EXPECT_LT(std::abs(X_bound(b).X - 1.0), 1e-6) << b.E;
  // No sheet-II access for non-separable kernels.
  try {
    find_pole(p, Sheet::II, cplx{-1.0, 0.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::continuation_blocked);
  }
}

TEST(BoundState, RejectsAsymmetricKernel) {
  auto V = [](std::size_t, std::size_t, double k, double kp) { return 1e-6 * k / (1.0 + kp * kp); };
  EXPECT_THROW(Potential::general(mu, {"1S0"}, V), Error);
}

TEST(BoundState, NoZeroForRepulsion) {
  const Potential p = Potential::separable(-yamaguchi_lambda(kappaD), mu, {FormFactor::yamaguchi(beta)});
  try {
    bound_state(p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::no_zero);
  }
}

TEST(BoundState, TabulatedKernelFromCsv) {
  const std::string path = ::testing::TempDir() + "yamaguchi_table.csv";
  {
    std::ofstream out(path);
    out << "k,k_prime,V\n";
    const double lambda = yamaguchi_lambda(kappaD);
    std::vector<double> ks;
    for (int i = 0; i <= 160; ++i) ks.push_back(12.5 * i);
    for (double a : ks)
      for (double b : ks) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.17g\n", a, b,
                      lambda / ((a * a + beta * beta) * (b * b + beta * beta)));
        out << buf;
      }
  }
  const Potential p = Potential::tabulated(mu, read_kernel_csv(path), "3S1");
  BoundStateOptions o;
  o.grid.check_resolution = false;
  const BoundState b = bound_state(p, o);
  // Interpolation shifts the binding slightly; the theorem holds for the interpolated kernel.
  EXPECT_NEAR(b.E, -kappaD * kappaD / (2.0 * mu), 0.05);
  const auto X = X_bound(b);
  EXPECT_LT(std::abs(X.X - 1.0), 1e-3);
  EXPECT_TRUE(X.cutoff_warning);  // V is still sizeable at the table edge
  std::remove(path.c_str());
}

TEST(BoundState, AsymmetricTableRejected) {
  const std::string path = ::testing::TempDir() + "bad_table.csv";
  {
    std::ofstream out(path);
    out << "k,k_prime,V\n0,0,1\n0,1,2\n1,0,3\n1,1,4\n";
  }
  EXPECT_THROW(read_kernel_csv(path), Error);
  std::remove(path.c_str());
}

TEST(SeparablePole, BoundStateMatchesNystromCompositeness) {
  const Potential p = deuteron();
  const auto pole = find_pole(p, Sheet::I, cplx{-3.0, 0.0});
  const auto r = X_resonance(p, pole);
  EXPECT_LT(std::abs(r.X - 1.0), 1e-8);
  EXPECT_EQ(r.boundary_part[0], cplx(0.0, 0.0));
  EXPECT_NEAR(r.X.real(), X_bound(bound_state(p)).X, 1e-6);
}

TEST(SeparablePole, VirtualState) {
  // kappa_v = beta - sqrt(lambda mu/(4 pi beta)) > 0 puts the pole at k = -i kappa_v.
  const double lambda = 0.8 * yamaguchi_lambda(0.0);
  const double kv = beta - std::sqrt(lambda * mu / (4.0 * pi * beta));
  const Potential p = Potential::separable(lambda, mu, {FormFactor::yamaguchi(beta)});
  const auto pole = find_pole(p, Sheet::II, cplx{-0.8 * kv * kv / (2.0 * mu), 0.0});
  EXPECT_LT(std::abs(pole.location.z - (-kv * kv / (2.0 * mu))), 1e-10 * kv * kv / (2.0 * mu));
  const auto r = X_resonance(p, pole);
  EXPECT_LT(std::abs(r.k - cplx{0.0, -kv}), 1e-8 * kv);
  EXPECT_LT(std::abs(r.X - 1.0), 1e-8);
  EXPECT_GT(std::abs(r.X_without_boundary - 1.0), 0.1);
}

TEST(SeparablePole, RepulsiveSWaveSheetTwoPole) {
  // lambda < 0: k = s - i beta with s = sqrt(|lambda| mu/(4 pi beta)).
  const double lambda = -0.5 * yamaguchi_lambda(0.0);
  const double s = std::sqrt(-lambda * mu / (4.0 * pi * beta));
  const cplx k{s, -beta};
  const cplx E = k * k / (2.0 * mu);
  const Potential p = Potential::separable(lambda, mu, {FormFactor::yamaguchi(beta)});
  const auto pole = find_pole(p, Sheet::II, E * cplx{1.05, 0.03});
  EXPECT_LT(std::abs(pole.location.z - E), 1e-10 * std::abs(E));
  const auto r = X_resonance(p, pole);
  EXPECT_LT(std::abs(r.X - 1.0), 1e-8);
  EXPECT_GT(std::abs(r.X_without_boundary - 1.0), 0.1);
}

TEST(SeparablePole, NarrowPWaveResonance) {
  const auto f = FormFactor::yamaguchi(beta, 1);
  // Critical strength for a zero-energy p-wave bound state, then slightly weaker.
  const double crit = 1.0 / gsl_loop(f, -1e-9, 1);
  const Potential p = Potential::separable(0.97 * crit, mu, {f});
  const auto pole = find_pole(p, Sheet::II, cplx{10.0, -1.0});
  EXPECT_GT(pole.location.z.real(), 0.0);
  EXPECT_LT(pole.location.z.imag(), 0.0);
  EXPECT_LT(std::abs(1.0 - p.lambda() * loop_integral(p, pole.location.z, Sheet::II).total), 1e-10);
  const auto r = X_resonance(p, pole);
  EXPECT_LT(std::abs(r.X - 1.0), 1e-5);
  EXPECT_GT(std::abs(r.X_without_boundary - 1.0), 1e-2);
  // Contour-radius independence of gamma^2.
  ResidueOptions ro;
  ro.radius = 0.5 * r.radius;
  EXPECT_LT(std::abs(X_resonance(p, pole, ro).gamma2 - r.gamma2), 1e-8 * std::abs(r.gamma2));
}

TEST(SeparablePole, BlockedByFormFactorSingularity) {
  const cplx s = std::polar(200.0, 0.1);
  auto f = [s](cplx k) { return 1.0 / ((k - s) * (k - std::conj(s))); };
  auto df = [s](cplx k) {
    const cplx a = k - s, b = k - std::conj(s);
    return -(a + b) / (a * a * b * b);
  };
  const Potential p =
      Potential::separable(1e-3, mu, {FormFactor::custom(f, df, 200.0, pi / 2.0, {s, std::conj(s)})});
  try {
    loop_integral(p, cplx{10.0, -5.0}, Sheet::II);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::continuation_blocked);
  }
}

TEST(Unitarity, SeparableAndNystrom) {
  const Potential sep = deuteron();
  const auto fS = FormFactor::yamaguchi(beta, 0), fD = FormFactor::yamaguchi(1.4 * beta, 2, 0.5 * 1.96 * beta * beta);
  const Potential two = Potential::separable(yamaguchi_lambda(kappaD), mu, {fS, fD}, {"3S1", "3D1"});
  auto V = [&](std::size_t a, std::size_t b, double k, double kp) { return two.V(a, b, k, kp); };
  const Potential gen = Potential::general(mu, {"3S1", "3D1"}, V, two.map_scale());
  for (double E : {0.3, 5.0, 40.0, 150.0}) {
    EXPECT_LT(unitarity_defect(S_matrix(sep, E).S), 1e-12) << E;
    EXPECT_LT(unitarity_defect(S_matrix(two, E).S), 1e-12) << E;
    const auto S = S_matrix(gen, E);
    EXPECT_LT(unitarity_defect(S.S), 1e-10) << E;
    EXPECT_LT((S.S - S_matrix(two, E).S).cwiseAbs().maxCoeff(), 1e-9) << E;
  }
}

TEST(PhaseShift, LevinsonBoundStateStartsNear180) {
  Potential p = deuteron();
  p.threshold = 938.92 * 2.0;
  std::vector<double> grid;
  for (double E = 0.01; E < 300.0; E *= 1.2) grid.push_back(E);
  const auto t = phase_shift(p, grid);
  ASSERT_TRUE(t.unwrapped[0]);
  EXPECT_NEAR(std::fmod(t.delta_deg[0].front() + 360.0, 180.0), 180.0 - 0.0, 10.0);
  EXPECT_NEAR(t.sqrt_s.front(), 1877.85, 1e-9);
  for (double e : t.inelasticity) EXPECT_NEAR(e, 1.0, 1e-12);
}
