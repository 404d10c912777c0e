#pragma once

// Compositeness X_i, elementariness Z and related dictionaries.
//
// For T = [K^-1 + G]^-1 with couplings g g^T = lim (z_p - z) T,
//   X_i = -g_i^2 dG_i/dz,   Z = g^T G (dK/dz) G g,   sum_i X_i + Z = 1.
// Nonrelativistic scalar models use G = -i k and write Z = -g^2 d(K^-1)/dE.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hadcomp/amplitudes.hpp"
#include "hadcomp/core.hpp"
#include "hadcomp/linalg.hpp"
#include "hadcomp/loopfn.hpp"
#include "hadcomp/poles.hpp"

namespace hadcomp {

struct PoleReport {
  SheetedPoint pole;
  CouplingSet couplings;
  std::vector<cplx> X_i;
  cplx X;
  std::optional<cplx> Z;  // empty when the kernel has no derivative
  std::optional<double> sum_residual;
  std::vector<double> X_abs_i;
  std::vector<double> phases;  // phi_i from phase_normalize, empty until applied
  bool laurent_applicable = true;
};

/// Whether Re z lies between the thresholds the sheet signature implies:
/// with n channels on sheet II, th[n-1] < Re z < th[n] (th sorted, th[-1] = -inf, th[N] = +inf).
inline bool laurent_applicable(std::vector<double> thresholds, const SheetedPoint& p) {
  std::sort(thresholds.begin(), thresholds.end());
  std::size_t n = 0;
  for (Sheet s : p.sheets) n += (s == Sheet::II) ? 1 : 0;
  const double lo = n == 0 ? -std::numeric_limits<double>::infinity() : thresholds[n - 1];
  const double hi = n >= thresholds.size() ? std::numeric_limits<double>::infinity() : thresholds[n];
  return lo < p.z.real() && p.z.real() < hi;
}

inline std::vector<double> moduli(const std::vector<cplx>& x) {
  std::vector<double> out;
  for (cplx v : x) out.push_back(std::abs(v));
  return out;
}

inline PoleReport compositeness_sum_rule(const CoupledChannelModel& m, const SheetedPoint& pole,
                                         const CouplingSet& c) {
  PoleReport r;
  r.pole = pole;
  r.couplings = c;
  const CVector dG = m.dG_ds(pole);
  r.X = 0.0;
  for (std::size_t i = 0; i < m.n(); ++i) {
    const cplx x = -c.g(i) * c.g(i) * dG(i);
    r.X_i.push_back(x);
    r.X += x;
  }
  r.X_abs_i = moduli(r.X_i);
  const CVector G = m.G(pole);
  const CVector Gg = G.asDiagonal() * c.g;
  r.Z = (Gg.transpose() * m.kernel.dK_ds(pole.z) * Gg)(0, 0);
  r.sum_residual = std::abs(r.X + *r.Z - 1.0);
  r.laurent_applicable = laurent_applicable(m.thresholds(), pole);
  return r;
}

namespace detail {

template <class Model>
PoleReport scalar_sum_rule(const Model& m, const SheetedPoint& pole, const CouplingSet& c) {
  PoleReport r;
  r.pole = pole;
  r.couplings = c;
  const cplx k = m.momentum(pole);
  const cplx g2 = c.g(0) * c.g(0);
  r.X = -g2 * nr_loop_dG_dE(m.mu, k);
  r.X_i = {r.X};
  r.X_abs_i = moduli(r.X_i);
  r.Z = -g2 * m.dKinv_dE(pole.z);
  r.sum_residual = std::abs(r.X + *r.Z - 1.0);
  r.laurent_applicable = laurent_applicable({0.0}, pole);
  return r;
}

}  // namespace detail

inline PoleReport compositeness_sum_rule(const EREModel& m, const SheetedPoint& pole, const CouplingSet& c) {
  return detail::scalar_sum_rule(m, pole, c);
}

inline PoleReport compositeness_sum_rule(const CDDModel& m, const SheetedPoint& pole, const CouplingSet& c) {
  return detail::scalar_sum_rule(m, pole, c);
}

/// Records phi_i = -arg(X_i)/2, the S-matrix phase that rotates each X_i onto
/// the positive real axis. The complex X_i are kept.
inline PoleReport phase_normalize(PoleReport r) {
  r.phases.clear();
  for (cplx x : r.X_i) r.phases.push_back(x == cplx{0.0, 0.0} ? 0.0 : -0.5 * std::arg(x));
  r.X_abs_i = moduli(r.X_i);
  return r;
}

/// Couplings after a diagonal phase transformation S_ii -> e^{2 i phi_i} S_ii.
inline CVector rephase_couplings(const CVector& g, const std::vector<double>& phi) {
  CVector out = g;
  for (Eigen::Index i = 0; i < g.size(); ++i) out(i) *= std::polar(1.0, phi.at(i));
  return out;
}

struct EREParameters {
  double a;  // MeV^-1
  double r;  // MeV^-1
  double r_over_a;
};

/// (a, r) whose ERE has its sheet-II pole at k_R = k_r - i k_i:
///   a = -2 k_i / |k_R|^2,  r = -1/k_i.
inline EREParameters ere_from_pole(cplx kR) {
  const double kr = kR.real(), ki = -kR.imag();
  if (ki == 0.0) throw Error(ErrorKind::degenerate, "pole on the real momentum axis (k_i = 0)");
  if (kr == 0.0)
    throw Error(ErrorKind::degenerate, "k_r = 0 is a bound or virtual state, not a resonance (r/a -> 1/2)");
  EREParameters p;
  p.a = -2.0 * ki / std::norm(kR);
  p.r = -1.0 / ki;
  p.r_over_a = p.r / p.a;
  return p;
}

struct ERECompositeness {
  cplx X;            // i k_i / k_r
  double X_abs;      // k_i / k_r
  double X_abs_alt;  // (2r/a - 1)^-1, which equals (k_i/k_r)^2
};

inline ERECompositeness ere_compositeness(cplx kR) {
  const double kr = kR.real(), ki = -kR.imag();
  if (kr == 0.0) throw Error(ErrorKind::degenerate, "k_r = 0 in X = i k_i / k_r");
  if (!(kr > 0.0) || !(ki > 0.0))
    throw Error(ErrorKind::invalid_argument, "ERE compositeness expects a sheet-II pole with k_r, k_i > 0");
  const EREParameters p = ere_from_pole(kR);
  return {I_unit * ki / kr, ki / kr, 1.0 / (2.0 * p.r_over_a - 1.0)};
}

/// k-plane residue gamma_k^2 = -1 / (d t^-1/dk) of the ERE at momentum k.
inline cplx ere_k_plane_residue(const EREModel& m, cplx k) {
  return -1.0 / (m.r * k + static_cast<double>(loop_imaginary_sign) * I_unit);
}

/// A real number that may be +-infinity, reported as such rather than as a float overflow.
struct ExtendedReal {
  enum class Kind { finite, plus_infinity, minus_infinity };
  Kind kind = Kind::finite;
  double value = 0.0;

  static ExtendedReal finite(double v) { return {Kind::finite, v}; }
  static ExtendedReal plus_inf() { return {Kind::plus_infinity, std::numeric_limits<double>::infinity()}; }
  static ExtendedReal minus_inf() { return {Kind::minus_infinity, -std::numeric_limits<double>::infinity()}; }

  bool is_finite() const { return kind == Kind::finite; }

  std::string str() const {
    switch (kind) {
      case Kind::plus_infinity: return "+inf";
      case Kind::minus_infinity: return "-inf";
      default: break;
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", value);
    return buf;
  }
};

struct CDDDiagnostics {
  ExtendedReal delta_a;  // MeV^-1
  ExtendedReal delta_r;  // MeV^-1
  bool cdd_proximity_flag = false;
};

/// delta_a = M_Z / lambda, delta_r = -lambda / (mu M_Z^2). The flag is raised
/// when delta_r < -factor / |k| at the analysis momentum k.
inline CDDDiagnostics cdd_shifts(const CDDModel& m, double k_analysis, double factor = 10.0) {
  CDDDiagnostics d;
  if (m.lambda == 0.0) {
    d.delta_a = ExtendedReal::finite(0.0);
    d.delta_r = ExtendedReal::finite(0.0);
    return d;
  }
  d.delta_a = ExtendedReal::finite(m.M_Z / m.lambda);
  if (m.M_Z == 0.0) {
    d.delta_r = m.lambda > 0.0 ? ExtendedReal::minus_inf() : ExtendedReal::plus_inf();
  } else {
    const double dr = -m.lambda / (m.mu * m.M_Z * m.M_Z);
    d.delta_r = std::isfinite(dr) ? ExtendedReal::finite(dr) : (dr < 0 ? ExtendedReal::minus_inf() : ExtendedReal::plus_inf());
  }
  if (!(k_analysis > 0.0)) throw Error(ErrorKind::invalid_argument, "analysis momentum must be positive");
  d.cdd_proximity_flag = d.delta_r.kind == ExtendedReal::Kind::minus_infinity ||
                         (d.delta_r.is_finite() && d.delta_r.value < -factor / k_analysis);
  return d;
}

/// Flag for a fitted effective range alone: r < -factor / |k|.
inline bool large_negative_r(double r, double k_analysis, double factor = 10.0) {
  return r < -factor / k_analysis;
}

/// X = g^2 mu^2 / (2 pi kappa) for a shallow bound state at k_B = i kappa.
inline double shallow_bound_X(double g, double mu, double kappa) {
  if (!(kappa > 0.0)) throw Error(ErrorKind::invalid_argument, "binding momentum must be positive");
  return g * g * mu * mu / (2.0 * pi * kappa);
}

}  // namespace hadcomp
