#pragma once

// Two-channel width saturation. A resonance of mass M_R and width Gamma near
// the threshold of channel 2 splits as
//   Gamma_1 = c_1 X_1,  c_1 = 2 k(M_R) |k_R| / mu,
//   Gamma_2 = c_2 X_2,  c_2 = |k_R| M_R^2/(pi mu) int_{M_th}^inf dW k(W)/W^2 Gamma/((M_R - W)^2 + Gamma^2/4),
// and (X_1, X_2) follow from Gamma_1 + Gamma_2 = Gamma plus one closure.

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hadcomp/core.hpp"
#include "hadcomp/error.hpp"

namespace hadcomp {

/// Channel momentum k(W) at total energy W, zero below threshold.
struct MomentumFunction {
  enum class Form { nonrelativistic, relativistic };
  Form form = Form::nonrelativistic;
  double m1 = 0.0, m2 = 0.0;

  static MomentumFunction nonrelativistic(double m1, double m2) { return {Form::nonrelativistic, m1, m2}; }
  static MomentumFunction relativistic(double m1, double m2) { return {Form::relativistic, m1, m2}; }

  double threshold() const { return m1 + m2; }
  double mu() const { return m1 * m2 / (m1 + m2); }

  double operator()(double W) const {
    if (!(W > threshold())) return 0.0;
    if (form == Form::nonrelativistic) return std::sqrt(2.0 * mu() * (W - threshold()));
    const double d = m1 - m2;
    const double a = threshold() / W, b = d / W;
    return 0.5 * W * std::sqrt((1.0 - a) * (1.0 + a) * (1.0 - b) * (1.0 + b));
  }
};

struct SaturationSystem {
  double M_R = 0.0;    // MeV
  double Gamma = 0.0;  // MeV
  double k_R_abs = 0.0;  // |k_R| of channel 2
  double mu = 0.0;       // channel-2 reduced mass
  double M_th = 0.0;     // channel-2 threshold
  MomentumFunction k;    // momentum in the width kernels (channel 1 by default)
  std::optional<MomentumFunction> k2;  // separate momentum for the Gamma_2 integrand
  std::optional<double> X_total;
  std::optional<double> branching_ratio;  // Gamma_1 / Gamma
  double epsilon = 0.05;                  // admissible band X_i in [0, 1 + epsilon]
  double W_max = std::numeric_limits<double>::infinity();

  void validate() const {
    if (!(Gamma > 0.0)) throw Error(ErrorKind::invalid_argument, "width must be positive");
    if (!(mu > 0.0) || !(M_R > 0.0)) throw Error(ErrorKind::invalid_argument, "M_R and mu must be positive");
    if (!(k_R_abs >= 0.0)) throw Error(ErrorKind::invalid_argument, "|k_R| must be non-negative");
    if (X_total.has_value() == branching_ratio.has_value())
      throw Error(ErrorKind::invalid_argument, "give exactly one closure: total X or a branching ratio");
    if (!(W_max > M_th)) throw Error(ErrorKind::invalid_argument, "integration cutoff below threshold");
  }
};

/// Gamma_1 = 2 X_1 k(M_R) |k_R| / mu.
inline double gamma1(double X1, double mu, double k_MR, double k_R_abs) {
  if (X1 < 0.0) throw Error(ErrorKind::invalid_argument, "X1 must be non-negative");
  return 2.0 * X1 * k_MR * k_R_abs / mu;
}

/// Gamma_2 per unit X_2. With W = M_R + (Gamma/2) cot(u) the Lorentzian
/// times dW becomes 2 du, leaving a bounded integrand on u in (0, u_th].
inline double gamma2_kernel(const SaturationSystem& s) {
  s.validate();
  const MomentumFunction& kf = s.k2 ? *s.k2 : s.k;
  const double h = 0.5 * s.Gamma;
  const double u_th = std::atan2(h, s.M_th - s.M_R);
  const double u_cut = std::isinf(s.W_max) ? 0.0 : std::atan2(h, s.W_max - s.M_R);
  auto integrand = [&](double u) {
    const double W = s.M_R + h / std::tan(u);
    return W > 0.0 && W < 1e100 ? kf(W) / (W * W) : 0.0;  // beyond 1e100 the tail is below rounding
  };
  // The integrand must die off as W -> inf.
  if (std::isinf(s.W_max) && integrand(1e-9 * u_th) > 0.5 * integrand(1e-6 * u_th))
    throw Error(ErrorKind::cutoff, "k(W)/W^2 does not decay; width integral has no convergent tail");
  boost::math::quadrature::tanh_sinh<double> ts;
  // Split at the Lorentzian peak (u = pi/2) when it lies inside the range.
  double I = 0.0;
  if (u_th > pi / 2.0 && u_cut < pi / 2.0) {
    I = ts.integrate(integrand, u_cut, pi / 2.0, 1e-12) + ts.integrate(integrand, pi / 2.0, u_th, 1e-12);
  } else {
    I = ts.integrate(integrand, u_cut, u_th, 1e-12);
  }
  return s.k_R_abs * s.M_R * s.M_R / (pi * s.mu) * 2.0 * I;
}

inline double gamma2(double X2, const SaturationSystem& s) {
  if (X2 < 0.0) throw Error(ErrorKind::invalid_argument, "X2 must be non-negative");
  return X2 == 0.0 ? 0.0 : X2 * gamma2_kernel(s);
}

struct FrontierPoint {
  double X;
  double Gamma_min;
  double Gamma_max;
};

struct SaturationResult {
  double X1 = 0.0, X2 = 0.0;
  double Gamma1 = 0.0, Gamma2 = 0.0;
  double c1 = 0.0, c2 = 0.0;  // width per unit X in each channel
  bool feasible = true;
  bool degenerate = false;  // equal kernels: the split is not determined
  double determinant = 0.0;
  std::string note;
  std::vector<FrontierPoint> frontier;  // filled when infeasible
};

struct SaturationClosure {
  std::optional<double> X_total;
  std::optional<double> branching_ratio;
  double Gamma = 0.0;
  double epsilon = 0.05;
};

/// Solves the 2x2 system for given kernels c1, c2.
inline SaturationResult solve_saturation_kernels(double c1, double c2, const SaturationClosure& cl) {
  SaturationResult r;
  r.c1 = c1;
  r.c2 = c2;
  const double hi = 1.0 + cl.epsilon;
  if (cl.X_total) {
    const double X = *cl.X_total;
    r.determinant = c2 - c1;
    if (std::abs(c2 - c1) <= 1e-12 * std::max(std::abs(c1), std::abs(c2))) {
      r.degenerate = true;
      if (std::abs(cl.Gamma - c1 * X) <= 1e-10 * cl.Gamma) {
        r.X1 = r.X2 = 0.5 * X;
        r.note = "equal kernels: any split of X fits; reporting X/2 each";
      } else {
        r.feasible = false;
        r.note = "equal kernels and Gamma != c X: no solution";
      }
    } else {
      r.X2 = (cl.Gamma - c1 * X) / (c2 - c1);
      r.X1 = X - r.X2;
    }
  } else {
    const double br = *cl.branching_ratio;
    if (br < 0.0 || br > 1.0) throw Error(ErrorKind::invalid_argument, "branching ratio outside [0, 1]");
    r.determinant = c1 * c2;
    if ((br > 0.0 && c1 <= 0.0) || (br < 1.0 && c2 <= 0.0)) {
      r.feasible = false;
      r.note = "a channel with vanishing kernel carries part of the width";
    } else {
      r.X1 = br == 0.0 ? 0.0 : br * cl.Gamma / c1;
      r.X2 = br == 1.0 ? 0.0 : (1.0 - br) * cl.Gamma / c2;
    }
  }
  r.Gamma1 = c1 * r.X1;
  r.Gamma2 = c2 * r.X2;
  const double tiny = 1e-12;
  if (r.feasible && (r.X1 < -tiny || r.X2 < -tiny || r.X1 > hi + tiny || r.X2 > hi + tiny)) {
    r.feasible = false;
    std::ostringstream os;
    os << "solution (X1, X2) = (" << r.X1 << ", " << r.X2 << ") outside [0, " << hi << "]";
    r.note = os.str();
  }
  if (!r.feasible) {
    for (int i = 0; i <= 10; ++i) {
      const double X = 2.0 * hi * i / 10.0;
      // Over X1 + X2 = X with both in [0, hi], Gamma is linear, so extremes sit at the ends.
      const double a = std::max(0.0, X - hi), b = std::min(hi, X);
      const double g_lo = c1 * a + c2 * (X - a), g_hi = c1 * b + c2 * (X - b);
      r.frontier.push_back({X, std::min(g_lo, g_hi), std::max(g_lo, g_hi)});
    }
  }
  return r;
}

inline SaturationResult solve_saturation(const SaturationSystem& s) {
  s.validate();
  const double c1 = gamma1(1.0, s.mu, s.k(s.M_R), s.k_R_abs);
  const double c2 = gamma2_kernel(s);
  return solve_saturation_kernels(c1, c2, {s.X_total, s.branching_ratio, s.Gamma, s.epsilon});
}

}  // namespace hadcomp
