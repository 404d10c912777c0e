#pragma once

// Once-subtracted two-point loop function G_i(s) in the x_+/x_- form,
//
//   G(s) = [a + log(m1^2/L^2) - x+ log((x+ - 1)/x+) - x- log((x- - 1)/x-)] / (16 pi^2),
//
// evaluated on either Riemann sheet. Internally the function is split as
//
//   G^sigma(s) = A(s) - i rho^sigma(s),   A(s) = [a + log(m1^2/L^2) - h(x+) - h(x-)]/(16 pi^2),
//
// with h(x) = x log((1-x)/x). A depends on x+- only through the symmetric
// combination, so it is analytic across the unitarity cut and the sheet
// structure lives entirely in the momentum of rho. Second sheet:
// G^II = G^I + 2 i rho^I.
//
// Sign convention: Im G(s + i0) = -rho(s) above threshold. With
// T = [K^-1 + G]^-1 this gives Im T^-1 = -rho and S = 1 + 2 i rho T.

#include <array>
#include <cmath>
#include <complex>
#include <utility>
#include <vector>

#include "hadcomp/core.hpp"

namespace hadcomp {

/// Sign of Im G(s + i0) relative to rho. Fixed for both kinematics modes.
inline constexpr int loop_imaginary_sign = -1;

struct SubtractionScheme {
  std::vector<double> a;  // one per channel, dimensionless
  double Lambda = 1000.0;  // MeV

  double constant(std::size_t i) const { return a.at(i); }

  /// Subtraction constant that leaves G unchanged when the scale moves to new_Lambda.
  double equivalent_constant(std::size_t i, double new_Lambda) const {
    return a.at(i) + std::log(new_Lambda * new_Lambda / (Lambda * Lambda));
  }
};

namespace loop_detail {

inline constexpr double norm = 1.0 / (16.0 * pi * pi);

inline cplx h(cplx x) { return x * std::log((1.0 - x) / x); }
inline cplx h1(cplx x) { return std::log((1.0 - x) / x) - 1.0 / (1.0 - x); }

// Derivatives 2..6 of h.
inline std::array<cplx, 5> h_high(cplx x) {
  const cplx a = 1.0 - x;
  const cplx ia = 1.0 / a, ix = 1.0 / x;
  const cplx ia2 = ia * ia, ix2 = ix * ix;
  return {
      -ia - ix - ia2,
      -ia2 + ix2 - 2.0 * ia2 * ia,
      -2.0 * ia2 * ia - 2.0 * ix2 * ix - 6.0 * ia2 * ia2,
      -6.0 * ia2 * ia2 + 6.0 * ix2 * ix2 - 24.0 * ia2 * ia2 * ia,
      -24.0 * ia2 * ia2 * ia - 24.0 * ix2 * ix2 * ix - 120.0 * ia2 * ia2 * ia2,
  };
}

// f(x) = x log((x-1)/x), the literal terms of the closed form.
inline cplx f(cplx x) { return x * std::log((x - 1.0) / x); }
inline cplx f1(cplx x) { return std::log((x - 1.0) / x) + 1.0 / (x - 1.0); }

struct Pieces {
  cplx u;       // (s + m2^2 - m1^2)/(2s)
  cplx du;      // du/ds
  cplx lam;     // Kallen function
  cplx dlam;    // d lambda/ds
};

inline Pieces pieces(const Channel& ch, cplx s) {
  const double d = ch.m2() * ch.m2() - ch.m1() * ch.m1();
  Pieces p;
  p.u = 0.5 + d / (2.0 * s);
  p.du = -d / (2.0 * s * s);
  p.lam = kallen(s, ch.m1(), ch.m2());
  p.dlam = 2.0 * s - 2.0 * (ch.m1() * ch.m1() + ch.m2() * ch.m2());
  return p;
}

// sqrt(lambda) with the m2^2 - i0 prescription deciding the sign on the real axis.
inline cplx sqrt_lambda(cplx lam, cplx s) {
  if (lam.imag() == 0.0 && lam.real() < 0.0)
    return I_unit * std::sqrt(-lam.real()) * (s.real() >= 0.0 ? 1.0 : -1.0);
  return std::sqrt(lam);
}

inline bool near_threshold(const Channel& ch, cplx s) {
  return std::abs(s - ch.threshold_s()) < 1e-6 * ch.threshold_s();
}

// Real s at or below the pseudo-threshold, where x+- are real and the split
// into A - i rho is not usable; the closed form is evaluated directly there.
inline bool below_pseudo_threshold(const Channel& ch, cplx s) {
  return s.imag() == 0.0 && s.real() <= ch.pseudo_threshold_s();
}

// Symmetric part F(u, w) = h(u+v) + h(u-v), w = v^2, and its partials.
struct SymmetricPart {
  cplx F, F_u, F_w;
};

inline SymmetricPart symmetric_series(cplx u, cplx w) {
  const auto hh = h_high(u);  // h'', h''', h'''', h5, h6
  SymmetricPart r;
  r.F = 2.0 * h(u) + hh[0] * w + hh[2] * w * w / 12.0 + hh[4] * w * w * w / 360.0;
  r.F_u = 2.0 * h1(u) + hh[1] * w + hh[3] * w * w / 12.0;
  r.F_w = hh[0] + hh[2] * w / 6.0 + hh[4] * w * w / 120.0;
  return r;
}

inline cplx symmetric_value(const Pieces& p, cplx s) {
  const cplx v = sqrt_lambda(p.lam, s) / (2.0 * s);
  return h(p.u + v) + h(p.u - v);
}

inline cplx symmetric_derivative(const Pieces& p, cplx s) {
  const cplx sq = sqrt_lambda(p.lam, s);
  const cplx v = sq / (2.0 * s);
  const cplx dv = (p.dlam * s - 2.0 * p.lam) / (4.0 * s * s * sq);
  const cplx hp = h1(p.u + v), hm = h1(p.u - v);
  return p.du * (hp + hm) + dv * (hp - hm);
}

}  // namespace loop_detail

/// Roots x_+ and x_- of the closed form (m2^2 - i0 prescription on the real axis).
inline std::pair<cplx, cplx> loop_roots(const Channel& ch, cplx s) {
  if (s == cplx{0.0, 0.0}) throw Error(ErrorKind::singular_kinematics, "s = 0 in loop function");
  const auto p = loop_detail::pieces(ch, s);
  const cplx v = loop_detail::sqrt_lambda(p.lam, s) / (2.0 * s);
  return {p.u + v, p.u - v};
}

/// The cut-free part A(s) of the loop function.
inline cplx loop_regular_part(const Channel& ch, double a, double Lambda, cplx s) {
  using namespace loop_detail;
  if (s == cplx{0.0, 0.0}) throw Error(ErrorKind::singular_kinematics, "s = 0 in loop function");
  const auto p = pieces(ch, s);
  cplx F;
  if (near_threshold(ch, s)) {
    F = symmetric_series(p.u, p.lam / (4.0 * s * s)).F;
  } else {
    F = symmetric_value(p, s);
  }
  return norm * (a + std::log(ch.m1() * ch.m1() / (Lambda * Lambda)) - F);
}

/// G_i(s) on the given sheet.
inline cplx loop_G(const Channel& ch, double a, double Lambda, cplx s, Sheet sheet,
                   Prescription presc = Prescription::above) {
  using namespace loop_detail;
  if (s == cplx{0.0, 0.0}) throw Error(ErrorKind::singular_kinematics, "s = 0 in loop function");
  if (below_pseudo_threshold(ch, s)) {
    auto [xp, xm] = loop_roots(ch, s);
    cplx g = norm * (a + std::log(ch.m1() * ch.m1() / (Lambda * Lambda)) - f(xp) - f(xm));
    if (sheet == Sheet::II) g += 2.0 * I_unit * phase_space(ch, s, Sheet::I, presc);
    return g;
  }
  const cplx rho = phase_space(ch, s, sheet, presc);
  return loop_regular_part(ch, a, Lambda, s) + static_cast<double>(loop_imaginary_sign) * I_unit * rho;
}

/// dG_i/ds on the given sheet. Independent of the subtraction constant and scale.
inline cplx loop_dG_ds(const Channel& ch, cplx s, Sheet sheet,
                       Prescription presc = Prescription::above) {
  using namespace loop_detail;
  if (s == cplx{0.0, 0.0}) throw Error(ErrorKind::singular_kinematics, "s = 0 in loop function");
  if (s.imag() == 0.0 && s.real() == ch.threshold_s())
    throw Error(ErrorKind::ambiguous_branch, "dG/ds diverges at the threshold branch point");
  const auto p = pieces(ch, s);
  if (below_pseudo_threshold(ch, s)) {
    const cplx sq = sqrt_lambda(p.lam, s);
    const cplx v = sq / (2.0 * s);
    const cplx dv = (p.dlam * s - 2.0 * p.lam) / (4.0 * s * s * sq);
    const cplx fp = f1(p.u + v), fm = f1(p.u - v);
    cplx d = -norm * (p.du * (fp + fm) + dv * (fp - fm));
    if (sheet == Sheet::II) {
      const cplx k = relativistic_momentum(ch, s, Sheet::I, presc);
      const cplx dk = (p.dlam * s - p.lam) / (8.0 * s * s * k);
      d += 2.0 * I_unit * (dk - k / (2.0 * s)) / (8.0 * pi * std::sqrt(s));
    }
    return d;
  }
  cplx dA;
  if (near_threshold(ch, s)) {
    const cplx w = p.lam / (4.0 * s * s);
    const cplx dw = (p.dlam * s - 2.0 * p.lam) / (4.0 * s * s * s);
    const auto sp = symmetric_series(p.u, w);
    dA = -norm * (sp.F_u * p.du + sp.F_w * dw);
  } else {
    dA = -norm * symmetric_derivative(p, s);
  }
  const cplx k = relativistic_momentum(ch, s, sheet, presc);
  const cplx dk = (p.dlam * s - p.lam) / (8.0 * s * s * k);
  const cplx drho = (dk - k / (2.0 * s)) / (8.0 * pi * std::sqrt(s));
  return dA + static_cast<double>(loop_imaginary_sign) * I_unit * drho;
}

/// G for channel `index` of a SheetedPoint.
inline cplx loop_G(const Channel& ch, const SubtractionScheme& scheme, std::size_t index,
                   const SheetedPoint& point) {
  return loop_G(ch, scheme.constant(index), scheme.Lambda, point.z, point.sheet(index),
                point.prescription);
}

inline cplx loop_dG_ds(const Channel& ch, std::size_t index, const SheetedPoint& point) {
  return loop_dG_ds(ch, point.z, point.sheet(index), point.prescription);
}

/// Nonrelativistic unitarity loop G(k) = -i k used by the ERE and CDD amplitudes.
inline cplx nr_loop_G(cplx k) { return static_cast<double>(loop_imaginary_sign) * I_unit * k; }

/// dG/dE for G = -i k, k = sqrt(2 mu E): -i mu / k.
inline cplx nr_loop_dG_dE(double mu, cplx k) {
  if (k == cplx{0.0, 0.0})
    throw Error(ErrorKind::ambiguous_branch, "dG/dE diverges at threshold");
  return static_cast<double>(loop_imaginary_sign) * I_unit * mu / k;
}

}  // namespace hadcomp
