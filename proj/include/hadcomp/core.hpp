#pragma once

// Kinematics shared by every model family: channels, sheet signatures and
// the first/second-sheet centre-of-mass momentum.
//
// Units are MeV and MeV^2 throughout (hbar = c = 1). In relativistic mode the
// complex variable of a SheetedPoint is the Mandelstam s; in nonrelativistic
// mode it is the energy E measured from the channel threshold.

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "hadcomp/error.hpp"

namespace hadcomp {

using cplx = std::complex<double>;

inline constexpr double pi = std::numbers::pi;
inline constexpr cplx I_unit{0.0, 1.0};
/// hbar*c in MeV fm.
inline constexpr double hbarc = 197.3269804;

/// Converts a length in fm to MeV^-1.
constexpr double fm_to_inv_mev(double fm) { return fm / hbarc; }
/// Converts MeV^-1 to fm.
constexpr double inv_mev_to_fm(double inv_mev) { return inv_mev * hbarc; }

enum class Kinematics { relativistic, nonrelativistic };

enum class Sheet { I, II };

/// How a point lying exactly on a cut or branch point is to be read.
/// `above` is the physical +i0 limit.
enum class Prescription { none, above, below };

constexpr std::string_view to_string(Kinematics k) {
  return k == Kinematics::relativistic ? "relativistic" : "nonrelativistic";
}
constexpr std::string_view to_string(Sheet s) { return s == Sheet::I ? "I" : "II"; }

inline Sheet sheet_from_string(std::string_view text) {
  if (text == "I" || text == "1") return Sheet::I;
  if (text == "II" || text == "2") return Sheet::II;
  throw Error(ErrorKind::invalid_argument, "unknown sheet label '" + std::string(text) + "'");
}

inline Kinematics kinematics_from_string(std::string_view text) {
  if (text == "relativistic") return Kinematics::relativistic;
  if (text == "nonrelativistic") return Kinematics::nonrelativistic;
  throw Error(ErrorKind::invalid_argument, "unknown kinematics mode '" + std::string(text) + "'");
}

class Channel {
 public:
  Channel(double m1, double m2, int ell = 0, std::string spin_label = {})
      : m1_(m1), m2_(m2), ell_(ell), spin_label_(std::move(spin_label)) {
    if (!(m1 > 0.0) || !(m2 > 0.0))
      throw Error(ErrorKind::invalid_argument, "channel masses must be positive");
    if (ell < 0) throw Error(ErrorKind::invalid_argument, "orbital angular momentum must be >= 0");
  }

  double m1() const { return m1_; }
  double m2() const { return m2_; }
  int ell() const { return ell_; }
  const std::string& spin_label() const { return spin_label_; }

  double mu() const { return m1_ * m2_ / (m1_ + m2_); }
  double threshold_E() const { return m1_ + m2_; }
  double threshold_s() const { return (m1_ + m2_) * (m1_ + m2_); }
  double pseudo_threshold_s() const { return (m1_ - m2_) * (m1_ - m2_); }

 private:
  double m1_;
  double m2_;
  int ell_;
  std::string spin_label_;
};

struct SheetedPoint {
  cplx z;
  std::vector<Sheet> sheets;
  Prescription prescription = Prescription::above;

  std::size_t size() const { return sheets.size(); }
  Sheet sheet(std::size_t i) const { return sheets.at(i); }
};

/// Point on the physical sheet of an n-channel amplitude.
inline SheetedPoint physical_point(cplx z, std::size_t n_channels,
                                   Prescription p = Prescription::above) {
  return SheetedPoint{z, std::vector<Sheet>(n_channels, Sheet::I), p};
}

struct Momentum {
  cplx k;
  std::size_t channel_index = 0;
};

/// Kallen function lambda(s, m1^2, m2^2).
inline cplx kallen(cplx s, double m1, double m2) {
  const double a = (m1 + m2) * (m1 + m2);
  const double b = (m1 - m2) * (m1 - m2);
  return (s - a) * (s - b);
}

namespace detail {

/// Root of k^2 = w with Im k >= 0. `growth_sign` is the sign of dw/dz on the
/// real axis; it decides which real root the +i0 / -i0 limits select.
inline cplx first_sheet_root(cplx w, double growth_sign, Prescription p) {
  cplx k = std::sqrt(w);
  if (k.imag() < 0.0) k = -k;
  if (k.imag() == 0.0) {
    if (k.real() == 0.0) {
      if (p == Prescription::none)
        throw Error(ErrorKind::ambiguous_branch, "point sits on a branch point");
      return k;
    }
    switch (p) {
      case Prescription::none:
        throw Error(ErrorKind::ambiguous_branch, "point on a unitarity cut needs a +-i0 prescription");
      case Prescription::above: return growth_sign >= 0.0 ? k : -k;
      case Prescription::below: return growth_sign >= 0.0 ? -k : k;
    }
  }
  return k;
}

}  // namespace detail

/// Relativistic CM momentum p = sqrt(lambda(s))/(2 sqrt(s)) on the given sheet.
inline cplx relativistic_momentum(const Channel& ch, cplx s, Sheet sheet,
                                  Prescription p = Prescription::above) {
  if (s == cplx{0.0, 0.0})
    throw Error(ErrorKind::singular_kinematics, "s = 0 in relativistic kinematics");
  const cplx w = kallen(s, ch.m1(), ch.m2()) / (4.0 * s);
  const double dm2 = ch.m1() * ch.m1() - ch.m2() * ch.m2();
  const double growth = std::real(s * s) - dm2 * dm2;
  const cplx k = detail::first_sheet_root(w, growth, p);
  return sheet == Sheet::I ? k : -k;
}

/// Nonrelativistic momentum k = sqrt(2 mu E), E measured from threshold.
inline cplx nonrelativistic_momentum(const Channel& ch, cplx E, Sheet sheet,
                                     Prescription p = Prescription::above) {
  const cplx k = detail::first_sheet_root(2.0 * ch.mu() * E, 1.0, p);
  return sheet == Sheet::I ? k : -k;
}

/// Same as nonrelativistic_momentum for a bare reduced mass.
inline cplx nonrelativistic_momentum(double mu, cplx E, Sheet sheet,
                                     Prescription p = Prescription::above) {
  const cplx k = detail::first_sheet_root(2.0 * mu * E, 1.0, p);
  return sheet == Sheet::I ? k : -k;
}

inline Momentum cm_momentum(const Channel& ch, std::size_t index, const SheetedPoint& point,
                            Kinematics mode) {
  if (index >= point.size())
    throw Error(ErrorKind::invalid_argument, "sheet signature shorter than channel index");
  const Sheet sh = point.sheet(index);
  if (mode == Kinematics::relativistic)
    return {relativistic_momentum(ch, point.z, sh, point.prescription), index};
  return {nonrelativistic_momentum(ch, point.z, sh, point.prescription), index};
}

/// rho = p / (8 pi sqrt(s)), continued with the sheet's momentum.
inline cplx phase_space(const Channel& ch, cplx s, Sheet sheet,
                        Prescription p = Prescription::above) {
  const cplx k = relativistic_momentum(ch, s, sheet, p);
  return k / (8.0 * pi * std::sqrt(s));
}

inline cplx phase_space(const Channel& ch, std::size_t index, const SheetedPoint& point) {
  if (index >= point.size())
    throw Error(ErrorKind::invalid_argument, "sheet signature shorter than channel index");
  return phase_space(ch, point.z, point.sheet(index), point.prescription);
}

/// Distance from z to the real half line [a, +inf).
inline double distance_to_ray_right(cplx z, double a) {
  return z.real() >= a ? std::abs(z.imag()) : std::abs(z - a);
}

/// Distance from z to the real half line (-inf, a].
inline double distance_to_ray_left(cplx z, double a) {
  return z.real() <= a ? std::abs(z.imag()) : std::abs(z - a);
}

}  // namespace hadcomp
