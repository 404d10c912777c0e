#pragma once

// Amplitude families.
//
//   coupled channel   T(s) = [K^-1(s) + G(s)]^-1 = [1 + K G]^-1 K     (relativistic, s in MeV^2)
//   ERE               t(E) = 1 / (-1/a + r k^2/2 - i k)                 (nonrelativistic, E from threshold)
//   CDD               t(E) = 1 / (lambda/(E - M_Z) + beta - i k)
//
// With the loop sign of loopfn.hpp, S = 1 + 2 i rho^{1/2} T rho^{1/2} in the
// relativistic case and S = 1 + 2 i k t for the scalar nonrelativistic forms.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hadcomp/core.hpp"
#include "hadcomp/linalg.hpp"
#include "hadcomp/loopfn.hpp"

namespace hadcomp {

enum class KernelForm { constant, polynomial, bare_pole };

constexpr std::string_view to_string(KernelForm f) {
  switch (f) {
    case KernelForm::constant: return "constant";
    case KernelForm::polynomial: return "polynomial";
    case KernelForm::bare_pole: return "bare_pole";
  }
  return "unknown";
}

/// Interaction kernel K(s). The bare-pole form is
///   K(s) = B + g0 g0^T / (M0^2 - s)
/// with a constant background B (zero by default).
class KernelModel {
 public:
  static KernelModel constant(CMatrix K) {
    KernelModel m(KernelForm::constant, K.rows());
    m.coeffs_.push_back(std::move(K));
    m.validate();
    return m;
  }

  /// K(s) = sum_n C_n s^n.
  static KernelModel polynomial(std::vector<CMatrix> coeffs) {
    if (coeffs.empty()) throw Error(ErrorKind::invalid_argument, "polynomial kernel needs coefficients");
    KernelModel m(KernelForm::polynomial, coeffs.front().rows());
    m.coeffs_ = std::move(coeffs);
    m.validate();
    return m;
  }

  static KernelModel bare_pole(CVector g0, double M0, std::optional<CMatrix> background = std::nullopt) {
    KernelModel m(KernelForm::bare_pole, g0.size());
    m.g0_ = std::move(g0);
    m.M0sq_ = M0 * M0;
    m.coeffs_.push_back(background ? *background : CMatrix::Zero(m.n_, m.n_));
    m.validate();
    return m;
  }

  KernelForm form() const { return form_; }
  Eigen::Index n() const { return n_; }
  const std::vector<CMatrix>& coefficients() const { return coeffs_; }
  const CVector& bare_coupling() const { return g0_; }
  double bare_mass_squared() const { return M0sq_; }

  /// Regularizing factor c(s): 1, or M0^2 - s for the bare pole.
  cplx scale(cplx s) const { return form_ == KernelForm::bare_pole ? cplx{M0sq_} - s : cplx{1.0}; }

  /// c(s) K(s), finite everywhere.
  CMatrix scaled_K(cplx s) const {
    switch (form_) {
      case KernelForm::constant: return coeffs_.front();
      case KernelForm::polynomial: return poly(s);
      case KernelForm::bare_pole: return scale(s) * coeffs_.front() + g0_ * g0_.transpose();
    }
    return {};
  }

  CMatrix K(cplx s) const {
    const cplx c = scale(s);
    if (c == cplx{0.0, 0.0}) throw Error(ErrorKind::pole_proximity, "kernel evaluated at its bare pole");
    return scaled_K(s) / c;
  }

  CMatrix dK_ds(cplx s) const {
    switch (form_) {
      case KernelForm::constant: return CMatrix::Zero(n_, n_);
      case KernelForm::polynomial: {
        CMatrix d = CMatrix::Zero(n_, n_);
        cplx p = 1.0;
        for (std::size_t k = 1; k < coeffs_.size(); ++k) {
          d += static_cast<double>(k) * p * coeffs_[k];
          p *= s;
        }
        return d;
      }
      case KernelForm::bare_pole: {
        const cplx c = scale(s);
        if (c == cplx{0.0, 0.0}) throw Error(ErrorKind::pole_proximity, "kernel derivative at its bare pole");
        return g0_ * g0_.transpose() / (c * c);
      }
    }
    return {};
  }

 private:
  KernelModel(KernelForm form, Eigen::Index n) : form_(form), n_(n) {}

  CMatrix poly(cplx s) const {
    CMatrix k = coeffs_.back();
    for (std::size_t i = coeffs_.size() - 1; i-- > 0;) k = (k * s + coeffs_[i]).eval();
    return k;
  }

  void validate() const {
    if (n_ <= 0) throw Error(ErrorKind::invalid_argument, "kernel needs at least one channel");
    for (const auto& c : coeffs_) {
      if (c.rows() != n_ || c.cols() != n_)
        throw Error(ErrorKind::invalid_argument, "kernel matrices must all be n x n");
      if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + c.cwiseAbs().maxCoeff()))
        throw Error(ErrorKind::invalid_argument, "kernel must be symmetric");
    }
  }

  KernelForm form_;
  Eigen::Index n_;
  std::vector<CMatrix> coeffs_;
  CVector g0_;
  double M0sq_ = 0.0;
};

/// Relativistic coupled-channel unitarized amplitude.
struct CoupledChannelModel {
  std::vector<Channel> channels;
  SubtractionScheme scheme;
  KernelModel kernel;

  CoupledChannelModel(std::vector<Channel> chans, SubtractionScheme sc, KernelModel k)
      : channels(std::move(chans)), scheme(std::move(sc)), kernel(std::move(k)) {
    if (channels.empty()) throw Error(ErrorKind::invalid_argument, "model needs at least one channel");
    if (static_cast<Eigen::Index>(channels.size()) != kernel.n())
      throw Error(ErrorKind::invalid_argument, "kernel size does not match channel count");
    if (scheme.a.size() != channels.size())
      throw Error(ErrorKind::invalid_argument, "one subtraction constant per channel is required");
    if (!(scheme.Lambda > 0.0)) throw Error(ErrorKind::invalid_argument, "Lambda must be positive");
  }

  std::size_t n() const { return channels.size(); }

  std::vector<double> thresholds() const {
    std::vector<double> t;
    for (const auto& c : channels) t.push_back(c.threshold_s());
    return t;
  }

  void check(const SheetedPoint& p) const {
    if (p.size() != n()) throw Error(ErrorKind::invalid_argument, "sheet signature length != channel count");
  }

  CVector G(const SheetedPoint& p) const {
    check(p);
    CVector g(n());
    for (std::size_t i = 0; i < n(); ++i) g(i) = loop_G(channels[i], scheme, i, p);
    return g;
  }

  CVector dG_ds(const SheetedPoint& p) const {
    check(p);
    CVector g(n());
    for (std::size_t i = 0; i < n(); ++i) g(i) = loop_dG_ds(channels[i], i, p);
    return g;
  }

  /// c(s) + K~(s) G(s), the matrix whose determinant vanishes at poles of T.
  CMatrix scaled_denominator(const SheetedPoint& p) const {
    const CMatrix Kt = kernel.scaled_K(p.z);
    return kernel.scale(p.z) * CMatrix::Identity(n(), n()) + Kt * G(p).asDiagonal();
  }

  CMatrix T(const SheetedPoint& p) const {
    const CMatrix M = scaled_denominator(p);
    Eigen::FullPivLU<CMatrix> lu(M);
    if (!lu.isInvertible() || lu.rcond() < 1e-15) {
      throw Error(ErrorKind::pole_proximity,
                  "T^-1 is singular at s = " + std::to_string(p.z.real()) + " + " +
                      std::to_string(p.z.imag()) + "i (condition number " +
                      std::to_string(condition_number(M)) + ")");
    }
    return lu.solve(kernel.scaled_K(p.z));
  }

  /// Scalar whose zeros are the poles of T:
  ///   det(1 + K G)                                     constant / polynomial
  ///   (M0^2 - s) det(1 + B G) + g0^T G adj(1 + B G) g0    bare pole
  cplx pole_function(const SheetedPoint& p) const {
    const CVector g = G(p);
    const CMatrix I = CMatrix::Identity(n(), n());
    if (kernel.form() != KernelForm::bare_pole) return determinant(I + kernel.K(p.z) * g.asDiagonal());
    const CMatrix A = I + kernel.coefficients().front() * g.asDiagonal();
    const CVector& g0 = kernel.bare_coupling();
    const CVector Gg0 = g.asDiagonal() * g0;
    return kernel.scale(p.z) * determinant(A) + (Gg0.transpose() * adjugate(A) * g0)(0, 0);
  }

  /// T written as N(s)/d(s) with both factors regular at a simple pole.
  std::pair<CMatrix, cplx> numerator_denominator(const SheetedPoint& p) const {
    const CMatrix M = scaled_denominator(p);
    return {adjugate(M) * kernel.scaled_K(p.z), determinant(M)};
  }
};

/// Effective-range amplitude t(E) = 1/(-1/a + r k^2/2 - i k). Lengths in MeV^-1.
struct EREModel {
  double a;
  double r;
  double mu;
  double m_th = 0.0;

  void validate() const {
    if (a == 0.0 || !std::isfinite(a)) throw Error(ErrorKind::invalid_argument, "ERE needs finite a != 0");
    if (!std::isfinite(r)) throw Error(ErrorKind::invalid_argument, "ERE needs finite r");
    if (!(mu > 0.0)) throw Error(ErrorKind::invalid_argument, "ERE needs mu > 0");
  }

  cplx momentum(const SheetedPoint& p) const { return nonrelativistic_momentum(mu, p.z, p.sheet(0), p.prescription); }

  /// t^-1 as a function of the momentum.
  cplx inverse_t(cplx k) const { return -1.0 / a + 0.5 * r * k * k + nr_loop_G(k); }

  cplx pole_function(const SheetedPoint& p) const { return inverse_t(momentum(p)); }

  cplx t(const SheetedPoint& p) const {
    const cplx d = pole_function(p);
    if (d == cplx{0.0, 0.0}) throw Error(ErrorKind::pole_proximity, "ERE amplitude evaluated at its pole");
    return 1.0 / d;
  }

  /// d(K^-1)/dE of the non-loop part -1/a + r mu E.
  cplx dKinv_dE(cplx) const { return r * mu; }
};

/// Single CDD pole: t(E) = (E - M_Z) / [(E - M_Z)(beta - i k) + lambda].
struct CDDModel {
  double lambda;
  double M_Z;
  double beta;
  double mu;
  double m_th = 0.0;

  void validate() const {
    if (!(mu > 0.0)) throw Error(ErrorKind::invalid_argument, "CDD needs mu > 0");
    if (!std::isfinite(lambda) || !std::isfinite(M_Z) || !std::isfinite(beta))
      throw Error(ErrorKind::invalid_argument, "CDD parameters must be finite");
  }

  cplx momentum(const SheetedPoint& p) const { return nonrelativistic_momentum(mu, p.z, p.sheet(0), p.prescription); }

  cplx pole_function(const SheetedPoint& p) const {
    const cplx k = momentum(p);
    return (p.z - M_Z) * (beta + nr_loop_G(k)) + lambda;
  }

  cplx t(const SheetedPoint& p) const {
    const cplx d = pole_function(p);
    if (d == cplx{0.0, 0.0}) throw Error(ErrorKind::pole_proximity, "CDD amplitude evaluated at its pole");
    return (p.z - M_Z) / d;
  }

  cplx dKinv_dE(cplx E) const {
    if (E == cplx{M_Z}) throw Error(ErrorKind::pole_proximity, "K^-1 derivative at the CDD pole");
    return -lambda / ((E - M_Z) * (E - M_Z));
  }
};

/// S matrix restricted to the open channels.
struct SMatrix {
  CMatrix S;
  std::vector<std::size_t> open;  // indices of open channels, in order
};

inline SMatrix S_matrix(const CoupledChannelModel& m, double s) {
  std::vector<std::size_t> open;
  for (std::size_t i = 0; i < m.n(); ++i)
    if (s > m.channels[i].threshold_s()) open.push_back(i);
  if (open.empty()) throw Error(ErrorKind::no_open_channel, "s lies below every threshold");
  const SheetedPoint p = physical_point(cplx{s, 0.0}, m.n());
  const CMatrix T = m.T(p);
  const Eigen::Index no = static_cast<Eigen::Index>(open.size());
  CVector sq(no);
  for (Eigen::Index a = 0; a < no; ++a) sq(a) = std::sqrt(phase_space(m.channels[open[a]], p.z, Sheet::I));
  CMatrix S = CMatrix::Identity(no, no);
  for (Eigen::Index a = 0; a < no; ++a)
    for (Eigen::Index b = 0; b < no; ++b) S(a, b) += 2.0 * I_unit * sq(a) * T(open[a], open[b]) * sq(b);
  return {S, open};
}

namespace detail {

template <class Model>
SMatrix scalar_S(const Model& m, double E) {
  if (!(E > 0.0)) throw Error(ErrorKind::no_open_channel, "E lies at or below threshold");
  const SheetedPoint p = physical_point(cplx{E, 0.0}, 1);
  const cplx k = m.momentum(p);
  CMatrix S(1, 1);
  S(0, 0) = 1.0 + 2.0 * I_unit * k * m.t(p);
  return {S, {0}};
}

}  // namespace detail

inline SMatrix S_matrix(const EREModel& m, double E) { return detail::scalar_S(m, E); }
inline SMatrix S_matrix(const CDDModel& m, double E) { return detail::scalar_S(m, E); }

/// max |S S^dagger - 1|.
inline double unitarity_defect(const CMatrix& S) {
  return (S * S.adjoint() - CMatrix::Identity(S.rows(), S.cols())).cwiseAbs().maxCoeff();
}

/// Phase-shift table. One delta column per channel; NaN where the channel is closed.
struct PhaseTable {
  std::vector<double> sqrt_s;
  std::vector<std::vector<double>> delta_deg;  // [channel][point]
  std::vector<double> inelasticity;           // |S_11| of the lowest channel
  std::vector<bool> unwrapped;                // false: guard refused, raw values kept
};

/// Continues a sequence of half-phases (degrees, defined modulo 180) into a
/// curve. Returns false, leaving `deg` untouched, if a step is ambiguous.
inline bool unwrap_phases(std::vector<double>& deg, double guard_deg = 90.0) {
  std::vector<double> out = deg;
  bool started = false;
  double prev = 0.0;
  for (double& d : out) {
    if (std::isnan(d)) continue;
    if (started) {
      const double m = std::round((prev - d) / 180.0);
      d += 180.0 * m;
      if (std::abs(d - prev) >= guard_deg - 1e-9) return false;
    }
    prev = d;
    started = true;
  }
  deg = std::move(out);
  return true;
}

/// Builds a phase-shift table from an S-matrix callable.
///   S_at(x)   -> SMatrix at grid value x
///   sqrt_s(x) -> the sqrt(s) column value for x
inline PhaseTable phase_shift_table(const std::function<SMatrix(double)>& S_at,
                                    const std::function<double(double)>& sqrt_s, std::size_t n_channels,
                                    const std::vector<double>& grid) {
  PhaseTable t;
  t.delta_deg.assign(n_channels, {});
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (double x : grid) {
    t.sqrt_s.push_back(sqrt_s(x));
    const SMatrix S = S_at(x);
    std::vector<double> row(n_channels, nan);
    for (std::size_t a = 0; a < S.open.size(); ++a) {
      const cplx sii = S.S(a, a);
      row[S.open[a]] = 0.5 * std::arg(sii) * 180.0 / pi;
    }
    for (std::size_t c = 0; c < n_channels; ++c) t.delta_deg[c].push_back(row[c]);
    t.inelasticity.push_back(S.open.front() == 0 ? std::abs(S.S(0, 0)) : nan);
  }
  for (auto& col : t.delta_deg) t.unwrapped.push_back(unwrap_phases(col));
  return t;
}

inline PhaseTable phase_shift(const CoupledChannelModel& m, const std::vector<double>& s_grid) {
  const auto th = m.thresholds();
  const double lowest = *std::min_element(th.begin(), th.end());
  for (double s : s_grid)
    if (!(s > lowest))
      throw Error(ErrorKind::no_open_channel, "phase-shift grid must lie above the lowest threshold");
  return phase_shift_table([&](double s) { return S_matrix(m, s); }, [](double s) { return std::sqrt(s); },
                           m.n(), s_grid);
}

inline PhaseTable phase_shift(const EREModel& m, const std::vector<double>& E_grid) {
  return phase_shift_table([&](double E) { return S_matrix(m, E); }, [&](double E) { return m.m_th + E; }, 1,
                           E_grid);
}

inline PhaseTable phase_shift(const CDDModel& m, const std::vector<double>& E_grid) {
  return phase_shift_table([&](double E) { return S_matrix(m, E); }, [&](double E) { return m.m_th + E; }, 1,
                           E_grid);
}

}  // namespace hadcomp
