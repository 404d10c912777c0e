#pragma once

// Complex zero search for the pole function of an amplitude and residue
// extraction around the converged pole.
//
// Residue convention: couplings satisfy g g^T = R with
//   R = lim_{z -> z_p} (z_p - z) T(z),
// i.e. T ~ -g g^T / (z - z_p). With this sign the compositeness sum rule
// reads 1 = -sum_i g_i^2 dG_i/dz + g^T G dK/dz G g.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hadcomp/amplitudes.hpp"
#include "hadcomp/core.hpp"
#include "hadcomp/linalg.hpp"

namespace hadcomp {

struct SearchOptions {
  int max_iters = 100;
  double step_tol = 1e-10;        // |dz| <= step_tol * max(|z|, scale)
  double scale = 0.0;             // 0: chosen by the caller (threshold or |start|)
  std::vector<cplx> branch_points;  // converging onto one of these is an error
};

struct ZeroResult {
  cplx z;
  cplx f;
  int steps = 0;
  bool used_muller = false;
  std::vector<cplx> trace;
};

namespace detail {

inline bool finite(cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

inline cplx safe_eval(const std::function<cplx(cplx)>& f, cplx z) {
  try {
    return f(z);
  } catch (const Error&) {
    return {std::numeric_limits<double>::quiet_NaN(), 0.0};
  }
}

inline std::string trace_text(const std::vector<cplx>& trace) {
  std::ostringstream os;
  os.precision(12);
  const std::size_t from = trace.size() > 6 ? trace.size() - 6 : 0;
  for (std::size_t i = from; i < trace.size(); ++i) os << (i == from ? "" : " -> ") << trace[i];
  return os.str();
}

// One Muller run from three points; false if it does not converge.
inline bool muller(const std::function<cplx(cplx)>& f, cplx z0, cplx z1, cplx z2, double scale, double tol,
                   int max_iters, ZeroResult& out) {
  cplx f0 = safe_eval(f, z0), f1 = safe_eval(f, z1), f2 = safe_eval(f, z2);
  for (int it = 0; it < max_iters; ++it) {
    if (!finite(f0) || !finite(f1) || !finite(f2)) return false;
    const cplx h1 = z1 - z0, h2 = z2 - z1;
    const cplx d1 = (f1 - f0) / h1, d2 = (f2 - f1) / h2;
    const cplx a = (d2 - d1) / (h2 + h1);
    const cplx b = a * h2 + d2;
    const cplx disc = std::sqrt(b * b - 4.0 * f2 * a);
    const cplx den = std::abs(b + disc) > std::abs(b - disc) ? b + disc : b - disc;
    if (den == cplx{0.0, 0.0}) return false;
    const cplx dz = -2.0 * f2 / den;
    const cplx z3 = z2 + dz;
    out.trace.push_back(z3);
    ++out.steps;
    z0 = z1, f0 = f1;
    z1 = z2, f1 = f2;
    z2 = z3, f2 = safe_eval(f, z3);
    if (std::abs(dz) <= tol * std::max(std::abs(z3), scale) && finite(f2)) {
      out.z = z3;
      out.f = f2;
      return true;
    }
  }
  return false;
}

}  // namespace detail

/// Newton iteration with a central-difference derivative; Muller's method
/// takes over when Newton stops making progress.
inline ZeroResult find_zero(const std::function<cplx(cplx)>& f, cplx start, const SearchOptions& opts) {
  const double scale = opts.scale > 0.0 ? opts.scale : std::max(std::abs(start), 1.0);
  const double tol = opts.step_tol;
  ZeroResult res;
  res.trace.push_back(start);
  cplx z = start;
  cplx fz = detail::safe_eval(f, z);
  if (!detail::finite(fz)) throw Error(ErrorKind::search_failed, "pole function not finite at the start point");

  auto check_branch = [&](cplx zc) {
    for (cplx bp : opts.branch_points) {
      if (std::abs(zc - bp) <= 1e-7 * std::max(std::abs(zc), scale)) {
        std::ostringstream os;
        os << "search converged onto the branch point " << bp;
        throw Error(ErrorKind::branch_point_convergence, os.str());
      }
    }
  };

  bool stalled = false;
  for (int it = 0; it < opts.max_iters; ++it) {
    const double h = 1e-6 * std::max(std::abs(z), scale);
    const cplx fp = detail::safe_eval(f, z + h), fm = detail::safe_eval(f, z - h);
    const cplx ipp = detail::safe_eval(f, z + I_unit * h), imm = detail::safe_eval(f, z - I_unit * h);
    // Average of the real- and imaginary-direction differences.
    const cplx dfdz = 0.5 * ((fp - fm) / (2.0 * h) + (ipp - imm) / (2.0 * I_unit * h));
    if (!detail::finite(dfdz) || dfdz == cplx{0.0, 0.0}) {
      stalled = true;
      break;
    }
    cplx dz = -fz / dfdz;
    cplx zn = z + dz;
    cplx fn = detail::safe_eval(f, zn);
    int halvings = 0;
    while ((!detail::finite(fn) || std::abs(fn) >= std::abs(fz)) && halvings < 8) {
      dz *= 0.5;
      zn = z + dz;
      fn = detail::safe_eval(f, zn);
      ++halvings;
    }
    res.trace.push_back(zn);
    ++res.steps;
    const bool tiny_step = std::abs(dz) <= tol * std::max(std::abs(zn), scale);
    if (detail::finite(fn) && (tiny_step || fn == cplx{0.0, 0.0})) {
      // Residual check: the next Newton step must be as small.
      if (std::abs(fn / dfdz) <= 10.0 * tol * std::max(std::abs(zn), scale)) {
        check_branch(zn);
        res.z = zn;
        res.f = fn;
        return res;
      }
    }
    if (!detail::finite(fn) || std::abs(fn) >= std::abs(fz)) {
      stalled = true;
      z = zn;
      break;
    }
    z = zn;
    fz = fn;
  }

  const double d = 1e-3 * std::max(std::abs(z), scale);
  res.used_muller = true;
  if (detail::muller(f, z - d, z + d, z, scale, tol, opts.max_iters, res)) {
    check_branch(res.z);
    return res;
  }
  std::ostringstream os;
  os << (stalled ? "Newton stagnated and Muller" : "Newton and Muller") << " did not converge in "
     << opts.max_iters << " iterations from " << start << "; trace: " << detail::trace_text(res.trace);
  throw Error(ErrorKind::search_failed, os.str());
}

/// Where an amplitude stops being analytic in its own variable: cut rays,
/// finite cut segments on the real axis and isolated points.
struct AnalyticStructure {
  std::vector<double> right_rays;                   // [a, +inf)
  std::vector<double> left_rays;                    // (-inf, a]
  std::vector<std::pair<double, double>> segments;  // [a, b]
  std::vector<cplx> points;

  double distance(cplx z) const {
    double d = std::numeric_limits<double>::infinity();
    for (double a : right_rays) d = std::min(d, distance_to_ray_right(z, a));
    for (double a : left_rays) d = std::min(d, distance_to_ray_left(z, a));
    for (auto [a, b] : segments) {
      const double x = std::clamp(z.real(), a, b);
      d = std::min(d, std::abs(z - cplx{x, 0.0}));
    }
    for (cplx p : points) d = std::min(d, std::abs(z - p));
    return d;
  }
};

/// An amplitude reduced to what the pole tools need, on one sheet.
struct PoleProblem {
  std::function<cplx(cplx)> pole_function;
  std::function<CMatrix(cplx)> T;
  /// T = N / d with N and d regular at a simple pole.
  std::function<std::pair<CMatrix, cplx>(cplx)> numerator_denominator;
  AnalyticStructure structure;
  double scale = 1.0;  // magnitude used in relative tolerances
  std::vector<cplx> branch_points;
};

inline PoleProblem make_problem(const CoupledChannelModel& m, std::vector<Sheet> sheets) {
  if (sheets.size() != m.n()) throw Error(ErrorKind::invalid_argument, "sheet signature length != channel count");
  PoleProblem p;
  auto pt = [sheets](cplx s) { return SheetedPoint{s, sheets, Prescription::above}; };
  p.pole_function = [m, pt](cplx s) { return m.pole_function(pt(s)); };
  p.T = [m, pt](cplx s) { return m.T(pt(s)); };
  p.numerator_denominator = [m, pt](cplx s) { return m.numerator_denominator(pt(s)); };
  p.structure.left_rays.push_back(0.0);
  double lowest = std::numeric_limits<double>::infinity();
  for (const auto& ch : m.channels) {
    p.structure.right_rays.push_back(ch.threshold_s());
    p.branch_points.emplace_back(ch.threshold_s());
    if (ch.m1() != ch.m2()) {
      p.structure.segments.emplace_back(0.0, ch.pseudo_threshold_s());
      p.branch_points.emplace_back(ch.pseudo_threshold_s());
    }
    lowest = std::min(lowest, ch.threshold_s());
  }
  p.branch_points.emplace_back(0.0);
  p.scale = lowest;
  return p;
}

namespace detail {

template <class Model>
PoleProblem scalar_problem(const Model& m, Sheet sheet) {
  PoleProblem p;
  auto pt = [sheet](cplx E) { return SheetedPoint{E, {sheet}, Prescription::above}; };
  p.pole_function = [m, pt](cplx E) { return m.pole_function(pt(E)); };
  p.T = [m, pt](cplx E) {
    CMatrix t(1, 1);
    t(0, 0) = m.t(pt(E));
    return t;
  };
  p.structure.right_rays.push_back(0.0);
  p.branch_points.emplace_back(0.0);
  return p;
}

}  // namespace detail

inline PoleProblem make_problem(const EREModel& m, Sheet sheet) {
  m.validate();
  PoleProblem p = detail::scalar_problem(m, sheet);
  p.numerator_denominator = [m, sheet](cplx E) {
    return std::pair<CMatrix, cplx>{CMatrix::Ones(1, 1), m.pole_function(SheetedPoint{E, {sheet}})};
  };
  // Natural energy scale of the pole: |k|^2/(2 mu) for k ~ 1/|a|, 1/|r|.
  const double kscale = std::max(1.0 / std::abs(m.a), m.r != 0.0 ? 1.0 / std::abs(m.r) : 0.0);
  p.scale = kscale * kscale / (2.0 * m.mu);
  return p;
}

inline PoleProblem make_problem(const CDDModel& m, Sheet sheet) {
  m.validate();
  PoleProblem p = detail::scalar_problem(m, sheet);
  p.numerator_denominator = [m, sheet](cplx E) {
    CMatrix n(1, 1);
    n(0, 0) = E - m.M_Z;
    return std::pair<CMatrix, cplx>{n, m.pole_function(SheetedPoint{E, {sheet}})};
  };
  p.scale = std::max({std::abs(m.M_Z), m.beta * m.beta / (2.0 * m.mu), 1e-3});
  return p;
}

struct PoleCandidate {
  SheetedPoint location;
  double det_residual = 0.0;
  int newton_steps = 0;
  cplx basin_start;
  bool used_muller = false;
};

inline PoleCandidate find_pole(const PoleProblem& problem, const std::vector<Sheet>& sheets, cplx start,
                               SearchOptions opts = {}) {
  if (opts.scale <= 0.0) opts.scale = std::max(problem.scale, 1e-12);
  for (cplx bp : problem.branch_points) opts.branch_points.push_back(bp);
  const ZeroResult r = find_zero(problem.pole_function, start, opts);
  PoleCandidate c;
  c.location = SheetedPoint{r.z, sheets, Prescription::above};
  c.det_residual = std::abs(r.f);
  c.newton_steps = r.steps;
  c.basin_start = start;
  c.used_muller = r.used_muller;
  return c;
}

inline PoleCandidate find_pole(const CoupledChannelModel& m, const std::vector<Sheet>& sheets, cplx start,
                               SearchOptions opts = {}) {
  return find_pole(make_problem(m, sheets), sheets, start, std::move(opts));
}

inline PoleCandidate find_pole(const EREModel& m, Sheet sheet, cplx start, SearchOptions opts = {}) {
  return find_pole(make_problem(m, sheet), {sheet}, start, std::move(opts));
}

inline PoleCandidate find_pole(const CDDModel& m, Sheet sheet, cplx start, SearchOptions opts = {}) {
  return find_pole(make_problem(m, sheet), {sheet}, start, std::move(opts));
}

enum class ResidueMethod { contour, pole_factor, finite_difference };

constexpr std::string_view to_string(ResidueMethod m) {
  switch (m) {
    case ResidueMethod::contour: return "contour";
    case ResidueMethod::pole_factor: return "pole-factor";
    case ResidueMethod::finite_difference: return "finite-difference";
  }
  return "unknown";
}

/// R = -(1/2 pi i) oint T dz on a circle, n-point trapezoidal rule.
inline CMatrix contour_residue(const std::function<CMatrix(cplx)>& T, cplx z0, double radius, int n = 64) {
  CMatrix sum;
  for (int j = 0; j < n; ++j) {
    const cplx e = std::polar(1.0, 2.0 * pi * (j + 0.5) / n);
    const CMatrix t = T(z0 + radius * e);
    if (j == 0) sum = CMatrix::Zero(t.rows(), t.cols());
    sum += t * e;
  }
  return -(radius / n) * sum;
}

/// R = lim (z_p - z) T(z) from symmetric real offsets, Richardson in h^2.
inline CMatrix pole_factor_residue(const std::function<CMatrix(cplx)>& T, cplx z0, double h, int levels = 4) {
  std::vector<CMatrix> A;
  for (int l = 0; l < levels; ++l) {
    const double hl = h / std::pow(2.0, l);
    A.push_back(0.5 * (-hl * T(z0 + hl) + hl * T(z0 - hl)));
  }
  for (int k = 1; k < levels; ++k) {
    const double f = std::pow(4.0, k);
    for (int l = levels - 1; l >= k; --l) A[l] = (f * A[l] - A[l - 1]) / (f - 1.0);
  }
  return A.back();
}

/// R = -N(z_p) / d'(z_p), d' from a five-point stencil.
inline CMatrix finite_difference_residue(const std::function<std::pair<CMatrix, cplx>(cplx)>& nd, cplx z0,
                                         double h) {
  auto d = [&](cplx z) { return nd(z).second; };
  const cplx dp = (-d(z0 + 2.0 * h) + 8.0 * d(z0 + h) - 8.0 * d(z0 - h) + d(z0 - 2.0 * h)) / (12.0 * h);
  return -nd(z0).first / dp;
}

struct CouplingSet {
  CVector g;
  CMatrix R;
  ResidueMethod method = ResidueMethod::contour;
  double rank1_residual = 0.0;        // max |g_i g_j - R_ij| / max |R_ij|
  bool contamination_warning = false;  // rank-1 residual above tolerance
  double radius = 0.0;
};

/// g from the largest diagonal entry: g_m = sqrt(R_mm) (principal branch), g_j = R_mj / g_m.
inline CVector rank1_factor(const CMatrix& R) {
  Eigen::Index m = 0;
  for (Eigen::Index i = 1; i < R.rows(); ++i)
    if (std::abs(R(i, i)) > std::abs(R(m, m))) m = i;
  CVector g(R.rows());
  const cplx gm = std::sqrt(R(m, m));
  if (gm == cplx{0.0, 0.0}) return CVector::Zero(R.rows());
  for (Eigen::Index j = 0; j < R.rows(); ++j) g(j) = (j == m) ? gm : R(m, j) / gm;
  return g;
}

struct ResidueOptions {
  double radius = 0.0;   // 0: 0.1 x distance to the nearest non-analyticity
  int n_points = 64;
  double rank1_tol = 1e-6;
};

inline double contour_radius(const PoleProblem& p, cplx z0, double requested) {
  const double dist = p.structure.distance(z0);
  if (!(dist > 0.0)) throw Error(ErrorKind::contour_invalid, "pole lies on a cut or branch point");
  if (requested <= 0.0) return 0.1 * dist;
  if (requested >= dist) throw Error(ErrorKind::contour_invalid, "contour radius reaches a cut or branch point");
  return requested;
}

inline CouplingSet extract_couplings(const PoleProblem& p, cplx z0, ResidueMethod method,
                                     const ResidueOptions& opts = {}) {
  CouplingSet c;
  c.method = method;
  c.radius = contour_radius(p, z0, opts.radius);
  switch (method) {
    case ResidueMethod::contour: c.R = contour_residue(p.T, z0, c.radius, opts.n_points); break;
    case ResidueMethod::pole_factor: c.R = pole_factor_residue(p.T, z0, 0.5 * c.radius); break;
    case ResidueMethod::finite_difference:
      c.R = finite_difference_residue(p.numerator_denominator, z0, 0.01 * c.radius);
      break;
  }
  c.g = rank1_factor(c.R);
  const double scale = c.R.cwiseAbs().maxCoeff();
  c.rank1_residual = scale > 0.0 ? (c.g * c.g.transpose() - c.R).cwiseAbs().maxCoeff() / scale : 0.0;
  c.contamination_warning = c.rank1_residual > opts.rank1_tol;
  return c;
}

inline CouplingSet extract_couplings(const CoupledChannelModel& m, const PoleCandidate& pole, ResidueMethod method,
                                     const ResidueOptions& opts = {}) {
  return extract_couplings(make_problem(m, pole.location.sheets), pole.location.z, method, opts);
}

inline CouplingSet extract_couplings(const EREModel& m, const PoleCandidate& pole, ResidueMethod method,
                                     const ResidueOptions& opts = {}) {
  return extract_couplings(make_problem(m, pole.location.sheet(0)), pole.location.z, method, opts);
}

inline CouplingSet extract_couplings(const CDDModel& m, const PoleCandidate& pole, ResidueMethod method,
                                     const ResidueOptions& opts = {}) {
  return extract_couplings(make_problem(m, pole.location.sheet(0)), pole.location.z, method, opts);
}

/// Gamma_i = |g_i|^2 p_i(M_R) / (8 pi M_R^2) for a narrow resonance at s_R ~ M_R^2.
inline std::vector<double> partial_widths(const CoupledChannelModel& m, const SheetedPoint& pole, const CVector& g) {
  const double MR = std::sqrt(pole.z.real());
  std::vector<double> w;
  for (std::size_t i = 0; i < m.n(); ++i) {
    const double s = MR * MR;
    const double p = s > m.channels[i].threshold_s()
                         ? relativistic_momentum(m.channels[i], cplx{s, 0.0}, Sheet::I).real()
                         : 0.0;
    w.push_back(std::norm(g(i)) * p / (8.0 * pi * MR * MR));
  }
  return w;
}

}  // namespace hadcomp
