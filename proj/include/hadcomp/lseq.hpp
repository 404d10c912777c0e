#pragma once

// Lippmann-Schwinger equation T = V + V G T for energy-independent potentials.
//
// Partial-wave conventions (nonrelativistic, E measured from threshold):
//   (V G T)_ac(k, k') = sum_b int_0^inf q^2 dq/(2 pi^2) V_ab(k, q) T_bc(q, k') / (q^2/2mu - E),
// so an attractive potential is positive and a bound state gives
//   T_ab(k, k') ~ -g_a(k) g_b(k') / (E - E_B).
// On shell, S_ab = delta_ab + i mu k T_ab(k, k) / pi.
//
// Rank-1 separable potentials V_ab = lambda f_a(k) f_b(k') are solved in closed
// form, T_ab = f_a f_b lambda / (1 - lambda I(E)), with the loop integral I(E)
// evaluated along a rotated ray. Everything else goes through a Nystrom solve.

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hadcomp/amplitudes.hpp"
#include "hadcomp/core.hpp"
#include "hadcomp/error.hpp"
#include "hadcomp/linalg.hpp"
#include "hadcomp/poles.hpp"
#include "hadcomp/quadrature.hpp"

namespace hadcomp {

namespace lseq_detail {

inline cplx ipow(cplx k, int n) {
  cplx r = 1.0;
  for (int i = 0; i < n; ++i) r *= k;
  return r;
}

}  // namespace lseq_detail

/// Radial form factor of a separable potential, analytic in a sector around
/// the positive real momentum axis.
class FormFactor {
 public:
  enum class Kind { yamaguchi, gaussian, custom };

  /// c k^l / (k^2 + beta^2)^(l+1)
  static FormFactor yamaguchi(double beta, int ell = 0, double c = 1.0) {
    if (!(beta > 0.0) || ell < 0) throw Error(ErrorKind::invalid_argument, "Yamaguchi form factor needs beta > 0, l >= 0");
    FormFactor f;
    f.kind_ = Kind::yamaguchi;
    f.scale_ = beta;
    f.ell_ = ell;
    f.c_ = c;
    f.max_rotation_ = pi / 2.0;
    f.singularities_ = {cplx{0.0, beta}, cplx{0.0, -beta}};
    return f;
  }

  /// c k^l exp(-k^2/Lambda^2)
  static FormFactor gaussian(double Lambda, int ell = 0, double c = 1.0) {
    if (!(Lambda > 0.0) || ell < 0) throw Error(ErrorKind::invalid_argument, "Gaussian form factor needs Lambda > 0, l >= 0");
    FormFactor f;
    f.kind_ = Kind::gaussian;
    f.scale_ = Lambda;
    f.ell_ = ell;
    f.c_ = c;
    f.max_rotation_ = pi / 4.0;
    return f;
  }

  /// User form factor with its derivative. f must be analytic and decaying for
  /// |arg k| < max_rotation except at the listed singularities.
  static FormFactor custom(std::function<cplx(cplx)> f, std::function<cplx(cplx)> df, double scale,
                           double max_rotation, std::vector<cplx> singularities = {}, int ell = 0) {
    if (!f || !df) throw Error(ErrorKind::invalid_argument, "custom form factor needs f and f'");
    if (!(scale > 0.0)) throw Error(ErrorKind::invalid_argument, "form factor scale must be positive");
    FormFactor ff;
    ff.kind_ = Kind::custom;
    ff.f_ = std::move(f);
    ff.df_ = std::move(df);
    ff.scale_ = scale;
    ff.ell_ = ell;
    ff.max_rotation_ = max_rotation;
    ff.singularities_ = std::move(singularities);
    return ff;
  }

  cplx operator()(cplx k) const {
    switch (kind_) {
      case Kind::yamaguchi: return c_ * lseq_detail::ipow(k, ell_) / lseq_detail::ipow(k * k + scale_ * scale_, ell_ + 1);
      case Kind::gaussian: return c_ * lseq_detail::ipow(k, ell_) * std::exp(-k * k / (scale_ * scale_));
      case Kind::custom: break;
    }
    return f_(k);
  }

  cplx derivative(cplx k) const {
    const double l = ell_;
    switch (kind_) {
      case Kind::yamaguchi: {
        const cplx b = k * k + scale_ * scale_;
        const cplx lead = ell_ == 0 ? cplx{0.0, 0.0} : l * lseq_detail::ipow(k, ell_ - 1) * b;
        return c_ * (lead - 2.0 * (l + 1.0) * lseq_detail::ipow(k, ell_ + 1)) / lseq_detail::ipow(b, ell_ + 2);
      }
      case Kind::gaussian: {
        const cplx lead = ell_ == 0 ? cplx{0.0, 0.0} : l * lseq_detail::ipow(k, ell_ - 1);
        return c_ * std::exp(-k * k / (scale_ * scale_)) *
               (lead - 2.0 * lseq_detail::ipow(k, ell_ + 1) / (scale_ * scale_));
      }
      case Kind::custom: break;
    }
    return df_(k);
  }

  Kind kind() const { return kind_; }
  int ell() const { return ell_; }
  double scale() const { return scale_; }
  double coefficient() const { return c_; }
  double max_rotation() const { return max_rotation_; }
  const std::vector<cplx>& singularities() const { return singularities_; }

  /// Whether rotating the integration ray from the real axis to angle theta
  /// sweeps over a singularity or past the admissible sector.
  bool blocks(double theta) const {
    if (std::abs(theta) >= max_rotation_) return true;
    const double lo = std::min(0.0, theta), hi = std::max(0.0, theta);
    for (cplx s : singularities_) {
      if (s == cplx{0.0, 0.0}) return true;
      const double a = std::arg(s);
      if (a >= lo && a <= hi) return true;
    }
    return false;
  }

 private:
  Kind kind_ = Kind::yamaguchi;
  int ell_ = 0;
  double scale_ = 1.0;
  double c_ = 1.0;
  double max_rotation_ = 0.0;
  std::vector<cplx> singularities_;
  std::function<cplx(cplx)> f_, df_;
};

/// V(k, k') sampled on a square momentum grid, bilinear in between and zero outside.
struct TabulatedKernel {
  std::vector<double> k;  // ascending
  RMatrix V;              // V(i, j) = V(k_i, k_j), MeV^-2

  double operator()(double x, double y) const {
    if (k.size() < 2 || x < k.front() || x > k.back() || y < k.front() || y > k.back()) return 0.0;
    auto cell = [this](double v) {
      auto it = std::upper_bound(k.begin(), k.end(), v);
      std::size_t i = it == k.begin() ? 0 : static_cast<std::size_t>(it - k.begin()) - 1;
      return std::min(i, k.size() - 2);
    };
    const std::size_t i = cell(x), j = cell(y);
    const double tx = (x - k[i]) / (k[i + 1] - k[i]), ty = (y - k[j]) / (k[j + 1] - k[j]);
    const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
    return (1 - tx) * (1 - ty) * V(ii, jj) + tx * (1 - ty) * V(ii + 1, jj) + (1 - tx) * ty * V(ii, jj + 1) +
           tx * ty * V(ii + 1, jj + 1);
  }

  double edge() const { return k.empty() ? 0.0 : k.back(); }
};

/// Reads a CSV with columns k, k', V (MeV, MeV, MeV^-2) covering a full square grid.
/// A first line that does not parse as numbers is taken as the header.
inline TabulatedKernel read_kernel_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::config, "cannot open potential table " + path);
  std::map<std::pair<double, double>, double> entries;
  std::vector<double> ks;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    double a, b, v;
    if (!(ss >> a >> b >> v)) {
      if (lineno == 1) continue;
      throw Error(ErrorKind::config, path + ":" + std::to_string(lineno) + ": expected k, k', V");
    }
    entries[{a, b}] = v;
    ks.push_back(a);
    ks.push_back(b);
  }
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  const auto n = static_cast<Eigen::Index>(ks.size());
  if (n < 2 || entries.size() != ks.size() * ks.size())
    throw Error(ErrorKind::config, path + ": table must cover a full square (k, k') grid");
  TabulatedKernel t;
  t.k = ks;
  t.V.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) t.V(i, j) = entries.at({ks[i], ks[j]});
  if ((t.V - t.V.transpose()).cwiseAbs().maxCoeff() > 1e-12 * t.V.cwiseAbs().maxCoeff())
    throw Error(ErrorKind::config, path + ": tabulated potential is not symmetric in (k, k')");
  return t;
}

using KernelFunction = std::function<double(std::size_t, std::size_t, double, double)>;

/// Energy-independent partial-wave potential V_ab(k, k') in one or more coupled waves.
class Potential {
 public:
  enum class Kind { separable, general, tabulated };

  /// V_ab(k, k') = lambda f_a(k) f_b(k'), one form factor per wave.
  static Potential separable(double lambda, double mu, std::vector<FormFactor> ff,
                             std::vector<std::string> waves = {}) {
    if (ff.empty()) throw Error(ErrorKind::invalid_argument, "separable potential needs at least one form factor");
    Potential p = base(Kind::separable, mu, ff.size(), std::move(waves));
    p.lambda_ = lambda;
    double c = 0.0;
    for (const auto& f : ff) c = std::max(c, f.scale());
    p.map_scale_ = 2.0 * c;
    p.ff_ = std::move(ff);
    return p;
  }

  /// Any real symmetric kernel, V(a, b, k, k') = V(b, a, k', k).
  static Potential general(double mu, std::vector<std::string> waves, KernelFunction V, double map_scale = 600.0) {
    if (!V) throw Error(ErrorKind::invalid_argument, "potential kernel is empty");
    if (waves.empty()) throw Error(ErrorKind::invalid_argument, "potential needs at least one wave");
    const std::size_t n = waves.size();
    Potential p = base(Kind::general, mu, n, std::move(waves));
    p.kernel_ = std::move(V);
    p.map_scale_ = map_scale;
    p.check_symmetric();
    return p;
  }

  /// Single-wave potential sampled on a grid.
  static Potential tabulated(double mu, TabulatedKernel table, std::string wave = "1S0", double map_scale = 600.0) {
    Potential p = base(Kind::tabulated, mu, 1, {std::move(wave)});
    auto t = std::make_shared<const TabulatedKernel>(std::move(table));
    p.edge_ = t->edge();
    p.kernel_ = [t](std::size_t, std::size_t, double k, double kp) { return (*t)(k, kp); };
    p.map_scale_ = map_scale;
    return p;
  }

  Kind kind() const { return kind_; }
  bool is_separable() const { return kind_ == Kind::separable; }
  double mu() const { return mu_; }
  std::size_t n_waves() const { return waves_.size(); }
  const std::vector<std::string>& waves() const { return waves_; }
  double lambda() const { return lambda_; }
  const std::vector<FormFactor>& form_factors() const { return ff_; }
  double map_scale() const { return map_scale_; }
  std::optional<double> table_edge() const { return edge_; }

  /// Threshold mass m1 + m2, used only for sqrt(s) columns.
  double threshold = 0.0;

  double V(std::size_t a, std::size_t b, double k, double kp) const {
    if (kind_ == Kind::separable) return lambda_ * ff_[a](k).real() * ff_[b](kp).real();
    return kernel_(a, b, k, kp);
  }

 private:
  static Potential base(Kind kind, double mu, std::size_t n, std::vector<std::string> waves) {
    if (!(mu > 0.0)) throw Error(ErrorKind::invalid_argument, "reduced mass must be positive");
    if (waves.empty())
      for (std::size_t i = 0; i < n; ++i) waves.push_back("wave" + std::to_string(i));
    if (waves.size() != n) throw Error(ErrorKind::invalid_argument, "wave labels do not match the number of waves");
    Potential p;
    p.kind_ = kind;
    p.mu_ = mu;
    p.waves_ = std::move(waves);
    return p;
  }

  void check_symmetric() const {
    const double c = map_scale_;
    const double pts[] = {0.1 * c, 0.7 * c, 2.3 * c};
    for (std::size_t a = 0; a < n_waves(); ++a)
      for (std::size_t b = 0; b < n_waves(); ++b)
        for (double k : pts)
          for (double kp : pts) {
            const double v1 = V(a, b, k, kp), v2 = V(b, a, kp, k);
            if (std::abs(v1 - v2) > 1e-12 * std::max(std::abs(v1), std::abs(v2)))
              throw Error(ErrorKind::invalid_argument, "potential is not symmetric in (a, k) <-> (b, k')");
          }
  }

  Kind kind_ = Kind::separable;
  double mu_ = 0.0;
  std::vector<std::string> waves_;
  double lambda_ = 0.0;
  std::vector<FormFactor> ff_;
  KernelFunction kernel_;
  double map_scale_ = 600.0;
  std::optional<double> edge_;
};

struct LSOptions {
  std::size_t n_nodes = 200;
  double map_scale = 0.0;        // 0: the potential's default
  double resolution_tol = 1e-6;  // allowed relative change under N -> 2N
  bool check_resolution = true;
};

// ---------------------------------------------------------------------------
// Separable potentials: loop integral along a rotated ray

struct WaveSums {
  std::vector<cplx> wave;
  cplx total;
};

namespace lseq_detail {

template <class F>
cplx ray_integral(F&& h, double theta, double split) {
  using boost::math::quadrature::gauss_kronrod;
  const cplx e = std::polar(1.0, theta);
  auto g = [&](double t) -> cplx { return h(t * e) * e; };
  const double inf = std::numeric_limits<double>::infinity();
  return gauss_kronrod<double, 61>::integrate(g, 0.0, split, 15, 1e-13) +
         gauss_kronrod<double, 61>::integrate(g, split, inf, 15, 1e-13);
}

inline void require_separable(const Potential& p) {
  if (!p.is_separable())
    throw Error(ErrorKind::continuation_blocked,
                "sheet-II and complex-energy access is limited to separable potentials");
}

}  // namespace lseq_detail

/// Signed angle of the integration ray for sheet-I integrals at E. The ray
/// turns away from the near pole of 1/(q^2/2mu - E); its size is half the
/// phase of the continued momentum, clamped to the form factors' sector.
inline double ray_angle(const Potential& p, cplx E, Prescription presc = Prescription::above) {
  double dir;
  if (E.imag() > 0.0) {
    dir = -1.0;
  } else if (E.imag() < 0.0) {
    dir = 1.0;
  } else if (E.real() < 0.0) {
    return 0.0;
  } else {
    if (presc == Prescription::none)
      throw Error(ErrorKind::ambiguous_branch, "real positive energy needs a +-i0 prescription");
    dir = presc == Prescription::above ? -1.0 : 1.0;
  }
  double limit = pi / 2.0;
  for (const auto& f : p.form_factors()) limit = std::min(limit, f.max_rotation());
  const double half_phase = 0.5 * std::abs(std::arg(std::sqrt(2.0 * p.mu() * E)));
  const double theta = dir * std::clamp(half_phase, std::min(0.2, 0.5 * limit), 0.9 * limit);
  for (const auto& f : p.form_factors())
    if (f.blocks(theta))
      throw Error(ErrorKind::continuation_blocked, "a form-factor singularity lies in the rotated sector");
  return theta;
}

namespace lseq_detail {

// Shared driver for I and dI/dE. `power` is 1 or 2.
inline WaveSums loop_sums(const Potential& p, cplx E, Sheet sheet, Prescription presc, int power) {
  require_separable(p);
  if (E == cplx{0.0, 0.0}) throw Error(ErrorKind::singular_kinematics, "E = 0 is the threshold branch point");
  const double mu = p.mu();
  const double theta = ray_angle(p, E, presc);
  const double split = std::max(std::abs(std::sqrt(2.0 * mu * E)), p.map_scale());
  WaveSums out;
  out.total = 0.0;
  const cplx kII = nonrelativistic_momentum(mu, E, Sheet::II, presc);
  for (const auto& f : p.form_factors()) {
    auto h = [&](cplx q) {
      const cplx fq = f(q);
      const cplx den = q * q / (2.0 * mu) - E;
      return q * q * fq * fq / (2.0 * pi * pi) / (power == 1 ? den : den * den);
    };
    cplx v = ray_integral(h, theta, split);
    if (sheet == Sheet::II) {
      const cplx fk = f(kII);
      if (power == 1) {
        v += I_unit * mu * kII * fk * fk / pi;
      } else {
        v += I_unit * mu * mu / (pi * kII) * (fk * fk + 2.0 * kII * fk * f.derivative(kII));
      }
    }
    out.wave.push_back(v);
    out.total += v;
  }
  return out;
}

}  // namespace lseq_detail

/// I_a(E) = int q^2 dq/(2 pi^2) f_a(q)^2 / (q^2/2mu - E) on the requested sheet.
/// Sheet II adds the discontinuity i mu k f(k)^2 / pi at the sheet-II momentum.
inline WaveSums loop_integral(const Potential& p, cplx E, Sheet sheet, Prescription presc = Prescription::above) {
  return lseq_detail::loop_sums(p, E, sheet, presc, 1);
}

/// dI_a/dE. On sheet II the discontinuity contributes i mu^2/(pi k) d(k f^2)/dk.
inline WaveSums loop_integral_dE(const Potential& p, cplx E, Sheet sheet, Prescription presc = Prescription::above) {
  return lseq_detail::loop_sums(p, E, sheet, presc, 2);
}

/// tau(E) = lambda / (1 - lambda I(E)), so that T_ab = f_a f_b tau.
inline cplx separable_tau(const Potential& p, cplx E, Sheet sheet, Prescription presc = Prescription::above) {
  const double l = p.lambda();
  if (l == 0.0) return 0.0;
  const cplx d = 1.0 - l * loop_integral(p, E, sheet, presc).total;
  if (d == cplx{0.0, 0.0}) throw Error(ErrorKind::pole_proximity, "E sits on a pole of the separable amplitude");
  return l / d;
}

/// Closed-form T on external momenta, laid out like solve_T.
inline CMatrix separable_T(const Potential& p, cplx E, const std::vector<double>& k, Sheet sheet = Sheet::I,
                           Prescription presc = Prescription::above) {
  const cplx tau = separable_tau(p, E, sheet, presc);
  const std::size_t m = k.size(), nw = p.n_waves();
  CVector f(static_cast<Eigen::Index>(nw * m));
  for (std::size_t a = 0; a < nw; ++a)
    for (std::size_t i = 0; i < m; ++i) f(static_cast<Eigen::Index>(a * m + i)) = p.form_factors()[a](k[i]);
  return tau * f * f.transpose();
}

// ---------------------------------------------------------------------------
// Nystrom solution

namespace lseq_detail {

inline RMatrix kernel_matrix(const Potential& p, const std::vector<double>& rows, const std::vector<double>& cols) {
  const std::size_t nw = p.n_waves(), nr = rows.size(), nc = cols.size();
  RMatrix M(static_cast<Eigen::Index>(nw * nr), static_cast<Eigen::Index>(nw * nc));
  if (p.is_separable()) {
    RVector fr(static_cast<Eigen::Index>(nw * nr)), fc(static_cast<Eigen::Index>(nw * nc));
    for (std::size_t a = 0; a < nw; ++a) {
      for (std::size_t i = 0; i < nr; ++i) fr(static_cast<Eigen::Index>(a * nr + i)) = p.form_factors()[a](rows[i]).real();
      for (std::size_t j = 0; j < nc; ++j) fc(static_cast<Eigen::Index>(a * nc + j)) = p.form_factors()[a](cols[j]).real();
    }
    return p.lambda() * fr * fc.transpose();
  }
  for (std::size_t a = 0; a < nw; ++a)
    for (std::size_t b = 0; b < nw; ++b)
      for (std::size_t i = 0; i < nr; ++i)
        for (std::size_t j = 0; j < nc; ++j)
          M(static_cast<Eigen::Index>(a * nr + i), static_cast<Eigen::Index>(b * nc + j)) = p.V(a, b, rows[i], cols[j]);
  return M;
}

inline double map_scale(const Potential& p, const LSOptions& o) { return o.map_scale > 0.0 ? o.map_scale : p.map_scale(); }

inline CVector repeat(const CVector& d, std::size_t times) {
  CVector out(d.size() * static_cast<Eigen::Index>(times));
  for (std::size_t a = 0; a < times; ++a) out.segment(static_cast<Eigen::Index>(a) * d.size(), d.size()) = d;
  return out;
}

// T on external momenta from one Nystrom grid of n nodes.
inline CMatrix nystrom_T(const Potential& p, cplx E, const std::vector<double>& k_ext, std::size_t n, double c,
                         Prescription presc) {
  const QuadratureRule rule = rational_map_rule(n, c);
  const double mu = p.mu();
  std::vector<double> nodes = rule.x;
  CVector D(static_cast<Eigen::Index>(n));
  const bool on_cut = E.imag() == 0.0 && E.real() > 0.0;
  if (on_cut) {
    if (presc == Prescription::none)
      throw Error(ErrorKind::ambiguous_branch, "real positive energy needs a +-i0 prescription");
    // Principal value by subtraction of the on-shell point k0.
    const double k0 = std::sqrt(2.0 * mu * E.real());
    double sub = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double den = rule.x[j] * rule.x[j] - k0 * k0;
      if (den == 0.0) throw Error(ErrorKind::singular_kinematics, "on-shell momentum coincides with a grid node");
      D(static_cast<Eigen::Index>(j)) = mu / (pi * pi) * rule.w[j] * rule.x[j] * rule.x[j] / den;
      sub += rule.w[j] / den;
    }
    const double sgn = presc == Prescription::above ? 1.0 : -1.0;
    D.conservativeResize(static_cast<Eigen::Index>(n + 1));
    D(static_cast<Eigen::Index>(n)) = mu / (pi * pi) * (-k0 * k0 * sub + sgn * I_unit * pi * k0 / 2.0);
    nodes.push_back(k0);
  } else {
    for (std::size_t j = 0; j < n; ++j)
      D(static_cast<Eigen::Index>(j)) = rule.w[j] * rule.x[j] * rule.x[j] / (2.0 * pi * pi) /
                                        (rule.x[j] * rule.x[j] / (2.0 * mu) - E);
  }
  const CVector Dfull = repeat(D, p.n_waves());
  const CMatrix Vqq = kernel_matrix(p, nodes, nodes).cast<cplx>();
  const CMatrix Vqe = kernel_matrix(p, nodes, k_ext).cast<cplx>();
  const CMatrix Veq = kernel_matrix(p, k_ext, nodes).cast<cplx>();
  const CMatrix Vee = kernel_matrix(p, k_ext, k_ext).cast<cplx>();
  const CMatrix A = CMatrix::Identity(Vqq.rows(), Vqq.cols()) - Vqq * Dfull.asDiagonal();
  const CMatrix X = A.partialPivLu().solve(Vqe);
  return Vee + Veq * Dfull.asDiagonal() * X;
}

inline double relative_change(const CMatrix& a, const CMatrix& b) {
  const double s = b.cwiseAbs().maxCoeff();
  return s > 0.0 ? (a - b).cwiseAbs().maxCoeff() / s : (a - b).cwiseAbs().maxCoeff();
}

}  // namespace lseq_detail

/// Off-shell T(k_i, k_j; E) for external momenta k, on the physical sheet.
/// Row/column index a * k.size() + i addresses wave a at momentum k[i].
inline CMatrix solve_T(const Potential& p, cplx E, const std::vector<double>& k, const LSOptions& opts = {},
                       Prescription presc = Prescription::above) {
  const double c = lseq_detail::map_scale(p, opts);
  const CMatrix T = lseq_detail::nystrom_T(p, E, k, opts.n_nodes, c, presc);
  if (opts.check_resolution) {
    const CMatrix T2 = lseq_detail::nystrom_T(p, E, k, 2 * opts.n_nodes, c, presc);
    const double change = lseq_detail::relative_change(T, T2);
    if (change > opts.resolution_tol) {
      std::ostringstream os;
      os << "T changes by " << change << " (relative) under N -> 2N at E = " << E;
      throw Error(ErrorKind::resolution, os.str());
    }
  }
  return T;
}

/// On-shell T_ab(k0, k0; E + i0) for E > 0.
inline CMatrix on_shell_T(const Potential& p, double E, const LSOptions& opts = {}) {
  if (!(E > 0.0)) throw Error(ErrorKind::no_open_channel, "E lies at or below threshold");
  const double k0 = std::sqrt(2.0 * p.mu() * E);
  if (p.is_separable()) return separable_T(p, E, {k0}, Sheet::I, Prescription::above);
  return solve_T(p, E, {k0}, opts);
}

inline SMatrix S_matrix(const Potential& p, double E, const LSOptions& opts = {}) {
  const CMatrix T = on_shell_T(p, E, opts);
  const double k0 = std::sqrt(2.0 * p.mu() * E);
  const auto n = static_cast<Eigen::Index>(p.n_waves());
  SMatrix s;
  s.S = CMatrix::Identity(n, n) + I_unit * p.mu() * k0 / pi * T;
  for (std::size_t a = 0; a < p.n_waves(); ++a) s.open.push_back(a);
  return s;
}

inline PhaseTable phase_shift(const Potential& p, const std::vector<double>& E_grid, const LSOptions& opts = {}) {
  return phase_shift_table([&](double E) { return S_matrix(p, E, opts); },
                           [&](double E) { return p.threshold + E; }, p.n_waves(), E_grid);
}

// ---------------------------------------------------------------------------
// Bound states

/// Off-shell coupling g_a(k) of a bound state, known on the Nystrom nodes and
/// interpolated through the homogeneous equation g = V G g.
struct CouplingFunction {
  Potential potential;
  double E = 0.0;
  std::vector<double> nodes;
  std::vector<double> D;                    // w q^2 / (2 pi^2 (q^2/2mu - E))
  std::vector<std::vector<double>> values;  // [wave][node]
  double homogeneous_residual = 0.0;        // max |g - V G g| / max |g| on the nodes

  double operator()(std::size_t wave, double k) const {
    double s = 0.0;
    for (std::size_t b = 0; b < values.size(); ++b)
      for (std::size_t j = 0; j < nodes.size(); ++j) s += potential.V(wave, b, k, nodes[j]) * D[j] * values[b][j];
    return s;
  }
};

struct BoundState {
  double E = 0.0;
  double kappa = 0.0;  // binding momentum, E = -kappa^2/2mu
  CouplingFunction g;
  double resolution_change = 0.0;  // |E(2N) - E(N)| / |E(N)|, 0 if not checked
};

struct BoundStateOptions {
  double E_min = 0.0;  // deepest energy scanned; 0: -20 c^2/2mu
  double E_max = 0.0;  // shallowest energy scanned; 0: -1e-8 c^2/2mu
  int scan_points = 80;
  LSOptions grid;
};

namespace lseq_detail {

struct BoundGrid {
  QuadratureRule rule;
  RMatrix V;

  BoundGrid(const Potential& p, std::size_t n, double c) : rule(rational_map_rule(n, c)) {
    V = kernel_matrix(p, rule.x, rule.x);
  }

  RVector D(double mu, double E, std::size_t nw, int power = 1) const {
    const std::size_t n = rule.size();
    RVector d(static_cast<Eigen::Index>(n * nw));
    for (std::size_t j = 0; j < n; ++j) {
      const double den = rule.x[j] * rule.x[j] / (2.0 * mu) - E;
      const double v = rule.w[j] * rule.x[j] * rule.x[j] / (2.0 * pi * pi) / (power == 1 ? den : den * den);
      for (std::size_t a = 0; a < nw; ++a) d(static_cast<Eigen::Index>(a * n + j)) = v;
    }
    return d;
  }

  RMatrix M(double mu, double E, std::size_t nw) const {
    const RVector s = D(mu, E, nw).cwiseSqrt();
    return s.asDiagonal() * V * s.asDiagonal();
  }

  double fredholm(double mu, double E, std::size_t nw) const {
    const RMatrix A = RMatrix::Identity(V.rows(), V.cols()) - M(mu, E, nw);
    return A.partialPivLu().determinant();
  }
};

inline double root_in(const std::function<double(double)>& f, double a, double b) {
  std::uintmax_t it = 200;
  const auto r = boost::math::tools::toms748_solve(f, a, b, boost::math::tools::eps_tolerance<double>(52), it);
  return 0.5 * (r.first + r.second);
}

}  // namespace lseq_detail

/// All bound states whose Fredholm determinant det(1 - V G) changes sign in
/// the scan window, shallowest first.
inline std::vector<BoundState> bound_states(const Potential& p, const BoundStateOptions& opts = {}) {
  const double c = lseq_detail::map_scale(p, opts.grid);
  const double mu = p.mu();
  const std::size_t nw = p.n_waves();
  const double e0 = c * c / (2.0 * mu);
  const double lo = opts.E_min < 0.0 ? opts.E_min : -20.0 * e0;
  const double hi = opts.E_max < 0.0 ? opts.E_max : -1e-8 * e0;
  if (!(lo < hi && hi < 0.0)) throw Error(ErrorKind::invalid_argument, "bound-state window must lie below threshold");
  if (opts.scan_points < 2) throw Error(ErrorKind::invalid_argument, "need at least two scan points");

  const lseq_detail::BoundGrid grid(p, opts.grid.n_nodes, c);
  auto det = [&](double E) { return grid.fredholm(mu, E, nw); };

  // Logarithmic scan in |E| from the threshold side.
  std::vector<double> Es;
  for (int i = 0; i < opts.scan_points; ++i)
    Es.push_back(hi * std::pow(lo / hi, static_cast<double>(i) / (opts.scan_points - 1)));
  std::vector<BoundState> out;
  double prev = det(Es[0]);
  for (std::size_t i = 1; i < Es.size(); ++i) {
    const double cur = det(Es[i]);
    if ((prev < 0.0) != (cur < 0.0)) {
      BoundState b;
      b.E = lseq_detail::root_in(det, Es[i], Es[i - 1]);
      b.kappa = std::sqrt(-2.0 * mu * b.E);

      if (opts.grid.check_resolution) {
        const lseq_detail::BoundGrid fine(p, 2 * opts.grid.n_nodes, c);
        auto det2 = [&](double E) { return fine.fredholm(mu, E, nw); };
        double a = b.E * (1.0 + 1e-4), z = b.E * (1.0 - 1e-4);
        for (int w = 0; w < 6 && (det2(a) < 0.0) == (det2(z) < 0.0); ++w) {
          a = std::max(b.E * (1.0 + 1e-4 * std::pow(10.0, w + 1)), lo);
          z = std::min(b.E * (1.0 - 1e-4 * std::pow(10.0, w + 1)), hi);
        }
        if ((det2(a) < 0.0) == (det2(z) < 0.0))
          throw Error(ErrorKind::resolution, "bound state not reproduced on the refined grid");
        const double E2 = lseq_detail::root_in(det2, a, z);
        b.resolution_change = std::abs(E2 - b.E) / std::abs(b.E);
        if (b.resolution_change > opts.grid.resolution_tol) {
          std::ostringstream os;
          os << "E_B changes by " << b.resolution_change << " (relative) under N -> 2N";
          throw Error(ErrorKind::resolution, os.str());
        }
      }

      // Null vector of 1 - M; g = D^{-1/2} y normalized by g^T D' g = 1.
      const RMatrix M = grid.M(mu, b.E, nw);
      Eigen::SelfAdjointEigenSolver<RMatrix> es(M);
      Eigen::Index best = 0;
      for (Eigen::Index j = 1; j < es.eigenvalues().size(); ++j)
        if (std::abs(es.eigenvalues()(j) - 1.0) < std::abs(es.eigenvalues()(best) - 1.0)) best = j;
      const RVector y = es.eigenvectors().col(best);
      const RVector D = grid.D(mu, b.E, nw), D2 = grid.D(mu, b.E, nw, 2);
      RVector g = y.cwiseQuotient(D.cwiseSqrt());
      g /= std::sqrt(g.dot(D2.cwiseProduct(g)));
      Eigen::Index imax = 0;
      g.head(static_cast<Eigen::Index>(grid.rule.size())).cwiseAbs().maxCoeff(&imax);
      if (g(imax) < 0.0) g = -g;

      CouplingFunction& cf = b.g;
      cf.potential = p;
      cf.E = b.E;
      cf.nodes = grid.rule.x;
      const std::size_t n = grid.rule.size();
      cf.D.assign(D.data(), D.data() + n);
      cf.values.assign(nw, std::vector<double>(n));
      for (std::size_t a = 0; a < nw; ++a)
        for (std::size_t j = 0; j < n; ++j) cf.values[a][j] = g(static_cast<Eigen::Index>(a * n + j));
      const RVector resid = g - grid.V * D.cwiseProduct(g);
      cf.homogeneous_residual = resid.cwiseAbs().maxCoeff() / g.cwiseAbs().maxCoeff();
      out.push_back(std::move(b));
    }
    prev = cur;
  }
  return out;
}

/// The shallowest bound state in the window.
inline BoundState bound_state(const Potential& p, const BoundStateOptions& opts = {}) {
  auto all = bound_states(p, opts);
  if (all.empty()) throw Error(ErrorKind::no_zero, "no bound state in the search window");
  return std::move(all.front());
}

struct BoundCompositeness {
  std::vector<double> X_wave;
  double X = 0.0;
  bool cutoff_warning = false;
  double tail = 0.0;  // relative size of the integrand at the cutoff check point
};

/// X_a = int q^2 dq/(2 pi^2) g_a(q)^2 / (q^2/2mu - E_B)^2 by adaptive quadrature
/// of the interpolated coupling function (independent of the Nystrom nodes).
inline BoundCompositeness X_bound(const BoundState& b) {
  using boost::math::quadrature::gauss_kronrod;
  const auto& g = b.g;
  const double mu = g.potential.mu();
  const double c = std::max(g.potential.map_scale(), b.kappa);
  BoundCompositeness r;
  double peak = 0.0, tail = 0.0;
  const double edge = g.potential.table_edge().value_or(50.0 * c);
  for (std::size_t a = 0; a < g.values.size(); ++a) {
    auto integrand = [&](double q) {
      const double v = g(a, q);
      const double den = q * q / (2.0 * mu) - b.E;
      return q * q * v * v / (2.0 * pi * pi * den * den);
    };
    const double inf = std::numeric_limits<double>::infinity();
    double x = 0.0;
    const double splits[] = {0.0, b.kappa, c, 4.0 * c};
    for (int s = 0; s < 3; ++s) x += gauss_kronrod<double, 61>::integrate(integrand, splits[s], splits[s + 1], 15, 1e-12);
    x += gauss_kronrod<double, 61>::integrate(integrand, 4.0 * c, inf, 15, 1e-12);
    r.X_wave.push_back(x);
    r.X += x;
    for (double q : {b.kappa, 0.5 * c, c}) peak = std::max(peak, q * integrand(q));
    tail = std::max(tail, edge * integrand(edge));
  }
  r.tail = peak > 0.0 ? tail / peak : 0.0;
  r.cutoff_warning = r.tail > 1e-6;
  return r;
}

/// Largest relative deviation of lim (E_B - E) T_ab(k, k) from g_a(k) g_b(k),
/// from Nystrom solves on the bound state's own grid.
inline double residue_deviation(const BoundState& b, double k, std::size_t n_nodes, double map_scale) {
  LSOptions o;
  o.n_nodes = n_nodes;
  o.map_scale = map_scale;
  o.check_resolution = false;
  const auto& p = b.g.potential;
  auto T = [&](cplx E) { return solve_T(p, E, {k}, o); };
  const CMatrix R = pole_factor_residue(T, b.E, 1e-3 * std::abs(b.E));
  const std::size_t nw = p.n_waves();
  CVector gk(static_cast<Eigen::Index>(nw));
  for (std::size_t a = 0; a < nw; ++a) gk(static_cast<Eigen::Index>(a)) = b.g(a, k);
  const CMatrix G = gk * gk.transpose();
  return (R - G).cwiseAbs().maxCoeff() / G.cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------------------
// Separable poles on either sheet

/// Pole problem for the separable amplitude tau = lambda / (1 - lambda I).
inline PoleProblem make_problem(const Potential& p, Sheet sheet) {
  lseq_detail::require_separable(p);
  PoleProblem pr;
  pr.pole_function = [p, sheet](cplx E) { return 1.0 - p.lambda() * loop_integral(p, E, sheet).total; };
  pr.T = [p, sheet](cplx E) {
    CMatrix t(1, 1);
    t(0, 0) = separable_tau(p, E, sheet);
    return t;
  };
  pr.numerator_denominator = [p, sheet](cplx E) {
    CMatrix n(1, 1);
    n(0, 0) = p.lambda();
    return std::make_pair(n, 1.0 - p.lambda() * loop_integral(p, E, sheet).total);
  };
  pr.structure.right_rays = {0.0};
  pr.branch_points = {cplx{0.0, 0.0}};
  for (const auto& f : p.form_factors())
    for (cplx s : f.singularities()) pr.structure.points.push_back(s * s / (2.0 * p.mu()));
  pr.scale = 1e-6 * p.map_scale() * p.map_scale() / (2.0 * p.mu());
  return pr;
}

inline PoleCandidate find_pole(const Potential& p, Sheet sheet, cplx start, SearchOptions opts = {}) {
  return find_pole(make_problem(p, sheet), {sheet}, start, std::move(opts));
}

struct SeparablePoleCompositeness {
  SheetedPoint pole;
  cplx k;       // momentum on the pole's sheet
  cplx gamma2;  // lim (E_p - E) tau, so g_a(q) = gamma f_a(q)
  std::vector<cplx> integral_part;
  std::vector<cplx> boundary_part;
  std::vector<cplx> X_wave;
  cplx X;
  cplx X_without_boundary;
  double radius = 0.0;
  double theta = 0.0;  // ray angle used for the integral
};

/// X_a for a pole of a separable potential on either sheet:
///   X_a = int_ray q^2 dq/(2 pi^2) g_a^2/(q^2/2mu - E_p)^2 + (i mu^2/(pi k)) d(k g_a^2)/dk |_{k_p},
/// the second term present on sheet II only. gamma^2 comes from a contour integral of tau.
inline SeparablePoleCompositeness X_resonance(const Potential& p, const PoleCandidate& pole,
                                              const ResidueOptions& ropts = {}) {
  const PoleProblem pr = make_problem(p, pole.location.sheet(0));
  const cplx E = pole.location.z;
  const Sheet sheet = pole.location.sheet(0);
  SeparablePoleCompositeness r;
  r.pole = pole.location;
  r.k = nonrelativistic_momentum(p.mu(), E, sheet);
  r.radius = contour_radius(pr, E, ropts.radius);
  r.gamma2 = contour_residue(pr.T, E, r.radius, ropts.n_points)(0, 0);
  r.theta = ray_angle(p, E);
  const WaveSums d1 = loop_integral_dE(p, E, Sheet::I);
  const WaveSums dII = sheet == Sheet::II ? loop_integral_dE(p, E, Sheet::II) : d1;
  r.X = 0.0;
  r.X_without_boundary = 0.0;
  for (std::size_t a = 0; a < p.n_waves(); ++a) {
    r.integral_part.push_back(r.gamma2 * d1.wave[a]);
    r.boundary_part.push_back(r.gamma2 * (dII.wave[a] - d1.wave[a]));
    r.X_wave.push_back(r.integral_part[a] + r.boundary_part[a]);
    r.X += r.X_wave[a];
    r.X_without_boundary += r.integral_part[a];
  }
  return r;
}

}  // namespace hadcomp
