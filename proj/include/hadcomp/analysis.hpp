#pragma once

// Runs the jobs an AnalysisConfig asks for and assembles the report, the text
// summary and the CSV tables. Jobs are independent apart from saturation,
// which may take |k_R| from the first pole and therefore runs last.

#include <nlohmann/json.hpp>

#include <atomic>
#include <cstdio>
#include <functional>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "hadcomp/amplitudes.hpp"
#include "hadcomp/compositeness.hpp"
#include "hadcomp/config.hpp"
#include "hadcomp/lseq.hpp"
#include "hadcomp/poles.hpp"
#include "hadcomp/saturation.hpp"

namespace hadcomp {

struct JobOutcome {
  std::string id;
  std::string kind;
  bool ok = false;
  std::string error;
  std::string error_kind;
  json data = json::object();
  std::vector<std::string> text;
  std::string csv_name;  // non-empty when the job produced a table
  std::string csv;
};

struct AnalysisRun {
  std::vector<JobOutcome> jobs;

  std::size_t n_ok() const {
    std::size_t n = 0;
    for (const auto& j : jobs) n += j.ok ? 1 : 0;
    return n;
  }
  /// 0 when at least one job succeeded, 3 when all failed.
  int exit_code() const { return !jobs.empty() && n_ok() == 0 ? 3 : 0; }
};

namespace analysis_detail {

inline json cjson(cplx z) { return json{{"re", z.real()}, {"im", z.imag()}}; }

inline json cvec(const CVector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(cjson(v(i)));
  return a;
}

inline json cvec(const std::vector<cplx>& v) {
  json a = json::array();
  for (cplx z : v) a.push_back(cjson(z));
  return a;
}

inline std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

inline std::string fmt(cplx z, const char* f = "%.10g") {
  return fmt(f, z.real()) + (z.imag() < 0.0 ? " - " : " + ") + fmt(f, std::abs(z.imag())) + "i";
}

inline double relative_gap(const CMatrix& a, const CMatrix& ref) {
  const double s = ref.cwiseAbs().maxCoeff();
  return s > 0.0 ? (a - ref).cwiseAbs().maxCoeff() / s : (a - ref).cwiseAbs().maxCoeff();
}

inline SearchOptions search_options(const Tolerances& t) {
  SearchOptions o;
  o.max_iters = t.max_iters;
  o.step_tol = t.pole_step;
  return o;
}

inline ResidueOptions residue_options(const Tolerances& t) {
  ResidueOptions o;
  o.radius = t.contour_radius;
  o.n_points = t.contour_points;
  o.rank1_tol = t.rank1;
  return o;
}

inline std::string sheet_text(const std::vector<Sheet>& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::string(to_string(s[i]));
  return out;
}

/// Couplings by all three residue methods; the contour set is reported,
/// the others are checked against it.
inline CouplingSet couplings_checked(const PoleProblem& pr, cplx z, const Tolerances& t, JobOutcome& o) {
  const ResidueOptions ro = residue_options(t);
  const CouplingSet c = extract_couplings(pr, z, ResidueMethod::contour, ro);
  const CouplingSet pf = extract_couplings(pr, z, ResidueMethod::pole_factor, ro);
  const CouplingSet fd = extract_couplings(pr, z, ResidueMethod::finite_difference, ro);
  const double gap = std::max(relative_gap(pf.R, c.R), relative_gap(fd.R, c.R));
  o.data["couplings"] = {{"method", std::string(to_string(c.method))},
                         {"g", cvec(c.g)},
                         {"abs_g", json::array()},
                         {"contour_radius", c.radius},
                         {"rank1_residual", {{"requested", t.rank1}, {"achieved", c.rank1_residual}}},
                         {"contamination_warning", c.contamination_warning},
                         {"method_agreement",
                          {{"requested", t.residue_agreement}, {"achieved", gap}, {"ok", gap <= t.residue_agreement}}}};
  for (Eigen::Index i = 0; i < c.g.size(); ++i) o.data["couplings"]["abs_g"].push_back(std::abs(c.g(i)));
  o.text.push_back("  couplings g = " + [&] {
    std::string s;
    for (Eigen::Index i = 0; i < c.g.size(); ++i) s += (i ? ", " : "") + fmt(c.g(i));
    return s;
  }() + "  (contour; methods agree to " + fmt("%.2e", gap) + ")");
  if (c.contamination_warning) o.text.push_back("  warning: residue is not rank 1 (another pole nearby?)");
  return c;
}

inline void pole_location(const PoleCandidate& pc, const Tolerances& t, JobOutcome& o) {
  o.data["location"] = {{"z", cjson(pc.location.z)},
                        {"sheet", json::array()},
                        {"det_residual", pc.det_residual},
                        {"requested_step", t.pole_step},
                        {"steps", pc.newton_steps},
                        {"used_muller", pc.used_muller},
                        {"start", cjson(pc.basin_start)}};
  for (Sheet s : pc.location.sheets) o.data["location"]["sheet"].push_back(std::string(to_string(s)));
}

inline void compositeness_block(const PoleReport& r, const Tolerances& t, bool want_Z, JobOutcome& o) {
  json X = {{"X_i", cvec(r.X_i)}, {"X_abs_i", r.X_abs_i}, {"X", cjson(r.X)}, {"X_abs", std::abs(r.X)},
            {"phases", r.phases}, {"laurent_applicable", r.laurent_applicable}};
  std::string line = "  X = " + fmt(r.X) + "  |X_i| =";
  for (double a : r.X_abs_i) line += " " + fmt("%.6f", a);
  o.text.push_back(line);
  if (want_Z && r.Z) {
    X["Z"] = cjson(*r.Z);
    X["sum_residual"] = {{"requested", t.sum_rule}, {"achieved", *r.sum_residual}, {"ok", *r.sum_residual <= t.sum_rule}};
    o.text.push_back("  Z = " + fmt(*r.Z) + "  |X + Z - 1| = " + fmt("%.3e", *r.sum_residual) + " (requested " +
                     fmt("%.1e", t.sum_rule) + ")");
  } else {
    X["Z"] = nullptr;
    X["Z_note"] = want_Z ? "kernel derivative unavailable" : "sum_rule analysis not requested";
  }
  if (!r.laurent_applicable) {
    X["applicability_note"] = "Re of the pole lies outside the threshold window of its sheet; X_i interpretation unreliable";
    o.text.push_back("  flag: pole outside the threshold window of its sheet; X_i interpretation unreliable");
  }
  o.data["compositeness"] = X;
}

/// ERE dictionary for a nonrelativistic sheet-II pole k = k_r - i k_i.
inline void ere_block(cplx k, double mu, JobOutcome& o) {
  json e = {{"k", cjson(k)}};
  const double kr = k.real(), ki = -k.imag();
  if (std::abs(kr) <= 1e-12 * std::abs(k)) {
    e["note"] = "pole on the imaginary momentum axis (bound or virtual state); resonance ERE formulas do not apply";
    o.text.push_back("  ERE: k = " + fmt(k) + " MeV on the imaginary axis, |k| = " + fmt("%.6g", std::abs(k)) + " MeV");
  } else if (kr > 0.0 && ki > 0.0) {
    const EREParameters p = ere_from_pole(k);
    const ERECompositeness c = ere_compositeness(k);
    const double two_r_over_a_inv = 1.0 / (2.0 * p.r_over_a - 1.0);
    e["a"] = p.a;
    e["r"] = p.r;
    e["a_fm"] = inv_mev_to_fm(p.a);
    e["r_fm"] = inv_mev_to_fm(p.r);
    e["r_over_a"] = p.r_over_a;
    e["X"] = cjson(c.X);
    e["X_abs"] = c.X_abs;
    e["X_abs_alt"] = c.X_abs_alt;
    e["X_abs_squared"] = c.X_abs * c.X_abs;
    e["discrepancy_note"] =
        "(2r/a - 1)^-1 = " + fmt("%.10g", two_r_over_a_inv) + " equals |X|^2 = (k_i/k_r)^2, not |X| = k_i/k_r; both are listed";
    e["re_X"] = c.X.real();
    e["re_X_note"] = "Re X = 0 for every resonance pole; X must be read through |X|";
    e["M_R"] = (kr * kr - ki * ki) / (2.0 * mu);
    e["Gamma"] = 2.0 * kr * ki / mu;
    o.text.push_back("  ERE: a = " + fmt("%.6g", p.a) + " MeV^-1, r = " + fmt("%.6g", p.r) + " MeV^-1, r/a = " +
                     fmt("%.6g", p.r_over_a));
    o.text.push_back("  ERE: X = " + fmt(c.X, "%.6g") + ", |X| = " + fmt("%.6g", c.X_abs) + ", alt (2r/a-1)^-1 = " +
                     fmt("%.6g", c.X_abs_alt));
    o.text.push_back("  note: the alternative form equals |X|^2, not |X|; both are reported");
  } else {
    e["note"] = "pole momentum not of the form k_r - i k_i with k_r, k_i > 0";
  }
  o.data["ere"] = e;
}

inline void pole_job_kernel(const AnalysisConfig& cfg, const PoleJob& job, JobOutcome& o) {
  const auto& m = cfg.kernel_model();
  const PoleCandidate pc = find_pole(m, job.sheets, job.start, search_options(cfg.tol));
  pole_location(pc, cfg.tol, o);
  const cplx sq = std::sqrt(pc.location.z);
  o.data["location"]["sqrt_s"] = cjson(sq);
  o.data["location"]["M_R"] = sq.real();
  o.data["location"]["Gamma"] = -2.0 * sq.imag();
  o.text.push_back("  s = " + fmt(pc.location.z) + " MeV^2, sqrt(s) = " + fmt(sq) + " MeV, sheet (" +
                   sheet_text(job.sheets) + ")");
  bool any_II = false;
  for (Sheet s : job.sheets) any_II = any_II || s == Sheet::II;
  if (any_II && pc.location.z.imag() > 0.0) {
    o.data["location"]["note"] = "upper half plane on an unphysical sheet: this is the conjugate partner";
    o.text.push_back("  note: converged to the upper-half-plane conjugate pole");
  }
  const CouplingSet c = couplings_checked(make_problem(m, job.sheets), pc.location.z, cfg.tol, o);
  PoleReport r = phase_normalize(compositeness_sum_rule(m, pc.location, c));
  compositeness_block(r, cfg.tol, cfg.wants("sum_rule"), o);
  if (any_II && pc.location.z.imag() != 0.0) {
    const auto w = partial_widths(m, pc.location, c.g);
    o.data["partial_widths"] = w;
    std::string line = "  partial widths |g_i|^2 p_i/(8 pi M_R^2):";
    for (double x : w) line += " " + fmt("%.6g", x);
    o.text.push_back(line + " MeV");
  }
}

template <class Model>
void pole_job_scalar(const AnalysisConfig& cfg, const Model& m, const PoleJob& job, JobOutcome& o) {
  const Sheet sheet = job.sheets.front();
  const PoleCandidate pc = find_pole(m, sheet, job.start, search_options(cfg.tol));
  pole_location(pc, cfg.tol, o);
  const cplx k = m.momentum(pc.location);
  o.data["location"]["k"] = cjson(k);
  o.data["location"]["abs_k"] = std::abs(k);
  o.text.push_back("  E = " + fmt(pc.location.z) + " MeV, k = " + fmt(k) + " MeV, sheet " +
                   std::string(to_string(sheet)));
  const CouplingSet c = couplings_checked(make_problem(m, sheet), pc.location.z, cfg.tol, o);
  PoleReport r = phase_normalize(compositeness_sum_rule(m, pc.location, c));
  compositeness_block(r, cfg.tol, cfg.wants("sum_rule"), o);
  if (cfg.wants("ere") && sheet == Sheet::II) ere_block(k, m.mu, o);
}

inline void pole_job_lseq(const AnalysisConfig& cfg, const PoleJob& job, JobOutcome& o) {
  const Potential& p = cfg.potential();
  if (!p.is_separable())
    throw Error(ErrorKind::continuation_blocked,
                "pole searches in the complex plane need a separable potential; use the lseq bound-state analysis");
  const Sheet sheet = job.sheets.front();
  const PoleCandidate pc = find_pole(p, sheet, job.start, search_options(cfg.tol));
  pole_location(pc, cfg.tol, o);
  const auto x = X_resonance(p, pc, residue_options(cfg.tol));
  o.data["location"]["k"] = cjson(x.k);
  o.data["location"]["abs_k"] = std::abs(x.k);
  o.text.push_back("  E = " + fmt(pc.location.z) + " MeV, k = " + fmt(x.k) + " MeV, sheet " +
                   std::string(to_string(sheet)));
  const double dev = std::abs(x.X - 1.0);
  json X = {{"gamma2", cjson(x.gamma2)},
            {"waves", p.waves()},
            {"X_wave", cvec(x.X_wave)},
            {"integral_part", cvec(x.integral_part)},
            {"boundary_part", cvec(x.boundary_part)},
            {"X", cjson(x.X)},
            {"X_without_boundary", cjson(x.X_without_boundary)},
            {"deviation_from_one", {{"requested", 1e-5}, {"achieved", dev}, {"ok", dev <= 1e-5}}},
            {"contour_radius", x.radius},
            {"ray_angle", x.theta}};
  o.data["compositeness"] = X;
  o.text.push_back("  X = " + fmt(x.X) + "  (boundary term " + fmt(x.X - x.X_without_boundary) + ")  |X - 1| = " +
                   fmt("%.3e", dev));
  if (cfg.wants("ere") && sheet == Sheet::II) ere_block(x.k, p.mu(), o);
}

inline void bound_states_job(const AnalysisConfig& cfg, JobOutcome& o) {
  const Potential& p = cfg.potential();
  const auto states = bound_states(p, cfg.bound_search);
  if (states.empty()) throw Error(ErrorKind::no_zero, "no bound state in the search window");
  o.data["states"] = json::array();
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto& b = states[i];
    const auto X = X_bound(b);
    const double c = cfg.tol.ls_map_scale > 0.0 ? cfg.tol.ls_map_scale : p.map_scale();
    const double dev = residue_deviation(b, b.kappa, cfg.tol.ls_nodes, c);
    json s = {{"E", b.E},
              {"kappa", b.kappa},
              {"binding_energy", -b.E},
              {"waves", p.waves()},
              {"X_wave", X.X_wave},
              {"X", X.X},
              {"Z", 1.0 - X.X},
              {"deviation_from_one", std::abs(X.X - 1.0)},
              {"cutoff_warning", X.cutoff_warning},
              {"tail", X.tail},
              {"resolution", {{"requested", cfg.tol.ls_resolution}, {"achieved", b.resolution_change}}},
              {"homogeneous_residual", b.g.homogeneous_residual},
              {"residue_normalization_deviation", dev}};
    o.text.push_back("  state " + std::to_string(i) + ": E_B = " + fmt("%.10g", -b.E) + " MeV, kappa = " +
                     fmt("%.8g", b.kappa) + " MeV");
    std::string line = "    X = " + fmt("%.6f", X.X) + " (per wave:";
    for (double x : X.X_wave) line += " " + fmt("%.6f", x);
    o.text.push_back(line + ")");
    if (cfg.reference) {
      const auto& r = *cfg.reference;
      const std::string note = "reference band" + (r.label.empty() ? std::string() : " (" + r.label + ")") + ": X = " +
                               fmt("%.2f", r.X_min) + "-" + fmt("%.2f", r.X_max);
      s["reference_note"] = note;
      s["within_reference_band"] = X.X >= r.X_min - 1e-6 && X.X <= r.X_max + 1e-6;
      o.text.push_back("    " + note);
    }
    if (X.cutoff_warning) o.text.push_back("    warning: integrand has not decayed at the grid edge");
    o.data["states"].push_back(s);
  }
}

inline void cdd_job(const AnalysisConfig& cfg, JobOutcome& o) {
  const auto& m = cfg.cdd_model();
  const cplx tZ = m.t(physical_point(cplx{m.M_Z, 0.0}, 1));
  const CDDDiagnostics d = cdd_shifts(m, cfg.cdd.flag_momentum, cfg.tol.cdd_flag_factor);
  auto ext = [](const ExtendedReal& x) {
    return json{{"kind", x.kind == ExtendedReal::Kind::finite ? "finite" : "infinite"},
                {"value", x.is_finite() ? json(x.value) : json(x.str())}};
  };
  o.data = {{"t_at_M_Z", cjson(tZ)},
            {"delta_a", ext(d.delta_a)},
            {"delta_r", ext(d.delta_r)},
            {"flag_momentum", cfg.cdd.flag_momentum},
            {"flag_factor", cfg.tol.cdd_flag_factor},
            {"cdd_proximity_flag", d.cdd_proximity_flag}};
  if (d.delta_r.is_finite()) {
    o.data["delta_a_fm"] = inv_mev_to_fm(d.delta_a.value);
    o.data["delta_r_fm"] = inv_mev_to_fm(d.delta_r.value);
  }
  o.text.push_back("  |t(M_Z)| = " + fmt("%.3e", std::abs(tZ)));
  o.text.push_back("  delta_a = " + d.delta_a.str() + " MeV^-1, delta_r = " + d.delta_r.str() + " MeV^-1");
  if (m.M_Z == 0.0) o.text.push_back("  M_Z = 0: delta_a -> 0 and delta_r -> -inf (limit reported, not evaluated)");
  o.text.push_back(std::string("  near-threshold CDD flag: ") + (d.cdd_proximity_flag ? "raised" : "not raised"));
}

/// S matrix of a single-channel nonrelativistic model at real E > 0.
inline SMatrix scalar_S(const AnalysisConfig& cfg, double E) {
  switch (cfg.family) {
    case ModelFamily::ere: return S_matrix(cfg.ere_model(), E);
    case ModelFamily::cdd: return S_matrix(cfg.cdd_model(), E);
    case ModelFamily::lseq: {
      LSOptions lo;
      lo.n_nodes = cfg.tol.ls_nodes;
      lo.map_scale = cfg.tol.ls_map_scale;
      lo.resolution_tol = cfg.tol.ls_resolution;
      return S_matrix(cfg.potential(), E, lo);
    }
    default: break;
  }
  throw Error(ErrorKind::invalid_argument, "scalar S matrix needs a nonrelativistic model");
}

inline double model_mu(const AnalysisConfig& cfg) { return cfg.channels.front().mu(); }

inline void ere_job(const AnalysisConfig& cfg, JobOutcome& o) {
  if (cfg.family == ModelFamily::ere) {
    const auto& m = cfg.ere_model();
    o.data["a"] = m.a;
    o.data["r"] = m.r;
    o.data["a_fm"] = inv_mev_to_fm(m.a);
    o.data["r_fm"] = inv_mev_to_fm(m.r);
    o.data["r_over_a"] = m.r / m.a;
    const bool flag = large_negative_r(m.r, std::max(1.0 / std::abs(m.a), 1e-12), cfg.tol.cdd_flag_factor);
    o.data["large_negative_r_flag"] = flag;
    o.text.push_back("  a = " + fmt("%.6g", inv_mev_to_fm(m.a)) + " fm, r = " + fmt("%.6g", inv_mev_to_fm(m.r)) +
                     " fm, r/a = " + fmt("%.6g", m.r / m.a));
    if (flag) o.text.push_back("  flag: large negative effective range (possible nearby CDD pole)");
  }
  if (!cfg.ere_grid) return;
  const double mu = model_mu(cfg);
  std::ostringstream csv;
  csv.precision(12);
  csv << "E_MeV,k_MeV,k2_MeV2,kcotd_MeV\n";
  std::size_t bad = 0;
  for (double E : cfg.ere_grid->values()) {
    const double k = E > 0.0 ? std::sqrt(2.0 * mu * E) : std::numeric_limits<double>::quiet_NaN();
    double kc = std::numeric_limits<double>::quiet_NaN();
    try {
      const cplx S = scalar_S(cfg, E).S(0, 0);
      kc = k / std::tan(0.5 * std::arg(S));
    } catch (const Error&) {
      ++bad;
    }
    csv << E << "," << k << "," << k * k << "," << kc << "\n";
  }
  o.csv_name = "ere_scan.csv";
  o.csv = csv.str();
  o.data["ere_scan_points"] = cfg.ere_grid->points;
  o.data["ere_scan_nan_points"] = bad;
  o.text.push_back("  k cot(delta) scan: " + std::to_string(cfg.ere_grid->points) + " points -> ere_scan.csv");
}

inline std::string channel_label(const AnalysisConfig& cfg, std::size_t i) {
  const auto& l = cfg.channels[i].spin_label();
  return l.empty() ? "ch" + std::to_string(i + 1) : l;
}

inline void phase_shift_job(const AnalysisConfig& cfg, JobOutcome& o) {
  const auto grid = cfg.phase_grid->values();
  PhaseTable t;
  std::size_t n = cfg.channels.size();
  if (cfg.family == ModelFamily::kernel) {
    t = phase_shift(cfg.kernel_model(), grid);
  } else {
    for (double E : grid)
      if (!(E > 0.0)) throw Error(ErrorKind::no_open_channel, "phase-shift grid must lie above threshold (E > 0)");
    const double th = cfg.channels.front().threshold_E();
    t = phase_shift_table([&](double E) { return scalar_S(cfg, E); }, [&](double E) { return th + E; }, 1, grid);
    n = 1;
  }
  std::ostringstream csv;
  csv.precision(12);
  for (std::size_t c = 0; c < n; ++c)
    if (!t.unwrapped[c])
      csv << "# " << channel_label(cfg, c) << ": jump above 90 deg between grid points; raw arg values kept\n";
  csv << "sqrt_s_MeV";
  for (std::size_t c = 0; c < n; ++c) csv << ",delta_deg_" << channel_label(cfg, c);
  csv << ",inelasticity\n";
  double worst = 0.0;
  for (std::size_t i = 0; i < t.sqrt_s.size(); ++i) {
    csv << t.sqrt_s[i];
    for (std::size_t c = 0; c < n; ++c) csv << "," << t.delta_deg[c][i];
    csv << "," << t.inelasticity[i] << "\n";
  }
  for (double eta : t.inelasticity)
    if (!std::isnan(eta)) worst = std::max(worst, eta - 1.0);
  o.csv_name = "phase_shifts.csv";
  o.csv = csv.str();
  o.data = {{"points", t.sqrt_s.size()}, {"unwrapped", t.unwrapped}, {"max_inelasticity_excess", worst}};
  o.text.push_back("  " + std::to_string(t.sqrt_s.size()) + " points -> phase_shifts.csv");
}

inline void saturation_job(const AnalysisConfig& cfg, const std::vector<JobOutcome>& done, JobOutcome& o) {
  SaturationSystem s = cfg.saturation->system;
  if (cfg.saturation->k_R_from_pole) {
    const JobOutcome* first = nullptr;
    for (const auto& j : done)
      if (j.kind == "pole" && j.id == "pole:" + cfg.poles.front().label) first = &j;
    if (!first || !first->ok) throw Error(ErrorKind::search_failed, "|k_R| was to come from the first pole, which failed");
    s.k_R_abs = first->data.at("location").at("abs_k").get<double>();
    o.data["k_R_source"] = first->id;
  }
  const SaturationResult r = solve_saturation(s);
  o.data["k_R_abs"] = s.k_R_abs;
  o.data["c1"] = r.c1;
  o.data["c2"] = r.c2;
  o.data["X1"] = r.X1;
  o.data["X2"] = r.X2;
  o.data["Gamma1"] = r.Gamma1;
  o.data["Gamma2"] = r.Gamma2;
  o.data["feasible"] = r.feasible;
  o.data["degenerate"] = r.degenerate;
  o.data["determinant"] = r.determinant;
  o.data["epsilon"] = s.epsilon;
  o.data["note"] = r.note;
  json fr = json::array();
  for (const auto& f : r.frontier) fr.push_back({{"X", f.X}, {"Gamma_min", f.Gamma_min}, {"Gamma_max", f.Gamma_max}});
  o.data["frontier"] = fr;
  o.text.push_back("  kernels: Gamma_1/X_1 = " + fmt("%.6g", r.c1) + " MeV, Gamma_2/X_2 = " + fmt("%.6g", r.c2) + " MeV");
  if (r.feasible) {
    o.text.push_back("  X_1 = " + fmt("%.8f", r.X1) + ", X_2 = " + fmt("%.8f", r.X2) + "  (Gamma_1 = " +
                     fmt("%.6g", r.Gamma1) + ", Gamma_2 = " + fmt("%.6g", r.Gamma2) + " MeV)");
  } else {
    o.text.push_back("  infeasible: " + r.note + "; attainable (X, Gamma) frontier in the report");
  }
  if (r.degenerate) o.text.push_back("  note: " + r.note);
}

inline JobOutcome run_job(const AnalysisConfig& cfg, const std::string& id, const std::string& kind,
                          const std::function<void(JobOutcome&)>& body) {
  JobOutcome o;
  o.id = id;
  o.kind = kind;
  try {
    body(o);
    o.ok = true;
  } catch (const Error& e) {
    o.error = e.what();
    o.error_kind = std::string(to_string(e.kind()));
  } catch (const std::exception& e) {
    o.error = e.what();
    o.error_kind = "internal";
  }
  (void)cfg;
  return o;
}

}  // namespace analysis_detail

/// Runs every job of `cfg` on up to `threads` workers. Results come back in
/// job order whatever the scheduling; `on_done` (if set) is called once per
/// job from the worker that finished it.
inline AnalysisRun run_analysis(const AnalysisConfig& cfg, unsigned threads = 1,
                                const std::function<void(const JobOutcome&)>& on_done = {}) {
  using namespace analysis_detail;
  struct Job {
    std::string id, kind;
    std::function<void(JobOutcome&)> body;
  };
  std::vector<Job> jobs;
  for (const auto& pj : cfg.poles) {
    std::function<void(JobOutcome&)> body;
    switch (cfg.family) {
      case ModelFamily::kernel: body = [&cfg, pj](JobOutcome& o) { pole_job_kernel(cfg, pj, o); }; break;
      case ModelFamily::ere: body = [&cfg, pj](JobOutcome& o) { pole_job_scalar(cfg, cfg.ere_model(), pj, o); }; break;
      case ModelFamily::cdd: body = [&cfg, pj](JobOutcome& o) { pole_job_scalar(cfg, cfg.cdd_model(), pj, o); }; break;
      case ModelFamily::lseq: body = [&cfg, pj](JobOutcome& o) { pole_job_lseq(cfg, pj, o); }; break;
    }
    jobs.push_back({"pole:" + pj.label, "pole", body});
  }
  if (cfg.wants("lseq")) jobs.push_back({"bound_states", "bound_states", [&cfg](JobOutcome& o) { bound_states_job(cfg, o); }});
  if (cfg.wants("cdd")) jobs.push_back({"cdd", "cdd", [&cfg](JobOutcome& o) { cdd_job(cfg, o); }});
  if (cfg.wants("ere") && (cfg.family == ModelFamily::ere || cfg.ere_grid))
    jobs.push_back({"ere", "ere", [&cfg](JobOutcome& o) { ere_job(cfg, o); }});
  if (cfg.wants("phase_shifts"))
    jobs.push_back({"phase_shifts", "phase_shifts", [&cfg](JobOutcome& o) { phase_shift_job(cfg, o); }});

  AnalysisRun run;
  run.jobs.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex cb;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      run.jobs[i] = run_job(cfg, jobs[i].id, jobs[i].kind, jobs[i].body);
      if (on_done) {
        std::lock_guard<std::mutex> lock(cb);
        on_done(run.jobs[i]);
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(jobs.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (cfg.wants("saturation")) {
    run.jobs.push_back(run_job(cfg, "saturation", "saturation", [&](JobOutcome& o) { saturation_job(cfg, run.jobs, o); }));
    if (on_done) on_done(run.jobs.back());
  }
  return run;
}

inline json job_json(const JobOutcome& j) {
  json o = {{"id", j.id}, {"kind", j.kind}, {"status", j.ok ? "ok" : "failed"}};
  if (!j.ok) {
    o["error"] = j.error;
    o["error_kind"] = j.error_kind;
  }
  o["result"] = j.data;
  if (!j.csv_name.empty()) o["table"] = j.csv_name;
  return o;
}

inline json conventions_json() {
  return {{"units", "MeV (lengths in MeV^-1 unless suffixed _fm); hbar c = 197.3269804 MeV fm"},
          {"im_G_sign", loop_imaginary_sign},
          {"relativistic", "T = [K^-1 + G]^-1, S = 1 + 2i rho^1/2 T rho^1/2, Im G(s+i0) = -rho"},
          {"nonrelativistic", "G = -ik, t = 1/(K^-1 - ik), S = 1 + 2ik t"},
          {"lseq", "T = V + V G T, G = 1/(q^2/2mu - E), measure q^2 dq/(2 pi^2); positive V attracts"},
          {"residue", "g g^T = lim (z_p - z) T"}};
}

inline json build_report(const AnalysisConfig& cfg, const AnalysisRun& run) {
  json r = {{"schema_version", config_schema_version},
            {"name", cfg.name},
            {"model_family", std::string(to_string(cfg.family))},
            {"kinematics", std::string(to_string(cfg.kinematics))},
            {"conventions", conventions_json()},
            {"config", cfg.resolved},
            {"jobs", json::array()},
            {"jobs_ok", run.n_ok()},
            {"jobs_failed", run.jobs.size() - run.n_ok()},
            {"exit_code", run.exit_code()}};
  for (const auto& j : run.jobs) r["jobs"].push_back(job_json(j));
  return r;
}

inline std::string report_text(const AnalysisConfig& cfg, const AnalysisRun& run) {
  std::ostringstream os;
  os << "hadcomp report: " << cfg.name << "\n";
  os << "model: " << to_string(cfg.family) << " (" << to_string(cfg.kinematics) << "), " << cfg.channels.size()
     << " channel(s)\n";
  os << "jobs: " << run.n_ok() << " ok, " << run.jobs.size() - run.n_ok() << " failed\n\n";
  for (const auto& j : run.jobs) {
    os << "[" << j.id << "] " << (j.ok ? "ok" : "FAILED") << "\n";
    if (!j.ok) os << "  error (" << j.error_kind << "): " << j.error << "\n";
    for (const auto& l : j.text) os << l << "\n";
    os << "\n";
  }
  return os.str();
}

inline json summary_json(const AnalysisConfig& cfg, const AnalysisRun& run) {
  json s = {{"name", cfg.name},
            {"exit_code", run.exit_code()},
            {"jobs_total", run.jobs.size()},
            {"jobs_ok", run.n_ok()},
            {"jobs_failed", run.jobs.size() - run.n_ok()},
            {"jobs", json::array()}};
  for (const auto& j : run.jobs) {
    json e = {{"id", j.id}, {"status", j.ok ? "ok" : "failed"}};
    if (j.ok && j.kind == "pole") {
      e["z"] = j.data.at("location").at("z");
      const json& c = j.data.at("compositeness");
      e["X"] = c.at("X");
      if (c.contains("Z")) e["Z"] = c.at("Z");
      if (c.contains("sum_residual")) e["sum_residual"] = c.at("sum_residual").at("achieved");
    }
    if (j.ok && j.kind == "bound_states") {
      e["X"] = json::array();
      for (const auto& st : j.data.at("states")) e["X"].push_back(st.at("X"));
    }
    if (!j.ok) e["error_kind"] = j.error_kind;
    s["jobs"].push_back(e);
  }
  return s;
}

}  // namespace hadcomp
