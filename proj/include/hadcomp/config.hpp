#pragma once

// JSON analysis configuration. Parsing fills every default and normalizes
// units to MeV; the normalized document is kept as `resolved` so that a
// report can embed it and a rerun from it reproduces the same artifacts.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "hadcomp/amplitudes.hpp"
#include "hadcomp/core.hpp"
#include "hadcomp/error.hpp"
#include "hadcomp/lseq.hpp"
#include "hadcomp/poles.hpp"
#include "hadcomp/saturation.hpp"

namespace hadcomp {

using json = nlohmann::json;

inline constexpr int config_schema_version = 1;

enum class ModelFamily { kernel, ere, cdd, lseq };

constexpr std::string_view to_string(ModelFamily f) {
  switch (f) {
    case ModelFamily::kernel: return "kernel";
    case ModelFamily::ere: return "ere";
    case ModelFamily::cdd: return "cdd";
    case ModelFamily::lseq: return "lseq";
  }
  return "unknown";
}

struct GridSpec {
  double from = 0.0;
  double to = 0.0;
  int points = 0;

  std::vector<double> values() const {
    std::vector<double> v;
    for (int i = 0; i < points; ++i) v.push_back(points == 1 ? from : from + (to - from) * i / (points - 1));
    return v;
  }
};

struct PoleJob {
  std::string label;
  std::vector<Sheet> sheets;
  cplx start;  // s (relativistic) or E (nonrelativistic)
};

struct Tolerances {
  double pole_step = 1e-10;
  int max_iters = 100;
  int contour_points = 64;
  double contour_radius = 0.0;  // 0: automatic
  double rank1 = 1e-6;
  double residue_agreement = 1e-6;
  double sum_rule = 1e-8;
  std::size_t ls_nodes = 200;
  double ls_resolution = 1e-6;
  double ls_map_scale = 0.0;  // 0: potential default
  double cdd_flag_factor = 10.0;
};

struct ReferenceBand {
  std::string label;
  double X_min = 0.0;
  double X_max = 1.0;
};

struct SaturationConfig {
  SaturationSystem system;
  bool k_R_from_pole = false;  // |k_R| taken from the first converged pole
};

struct CDDOptions {
  double flag_momentum = 0.0;  // |k| at which the natural range 1/|k| is judged
};

struct AnalysisConfig {
  int schema_version = config_schema_version;
  std::string name;
  Kinematics kinematics = Kinematics::relativistic;
  std::vector<Channel> channels;
  ModelFamily family = ModelFamily::kernel;
  std::variant<std::monostate, CoupledChannelModel, EREModel, CDDModel, Potential> model;
  std::vector<PoleJob> poles;
  std::vector<std::string> analyses;
  std::optional<GridSpec> phase_grid;
  std::optional<GridSpec> ere_grid;
  std::optional<SaturationConfig> saturation;
  std::optional<ReferenceBand> reference;
  BoundStateOptions bound_search;
  CDDOptions cdd;
  Tolerances tol;
  std::string output_dir;
  json resolved;

  bool wants(std::string_view a) const { return std::find(analyses.begin(), analyses.end(), a) != analyses.end(); }
  const CoupledChannelModel& kernel_model() const { return std::get<CoupledChannelModel>(model); }
  const EREModel& ere_model() const { return std::get<EREModel>(model); }
  const CDDModel& cdd_model() const { return std::get<CDDModel>(model); }
  const Potential& potential() const { return std::get<Potential>(model); }
};

namespace config_detail {

[[noreturn]] inline void fail(const std::string& where, const std::string& what) {
  throw Error(ErrorKind::config, where + ": " + what);
}

inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) fail(where, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) fail(where, "unknown key '" + it.key() + "'");
  }
}

inline double as_number(const json& v, const std::string& where) {
  if (!v.is_number()) fail(where, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail(where, "number must be finite");
  return x;
}

/// Number under `key`, or the default when absent. The value used is written to `out`.
inline double number(const json& in, json& out, const char* key, const std::string& where,
                     std::optional<double> def = std::nullopt) {
  double x;
  if (in.contains(key)) {
    x = as_number(in.at(key), where + "." + key);
  } else if (def) {
    x = *def;
  } else {
    fail(where, std::string("missing '") + key + "'");
  }
  out[key] = x;
  return x;
}

inline int integer(const json& in, json& out, const char* key, const std::string& where, std::optional<int> def) {
  int x;
  if (in.contains(key)) {
    const json& v = in.at(key);
    if (!v.is_number_integer()) fail(where + "." + key, "expected an integer");
    x = v.get<int>();
  } else if (def) {
    x = *def;
  } else {
    fail(where, std::string("missing '") + key + "'");
  }
  out[key] = x;
  return x;
}

inline std::string string(const json& in, json& out, const char* key, const std::string& where,
                          std::optional<std::string> def = std::nullopt) {
  std::string s;
  if (in.contains(key)) {
    if (!in.at(key).is_string()) fail(where + "." + key, "expected a string");
    s = in.at(key).get<std::string>();
  } else if (def) {
    s = *def;
  } else {
    fail(where, std::string("missing '") + key + "'");
  }
  out[key] = s;
  return s;
}

/// A complex number written as a plain number or as [re, im].
inline cplx complex_value(const json& v, const std::string& where) {
  if (v.is_number()) return {as_number(v, where), 0.0};
  if (v.is_array() && v.size() == 2) return {as_number(v[0], where), as_number(v[1], where)};
  fail(where, "expected a number or [re, im]");
}

inline json complex_json(cplx z) { return z.imag() == 0.0 ? json(z.real()) : json::array({z.real(), z.imag()}); }

inline CMatrix matrix(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) fail(where, "expected a non-empty matrix");
  const auto n = static_cast<Eigen::Index>(v.size());
  CMatrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const json& row = v[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) fail(where, "matrix must be square");
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = complex_value(row[static_cast<std::size_t>(j)], where);
  }
  return m;
}

inline json matrix_json(const CMatrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(complex_json(m(i, j)));
    rows.push_back(row);
  }
  return rows;
}

/// Length unit of a block: "MeV" (lengths in MeV^-1) or "fm".
inline std::string block_units(const json& in, json& out, const std::string& where, bool lengths_allowed) {
  const std::string u = in.contains("units") ? in.at("units").get<std::string>() : "MeV";
  if (u != "MeV" && u != "fm") fail(where, "units must be \"MeV\" or \"fm\"");
  if (u == "fm" && !lengths_allowed) fail(where, "inconsistent units: this block takes energies and momenta in MeV only");
  out["units"] = "MeV";
  return u;
}

inline GridSpec grid(const json& in, json& out, const std::string& where) {
  check_keys(in, {"from", "to", "points"}, where);
  GridSpec g;
  g.from = number(in, out, "from", where);
  g.to = number(in, out, "to", where);
  g.points = integer(in, out, "points", where, std::nullopt);
  if (g.points < 1) fail(where, "points must be >= 1");
  return g;
}

inline Channel channel(const json& in, json& out, const std::string& where) {
  check_keys(in, {"m1", "m2", "ell", "label", "units"}, where);
  block_units(in, out, where, false);
  const double m1 = number(in, out, "m1", where), m2 = number(in, out, "m2", where);
  const int ell = integer(in, out, "ell", where, 0);
  const std::string label = string(in, out, "label", where, std::string{});
  if (!(m1 > 0.0) || !(m2 > 0.0)) fail(where, "masses must be positive");
  if (ell < 0) fail(where, "ell must be >= 0");
  return Channel(m1, m2, ell, label);
}

inline std::vector<Sheet> sheets(const json& in, json& out, std::size_t n, const std::string& where) {
  std::vector<Sheet> s;
  if (!in.contains("sheet")) {
    s.assign(n, Sheet::I);
  } else {
    const json& v = in.at("sheet");
    if (v.is_string()) {
      s.assign(n, sheet_from_string(v.get<std::string>()));
    } else if (v.is_array()) {
      for (const auto& e : v) {
        if (!e.is_string()) fail(where, "sheet entries must be \"I\" or \"II\"");
        try {
          s.push_back(sheet_from_string(e.get<std::string>()));
        } catch (const Error& err) {
          fail(where, err.what());
        }
      }
    } else {
      fail(where, "sheet must be a string or a list");
    }
  }
  if (s.size() != n) fail(where, "sheet signature has " + std::to_string(s.size()) + " entries for " +
                                     std::to_string(n) + " channels");
  json arr = json::array();
  for (Sheet x : s) arr.push_back(std::string(to_string(x)));
  out["sheet"] = arr;
  return s;
}

inline void tolerances(const json& in, json& out, Tolerances& t) {
  const std::string w = "tolerances";
  check_keys(in, {"pole_step", "max_iters", "contour_points", "contour_radius", "rank1", "residue_agreement",
                  "sum_rule", "ls_nodes", "ls_resolution", "ls_map_scale", "cdd_flag_factor"},
             w);
  t.pole_step = number(in, out, "pole_step", w, t.pole_step);
  t.max_iters = integer(in, out, "max_iters", w, t.max_iters);
  t.contour_points = integer(in, out, "contour_points", w, t.contour_points);
  t.contour_radius = number(in, out, "contour_radius", w, t.contour_radius);
  t.rank1 = number(in, out, "rank1", w, t.rank1);
  t.residue_agreement = number(in, out, "residue_agreement", w, t.residue_agreement);
  t.sum_rule = number(in, out, "sum_rule", w, t.sum_rule);
  t.ls_nodes = static_cast<std::size_t>(integer(in, out, "ls_nodes", w, static_cast<int>(t.ls_nodes)));
  t.ls_resolution = number(in, out, "ls_resolution", w, t.ls_resolution);
  t.ls_map_scale = number(in, out, "ls_map_scale", w, t.ls_map_scale);
  t.cdd_flag_factor = number(in, out, "cdd_flag_factor", w, t.cdd_flag_factor);
  if (!(t.pole_step > 0.0) || t.max_iters < 1 || t.contour_points < 8 || t.ls_nodes < 8)
    fail(w, "tolerances out of range");
}

inline CoupledChannelModel kernel_model(const json& in, json& out, const std::vector<Channel>& chans) {
  const std::string w = "model";
  check_keys(in, {"family", "units", "form", "K", "pole_at", "coefficients", "g0", "M0", "background", "subtraction"}, w);
  block_units(in, out, w, false);
  const std::size_t n = chans.size();
  const json sub_in = in.value("subtraction", json::object());
  json sub_out = json::object();
  check_keys(sub_in, {"a", "Lambda"}, "model.subtraction");
  SubtractionScheme sc;
  sc.Lambda = number(sub_in, sub_out, "Lambda", "model.subtraction", 1000.0);
  if (sub_in.contains("a")) {
    const json& a = sub_in.at("a");
    if (a.is_number()) {
      sc.a.assign(n, as_number(a, "model.subtraction.a"));
    } else if (a.is_array()) {
      for (const auto& x : a) sc.a.push_back(as_number(x, "model.subtraction.a"));
    } else {
      fail("model.subtraction.a", "expected a number or a list");
    }
  } else {
    sc.a.assign(n, -1.0);
  }
  if (sc.a.size() != n) fail("model.subtraction", "one subtraction constant per channel is required");
  if (!(sc.Lambda > 0.0)) fail("model.subtraction", "Lambda must be positive");
  sub_out["a"] = sc.a;
  out["subtraction"] = sub_out;

  const std::string form = string(in, out, "form", w);
  auto sized = [&](const CMatrix& m, const std::string& where) {
    if (static_cast<std::size_t>(m.rows()) != n) fail(where, "matrix size does not match the channel count");
    return m;
  };
  try {
    if (form == "constant") {
      if (in.contains("pole_at") == in.contains("K")) fail(w, "constant kernel needs exactly one of 'K' or 'pole_at'");
      if (in.contains("K")) {
        const CMatrix K = sized(matrix(in.at("K"), "model.K"), "model.K");
        out["K"] = matrix_json(K);
        return {chans, sc, KernelModel::constant(K)};
      }
      // K = -1/G(s_B) puts a bound state at s_B (one channel).
      if (n != 1) fail(w, "'pole_at' is available for one channel only");
      const double sB = number(in, out, "pole_at", w);
      if (!(sB > 0.0) || !(sB < chans[0].threshold_s())) fail(w, "'pole_at' must lie between 0 and the threshold");
      CMatrix K(1, 1);
      K(0, 0) = -1.0 / loop_G(chans[0], sc.a[0], sc.Lambda, cplx{sB, 0.0}, Sheet::I);
      return {chans, sc, KernelModel::constant(K)};
    }
    if (form == "polynomial") {
      if (!in.contains("coefficients") || !in.at("coefficients").is_array())
        fail(w, "polynomial kernel needs a 'coefficients' list");
      std::vector<CMatrix> c;
      json arr = json::array();
      for (const auto& m : in.at("coefficients")) {
        c.push_back(sized(matrix(m, "model.coefficients"), "model.coefficients"));
        arr.push_back(matrix_json(c.back()));
      }
      out["coefficients"] = arr;
      return {chans, sc, KernelModel::polynomial(std::move(c))};
    }
    if (form == "bare_pole") {
      if (!in.contains("g0") || !in.at("g0").is_array()) fail(w, "bare_pole kernel needs a 'g0' list");
      CVector g0(static_cast<Eigen::Index>(in.at("g0").size()));
      json arr = json::array();
      for (std::size_t i = 0; i < in.at("g0").size(); ++i) {
        g0(static_cast<Eigen::Index>(i)) = complex_value(in.at("g0")[i], "model.g0");
        arr.push_back(complex_json(g0(static_cast<Eigen::Index>(i))));
      }
      if (static_cast<std::size_t>(g0.size()) != n) fail(w, "g0 must have one entry per channel");
      out["g0"] = arr;
      const double M0 = number(in, out, "M0", w);
      std::optional<CMatrix> B;
      if (in.contains("background")) {
        B = sized(matrix(in.at("background"), "model.background"), "model.background");
        out["background"] = matrix_json(*B);
      }
      return {chans, sc, KernelModel::bare_pole(g0, M0, B)};
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::config) throw;
    fail(w, e.what());
  }
  fail(w, "unknown kernel form '" + form + "'");
}

inline EREModel ere_model(const json& in, json& out, const Channel& ch) {
  const std::string w = "model";
  check_keys(in, {"family", "units", "a", "r", "pole_momentum"}, w);
  const bool fm = block_units(in, out, w, true) == "fm";
  EREModel m{0.0, 0.0, ch.mu(), ch.threshold_E()};
  if (in.contains("pole_momentum")) {
    if (in.contains("a") || in.contains("r")) fail(w, "give either (a, r) or 'pole_momentum', not both");
    cplx k = complex_value(in.at("pole_momentum"), "model.pole_momentum");
    if (fm) k *= hbarc;  // fm^-1 -> MeV
    out["pole_momentum"] = complex_json(k);
    try {
      const EREParameters p = ere_from_pole(k);
      m.a = p.a;
      m.r = p.r;
    } catch (const Error& e) {
      fail(w, e.what());
    }
  } else {
    const double a = number(in, out, "a", w), r = number(in, out, "r", w);
    m.a = fm ? fm_to_inv_mev(a) : a;
    m.r = fm ? fm_to_inv_mev(r) : r;
    out["a"] = m.a;
    out["r"] = m.r;
  }
  try {
    m.validate();
  } catch (const Error& e) {
    fail(w, e.what());
  }
  return m;
}

inline CDDModel cdd_model(const json& in, json& out, const Channel& ch, CDDOptions& opts) {
  const std::string w = "model";
  check_keys(in, {"family", "units", "lambda", "M_Z", "beta", "flag_momentum"}, w);
  block_units(in, out, w, false);
  CDDModel m{number(in, out, "lambda", w), number(in, out, "M_Z", w), number(in, out, "beta", w), ch.mu(),
             ch.threshold_E()};
  const double def = m.beta > 0.0 ? m.beta : std::max(std::sqrt(2.0 * m.mu * std::abs(m.M_Z)), 1.0);
  opts.flag_momentum = number(in, out, "flag_momentum", w, def);
  if (!(opts.flag_momentum > 0.0)) fail(w, "flag_momentum must be positive");
  try {
    m.validate();
  } catch (const Error& e) {
    fail(w, e.what());
  }
  return m;
}

inline FormFactor form_factor(const json& in, json& out, const std::string& where) {
  check_keys(in, {"kind", "beta", "Lambda", "ell", "coefficient"}, where);
  const std::string kind = string(in, out, "kind", where);
  const int ell = integer(in, out, "ell", where, 0);
  const double c = number(in, out, "coefficient", where, 1.0);
  try {
    if (kind == "yamaguchi") return FormFactor::yamaguchi(number(in, out, "beta", where), ell, c);
    if (kind == "gaussian") return FormFactor::gaussian(number(in, out, "Lambda", where), ell, c);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::config) throw;
    fail(where, e.what());
  }
  fail(where, "unknown form factor kind '" + kind + "'");
}

inline Potential potential(const json& in, json& out, const Channel& ch, const std::filesystem::path& base,
                           BoundStateOptions& bs, const Tolerances& tol) {
  const std::string w = "model";
  check_keys(in, {"family", "units", "potential", "bound_search"}, w);
  block_units(in, out, w, false);
  if (!in.contains("potential")) fail(w, "missing 'potential'");
  const json& pin = in.at("potential");
  json pout = json::object();
  const std::string pw = "model.potential";
  check_keys(pin, {"type", "lambda", "binding_momentum", "form_factors", "waves", "csv", "wave", "map_scale"}, pw);
  const std::string type = string(pin, pout, "type", pw);
  const double mu = ch.mu();
  Potential p = [&]() -> Potential {
    try {
      if (type == "separable") {
        if (!pin.contains("form_factors") || !pin.at("form_factors").is_array() || pin.at("form_factors").empty())
          fail(pw, "separable potential needs a non-empty 'form_factors' list");
        std::vector<FormFactor> ff;
        json arr = json::array();
        for (std::size_t i = 0; i < pin.at("form_factors").size(); ++i) {
          json fo = json::object();
          ff.push_back(form_factor(pin.at("form_factors")[i], fo, pw + ".form_factors[" + std::to_string(i) + "]"));
          arr.push_back(fo);
        }
        pout["form_factors"] = arr;
        std::vector<std::string> waves;
        if (pin.contains("waves")) waves = pin.at("waves").get<std::vector<std::string>>();
        if (pin.contains("lambda") == pin.contains("binding_momentum"))
          fail(pw, "give exactly one of 'lambda' or 'binding_momentum'");
        double lambda;
        if (pin.contains("lambda")) {
          lambda = number(pin, pout, "lambda", pw);
        } else {
          // Strength that binds at E = -kappa^2/2mu: 1 = lambda I(E).
          const double kappa = number(pin, pout, "binding_momentum", pw);
          if (!(kappa > 0.0)) fail(pw, "binding_momentum must be positive");
          const Potential unit = Potential::separable(1.0, mu, ff, waves);
          lambda = 1.0 / loop_integral(unit, cplx{-kappa * kappa / (2.0 * mu), 0.0}, Sheet::I).total.real();
        }
        Potential sp = Potential::separable(lambda, mu, ff, waves);
        pout["waves"] = sp.waves();
        return sp;
      }
      if (type == "tabulated") {
        std::filesystem::path csv = string(pin, pout, "csv", pw);
        if (csv.is_relative()) csv = base / csv;
        csv = std::filesystem::weakly_canonical(csv);
        pout["csv"] = csv.string();
        const std::string wave = string(pin, pout, "wave", pw, std::string("1S0"));
        const double c = number(pin, pout, "map_scale", pw, 600.0);
        return Potential::tabulated(mu, read_kernel_csv(csv.string()), wave, c);
      }
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::config) throw;
      fail(pw, e.what());
    }
    fail(pw, "unknown potential type '" + type + "'");
  }();
  p.threshold = ch.threshold_E();
  out["potential"] = pout;

  const json bin = in.value("bound_search", json::object());
  json bout = json::object();
  check_keys(bin, {"E_min", "E_max", "scan_points"}, "model.bound_search");
  const double c = tol.ls_map_scale > 0.0 ? tol.ls_map_scale : p.map_scale();
  bs.E_min = number(bin, bout, "E_min", "model.bound_search", -20.0 * c * c / (2.0 * mu));
  bs.E_max = number(bin, bout, "E_max", "model.bound_search", -1e-8 * c * c / (2.0 * mu));
  bs.scan_points = integer(bin, bout, "scan_points", "model.bound_search", 80);
  if (!(bs.E_min < bs.E_max) || !(bs.E_max < 0.0)) fail("model.bound_search", "need E_min < E_max < 0");
  bs.grid.n_nodes = tol.ls_nodes;
  bs.grid.map_scale = tol.ls_map_scale;
  bs.grid.resolution_tol = tol.ls_resolution;
  out["bound_search"] = bout;
  return p;
}

inline SaturationConfig saturation(const json& in, json& out) {
  const std::string w = "saturation";
  check_keys(in, {"units", "M_R", "Gamma", "k_R_abs", "mu", "M_th", "channel1", "channel2_momentum", "X_total",
                  "branching_ratio", "epsilon", "W_max"},
             w);
  block_units(in, out, w, false);
  SaturationConfig c;
  auto& s = c.system;
  s.M_R = number(in, out, "M_R", w);
  s.Gamma = number(in, out, "Gamma", w);
  s.mu = number(in, out, "mu", w);
  s.M_th = number(in, out, "M_th", w);
  if (in.contains("k_R_abs")) {
    s.k_R_abs = number(in, out, "k_R_abs", w);
  } else {
    c.k_R_from_pole = true;
  }
  auto momentum = [&](const json& j, json& o, const std::string& where) {
    check_keys(j, {"m1", "m2", "form"}, where);
    const double m1 = number(j, o, "m1", where), m2 = number(j, o, "m2", where);
    const std::string form = string(j, o, "form", where, std::string("nonrelativistic"));
    if (!(m1 > 0.0) || !(m2 > 0.0)) fail(where, "masses must be positive");
    if (form == "nonrelativistic") return MomentumFunction::nonrelativistic(m1, m2);
    if (form == "relativistic") return MomentumFunction::relativistic(m1, m2);
    fail(where, "form must be \"nonrelativistic\" or \"relativistic\"");
  };
  if (!in.contains("channel1")) fail(w, "missing 'channel1'");
  json c1 = json::object();
  s.k = momentum(in.at("channel1"), c1, "saturation.channel1");
  out["channel1"] = c1;
  if (in.contains("channel2_momentum")) {
    json c2 = json::object();
    s.k2 = momentum(in.at("channel2_momentum"), c2, "saturation.channel2_momentum");
    out["channel2_momentum"] = c2;
  }
  if (in.contains("X_total")) s.X_total = number(in, out, "X_total", w);
  if (in.contains("branching_ratio")) s.branching_ratio = number(in, out, "branching_ratio", w);
  s.epsilon = number(in, out, "epsilon", w, 0.05);
  if (in.contains("W_max")) s.W_max = number(in, out, "W_max", w);
  try {
    SaturationSystem probe = s;
    if (c.k_R_from_pole) probe.k_R_abs = 1.0;
    probe.validate();
  } catch (const Error& e) {
    fail(w, e.what());
  }
  return c;
}

}  // namespace config_detail

inline const std::vector<std::string>& known_analyses() {
  static const std::vector<std::string> names = {"sum_rule", "ere", "cdd", "lseq", "saturation", "phase_shifts"};
  return names;
}

/// Parses and validates a configuration document. Relative file paths are
/// taken relative to `base_dir`. Throws Error(ErrorKind::config) on any problem.
inline AnalysisConfig parse_config_unchecked(const json& in, const std::filesystem::path& base_dir) {
  using namespace config_detail;
  AnalysisConfig cfg;
  json out = json::object();
  check_keys(in, {"schema_version", "name", "kinematics", "channels", "model", "poles", "analyses", "phase_shifts",
                  "ere_scan", "saturation", "reference", "tolerances", "output"},
             "config");
  cfg.schema_version = integer(in, out, "schema_version", "config", std::nullopt);
  if (cfg.schema_version != config_schema_version)
    fail("config", "unsupported schema_version " + std::to_string(cfg.schema_version));
  cfg.name = string(in, out, "name", "config", std::string("analysis"));
  try {
    cfg.kinematics = kinematics_from_string(string(in, out, "kinematics", "config"));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::config) throw;
    fail("config.kinematics", e.what());
  }

  json tol_out = json::object();
  tolerances(in.value("tolerances", json::object()), tol_out, cfg.tol);
  out["tolerances"] = tol_out;

  if (!in.contains("channels") || !in.at("channels").is_array() || in.at("channels").empty())
    fail("config", "need a non-empty 'channels' list");
  json chans = json::array();
  for (std::size_t i = 0; i < in.at("channels").size(); ++i) {
    json co = json::object();
    cfg.channels.push_back(channel(in.at("channels")[i], co, "channels[" + std::to_string(i) + "]"));
    chans.push_back(co);
  }
  out["channels"] = chans;
  const std::size_t n = cfg.channels.size();

  if (!in.contains("model")) fail("config", "missing 'model'");
  const json& min = in.at("model");
  json mout = json::object();
  if (!min.is_object() || !min.contains("family")) fail("model", "missing 'family'");
  const std::string family = string(min, mout, "family", "model");
  if (family == "kernel") {
    cfg.family = ModelFamily::kernel;
    if (cfg.kinematics != Kinematics::relativistic)
      fail("model", "kernel models use relativistic kinematics; mixing modes is not allowed");
    cfg.model = kernel_model(min, mout, cfg.channels);
  } else if (family == "ere" || family == "cdd" || family == "lseq") {
    if (cfg.kinematics != Kinematics::nonrelativistic)
      fail("model", "model family '" + family + "' uses nonrelativistic kinematics; mixing modes is not allowed");
    if (n != 1) fail("model", "model family '" + family + "' has exactly one channel");
    if (family == "ere") {
      cfg.family = ModelFamily::ere;
      cfg.model = ere_model(min, mout, cfg.channels[0]);
    } else if (family == "cdd") {
      cfg.family = ModelFamily::cdd;
      cfg.model = cdd_model(min, mout, cfg.channels[0], cfg.cdd);
    } else {
      cfg.family = ModelFamily::lseq;
      cfg.model = potential(min, mout, cfg.channels[0], base_dir, cfg.bound_search, cfg.tol);
    }
  } else {
    fail("model", "unknown model family '" + family + "'");
  }
  out["model"] = mout;

  json poles = json::array();
  if (in.contains("poles")) {
    if (!in.at("poles").is_array()) fail("poles", "expected a list");
    for (std::size_t i = 0; i < in.at("poles").size(); ++i) {
      const std::string w = "poles[" + std::to_string(i) + "]";
      const json& pj = in.at("poles")[i];
      check_keys(pj, {"label", "sheet", "start", "start_sqrt_s", "start_momentum"}, w);
      json po = json::object();
      PoleJob job;
      job.label = string(pj, po, "label", w, "pole" + std::to_string(i));
      const std::size_t n_sheets = cfg.family == ModelFamily::kernel ? n : 1;
      job.sheets = sheets(pj, po, n_sheets, w);
      const int given = pj.contains("start") + pj.contains("start_sqrt_s") + pj.contains("start_momentum");
      if (given != 1) fail(w, "give exactly one of 'start', 'start_sqrt_s', 'start_momentum'");
      if (pj.contains("start")) {
        job.start = complex_value(pj.at("start"), w + ".start");
      } else if (pj.contains("start_sqrt_s")) {
        if (cfg.kinematics != Kinematics::relativistic) fail(w, "'start_sqrt_s' needs relativistic kinematics");
        const cplx m = complex_value(pj.at("start_sqrt_s"), w + ".start_sqrt_s");
        job.start = m * m;
      } else {
        if (cfg.kinematics != Kinematics::nonrelativistic) fail(w, "'start_momentum' needs nonrelativistic kinematics");
        const cplx k = complex_value(pj.at("start_momentum"), w + ".start_momentum");
        job.start = k * k / (2.0 * cfg.channels[0].mu());
      }
      po["start"] = complex_json(job.start);
      for (const auto& other : cfg.poles)
        if (other.label == job.label) fail(w, "duplicate pole label '" + job.label + "'");
      cfg.poles.push_back(job);
      poles.push_back(po);
    }
  }
  out["poles"] = poles;

  const json an = in.value("analyses", json::array({"sum_rule"}));
  if (!an.is_array()) fail("analyses", "expected a list");
  for (const auto& a : an) {
    if (!a.is_string()) fail("analyses", "entries must be strings");
    const auto s = a.get<std::string>();
    if (std::find(known_analyses().begin(), known_analyses().end(), s) == known_analyses().end())
      fail("analyses", "unknown analysis '" + s + "'");
    if (!cfg.wants(s)) cfg.analyses.push_back(s);
  }
  out["analyses"] = cfg.analyses;
  if (cfg.wants("cdd") && cfg.family != ModelFamily::cdd) fail("analyses", "'cdd' needs a cdd model");
  if (cfg.wants("lseq") && cfg.family != ModelFamily::lseq) fail("analyses", "'lseq' needs an lseq model");
  if (cfg.wants("ere") && cfg.kinematics != Kinematics::nonrelativistic)
    fail("analyses", "'ere' needs nonrelativistic kinematics");

  if (in.contains("phase_shifts")) {
    json g = json::object();
    cfg.phase_grid = grid(in.at("phase_shifts"), g, "phase_shifts");
    out["phase_shifts"] = g;
  }
  if (cfg.wants("phase_shifts") && !cfg.phase_grid) fail("analyses", "'phase_shifts' needs a 'phase_shifts' grid");
  if (in.contains("ere_scan")) {
    json g = json::object();
    cfg.ere_grid = grid(in.at("ere_scan"), g, "ere_scan");
    out["ere_scan"] = g;
  }
  if (in.contains("saturation")) {
    json s = json::object();
    cfg.saturation = saturation(in.at("saturation"), s);
    out["saturation"] = s;
  }
  if (cfg.wants("saturation") && !cfg.saturation) fail("analyses", "'saturation' needs a 'saturation' block");
  if (cfg.saturation && cfg.saturation->k_R_from_pole) {
    if (cfg.kinematics != Kinematics::nonrelativistic || cfg.poles.empty())
      fail("saturation", "without 'k_R_abs' the momentum comes from the first pole of a nonrelativistic model");
  }
  if (in.contains("reference")) {
    const json& r = in.at("reference");
    json ro = json::object();
    check_keys(r, {"label", "X_min", "X_max"}, "reference");
    cfg.reference = ReferenceBand{string(r, ro, "label", "reference", std::string{}),
                                  number(r, ro, "X_min", "reference"), number(r, ro, "X_max", "reference")};
    out["reference"] = ro;
  }
  const json o = in.value("output", json::object());
  check_keys(o, {"directory"}, "output");
  json oo = json::object();
  cfg.output_dir = string(o, oo, "directory", "output", std::string("out"));
  out["output"] = oo;

  const bool any = !cfg.poles.empty() || cfg.wants("lseq") || cfg.wants("cdd") || cfg.wants("saturation") ||
                   cfg.wants("phase_shifts") || (cfg.wants("ere") && cfg.ere_grid);
  if (!any) fail("config", "nothing to do: no poles and no standalone analyses");
  cfg.resolved = out;
  return cfg;
}

inline AnalysisConfig parse_config(const json& in, const std::filesystem::path& base_dir = ".") {
  try {
    return parse_config_unchecked(in, base_dir);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::config, std::string("bad value type: ") + e.what());
  }
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::config, "cannot open config '" + path.string() + "'");
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::config, "malformed JSON in '" + path.string() + "': " + e.what());
  }
}

inline AnalysisConfig load_config(const std::filesystem::path& path) {
  const json j = read_json_file(path);
  return parse_config(j, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

}  // namespace hadcomp
