// hadcomp: pole and compositeness analyses from a JSON config.
//
//   hadcomp analyze <config.json> [--out DIR] [--jobs N]
//   hadcomp scan <config.json> --quantity Q --grid RE0:RE1:N[,IM0:IM1:M] [--sheet S...] [--out FILE]
//
// Exit codes: 0 success, 2 validation error, 3 every job failed.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "hadcomp/analysis.hpp"
#include "hadcomp/config.hpp"

namespace fs = std::filesystem;
using namespace hadcomp;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_validation = 2;
constexpr int exit_all_failed = 3;

// Write to a sibling temp file and rename, so readers never see half a file.
void write_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f << content;
  }
  fs::rename(tmp, path);
}

std::string file_id(std::string id) {
  for (char& c : id)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
  return id;
}

int analyze(const std::string& config_path, const std::string& out_opt, unsigned jobs) {
  AnalysisConfig cfg = load_config(config_path);
  fs::path out = out_opt;
  if (out_opt.empty()) {
    out = cfg.output_dir;
    if (out.is_relative()) out = fs::path(config_path).parent_path() / out;
  } else {
    cfg.resolved["output"]["directory"] = out_opt;
  }
  fs::create_directories(out / "jobs");

  const AnalysisRun run = run_analysis(cfg, jobs, [&](const JobOutcome& j) {
    write_atomic(out / "jobs" / (file_id(j.id) + ".json"), job_json(j).dump(2) + "\n");
  });
  for (const auto& j : run.jobs)
    if (j.ok && !j.csv_name.empty()) write_atomic(out / j.csv_name, j.csv);
  write_atomic(out / "resolved_config.json", cfg.resolved.dump(2) + "\n");
  write_atomic(out / "report.json", build_report(cfg, run).dump(2) + "\n");
  write_atomic(out / "report.txt", report_text(cfg, run));
  write_atomic(out / "summary.json", summary_json(cfg, run).dump(2) + "\n");

  std::cout << report_text(cfg, run);
  std::cout << "artifacts written to " << out.string() << "\n";
  return run.exit_code() == 0 ? exit_ok : exit_all_failed;
}

struct Axis {
  double from = 0.0, to = 0.0;
  int n = 1;
  std::vector<double> values() const { return GridSpec{from, to, n}.values(); }
};

Axis parse_axis(const std::string& text) {
  Axis a;
  char c1 = 0, c2 = 0;
  std::istringstream is(text);
  if (!(is >> a.from >> c1 >> a.to >> c2 >> a.n) || c1 != ':' || c2 != ':' || a.n < 1 || !is.eof())
    throw Error(ErrorKind::config, "grid axis '" + text + "' is not FROM:TO:N");
  return a;
}

struct ScanTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> notes;
};

/// Values of `quantity` at z on the given sheets. Empty when the model has no such quantity.
std::vector<double> scan_values(const AnalysisConfig& cfg, const std::string& q, cplx z, const std::vector<Sheet>& sh,
                                bool regularized) {
  const SheetedPoint p{z, sh, Prescription::above};
  std::vector<double> v;
  switch (cfg.family) {
    case ModelFamily::kernel: {
      const auto& m = cfg.kernel_model();
      if (q == "abs_T") {
        const CMatrix T = m.T(p);
        for (Eigen::Index i = 0; i < T.rows(); ++i)
          for (Eigen::Index j = i; j < T.cols(); ++j) v.push_back(std::abs(T(i, j)));
      } else if (q == "im_G") {
        const CVector G = m.G(p);
        for (Eigen::Index i = 0; i < G.size(); ++i) v.push_back(G(i).imag());
      } else if (regularized) {
        v.push_back(std::abs(m.pole_function(p)));
      } else {
        // det T^-1 = det(c + K~ G) / det(K~)
        v.push_back(std::abs(determinant(m.scaled_denominator(p)) / determinant(m.kernel.scaled_K(z))));
      }
      break;
    }
    case ModelFamily::ere:
    case ModelFamily::cdd: {
      const bool ere = cfg.family == ModelFamily::ere;
      const cplx k = ere ? cfg.ere_model().momentum(p) : cfg.cdd_model().momentum(p);
      if (q == "abs_T") v.push_back(std::abs(ere ? cfg.ere_model().t(p) : cfg.cdd_model().t(p)));
      else if (q == "im_G") v.push_back(nr_loop_G(k).imag());
      else if (ere) v.push_back(std::abs(cfg.ere_model().pole_function(p)));
      else v.push_back(std::abs(cfg.cdd_model().pole_function(p) / (z - cfg.cdd_model().M_Z)));
      break;
    }
    case ModelFamily::lseq: {
      const Potential& pot = cfg.potential();
      if (!pot.is_separable())
        throw Error(ErrorKind::continuation_blocked, "complex-plane scans need a separable potential");
      const cplx I = loop_integral(pot, z, sh.front()).total;
      if (q == "abs_T") v.push_back(std::abs(separable_tau(pot, z, sh.front())));
      else if (q == "im_G") v.push_back(I.imag());
      else v.push_back(std::abs((1.0 - pot.lambda() * I) / pot.lambda()));
      break;
    }
  }
  return v;
}

/// A kernel of less than full rank has no T^-1; landscapes then show the
/// regularized pole function, which vanishes at the same points.
bool kernel_rank_deficient(const AnalysisConfig& cfg, cplx z) {
  if (cfg.family != ModelFamily::kernel) return false;
  const CMatrix K = cfg.kernel_model().kernel.scaled_K(z);
  const double scale = std::pow(K.cwiseAbs().maxCoeff(), static_cast<double>(K.rows()));
  return std::abs(determinant(K)) <= 1e-12 * scale;
}

std::vector<std::string> scan_columns(const AnalysisConfig& cfg, const std::string& q, bool regularized) {
  std::vector<std::string> c;
  const std::size_t n = cfg.family == ModelFamily::kernel ? cfg.channels.size() : 1;
  if (q == "abs_T") {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) c.push_back("abs_T_" + std::to_string(i + 1) + std::to_string(j + 1));
  } else if (q == "im_G") {
    for (std::size_t i = 0; i < n; ++i) c.push_back("im_G_" + std::to_string(i + 1));
  } else {
    c.push_back(regularized ? "abs_pole_function" : "abs_det_Tinv");
  }
  return c;
}

int scan(const std::string& config_path, const std::string& quantity, const std::string& grid,
         const std::vector<std::string>& sheet_opt, const std::string& out_file) {
  const AnalysisConfig cfg = load_config(config_path);
  static const std::vector<std::string> quantities = {"phase_shift", "abs_T", "im_G", "det_landscape"};
  if (std::find(quantities.begin(), quantities.end(), quantity) == quantities.end())
    throw Error(ErrorKind::config, "unknown scan quantity '" + quantity + "'");
  const auto comma = grid.find(',');
  const Axis re = parse_axis(grid.substr(0, comma));
  const Axis im = comma == std::string::npos ? Axis{0.0, 0.0, 1} : parse_axis(grid.substr(comma + 1));
  const bool relativistic = cfg.kinematics == Kinematics::relativistic;
  const std::string var = relativistic ? "s" : "E";
  std::ostringstream csv;
  csv.precision(12);

  if (quantity == "phase_shift") {
    if (comma != std::string::npos) throw Error(ErrorKind::config, "phase_shift scans take a real grid only");
    AnalysisConfig c = cfg;
    c.phase_grid = GridSpec{re.from, re.to, re.n};
    JobOutcome o;
    analysis_detail::phase_shift_job(c, o);
    csv << o.csv;
  } else {
    const std::size_t n_sheets = cfg.family == ModelFamily::kernel ? cfg.channels.size() : 1;
    std::vector<Sheet> sh;
    for (const auto& s : sheet_opt) sh.push_back(sheet_from_string(s));
    if (sh.empty()) sh.assign(n_sheets, Sheet::I);
    if (sh.size() == 1 && n_sheets > 1) sh.assign(n_sheets, sh.front());
    if (sh.size() != n_sheets) throw Error(ErrorKind::config, "sheet signature does not match the channel count");
    const bool regularized = quantity == "det_landscape" && kernel_rank_deficient(cfg, cplx{re.from, im.from});
    const auto cols = scan_columns(cfg, quantity, regularized);
    ScanTable t;
    std::size_t failed = 0;
    std::string first_error;
    for (double y : im.values()) {
      for (double x : re.values()) {
        std::vector<double> row = {x, y};
        std::vector<double> v;
        try {
          v = scan_values(cfg, quantity, cplx{x, y}, sh, regularized);
        } catch (const Error& e) {
          if (e.kind() == ErrorKind::config) throw;
          if (first_error.empty()) first_error = e.what();
          ++failed;
        }
        if (v.size() != cols.size()) v.assign(cols.size(), std::numeric_limits<double>::quiet_NaN());
        row.insert(row.end(), v.begin(), v.end());
        t.rows.push_back(row);
      }
    }
    csv << "# quantity: " << quantity << "; variable: " << var << (relativistic ? " (MeV^2)" : " (MeV)")
        << "; sheet: " << analysis_detail::sheet_text(sh) << "\n";
    if (regularized)
      csv << "# note: the kernel is rank deficient so T^-1 does not exist; abs_pole_function is |det(1 + K G)|"
             " (times |M0^2 - s| for a bare pole), zero at the poles of T\n";
    if (failed > 0)
      csv << "# note: " << failed << " point(s) on a cut, branch point or pole are NaN; first: " << first_error << "\n";
    csv << "re_" << var << ",im_" << var;
    for (const auto& c : cols) csv << "," << c;
    csv << "\n";
    for (const auto& row : t.rows) {
      for (std::size_t i = 0; i < row.size(); ++i) csv << (i ? "," : "") << row[i];
      csv << "\n";
    }
  }
  if (out_file.empty()) {
    std::cout << csv.str();
  } else {
    const fs::path p = out_file;
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    write_atomic(p, csv.str());
  }
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pole, residue and compositeness analyses of two-body scattering amplitudes"};
  app.require_subcommand(1);

  std::string config, out;
  unsigned jobs = 1;
  auto* an = app.add_subcommand("analyze", "Run every job in a config and write the report");
  an->add_option("config", config, "Config file (JSON)")->required();
  an->add_option("--out", out, "Output directory (default: the config's output.directory)");
  an->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

  std::string quantity, grid, scan_out;
  std::vector<std::string> sheets;
  auto* sc = app.add_subcommand("scan", "Tabulate a quantity on a grid as CSV");
  sc->add_option("config", config, "Config file (JSON)")->required();
  sc->add_option("--quantity", quantity, "phase_shift | abs_T | im_G | det_landscape")->required();
  sc->add_option("--grid", grid, "RE0:RE1:N[,IM0:IM1:M] in s (MeV^2) or E (MeV)")->required();
  sc->add_option("--sheet", sheets, "Sheet per channel (I or II); one value applies to all");
  sc->add_option("--out", scan_out, "CSV file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_validation;
  }

  try {
    if (*an) return analyze(config, out, jobs);
    return scan(config, quantity, grid, sheets, scan_out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::config ? exit_validation : exit_all_failed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_all_failed;
  }
}
