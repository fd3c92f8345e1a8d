// Scenario execution: co-simulation, excitation report, file emission and
// the manifest describing what was written.
#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <tomlplusplus/toml.hpp>

#include "drex/excitation.hpp"
#include "drex/scenario.hpp"
#include "drex/simulation.hpp"

namespace drex {

struct EmittedFile {
  std::filesystem::path path;
  /// Data rows: CSV lines after the header, or all lines for other files.
  std::size_t rows = 0;
};

struct RunManifest {
  std::string scenario_name;
  std::uint64_t scenario_hash = 0;
  std::string tool_version = kVersion;
  double t0 = 0.0, t_end = 0.0, dt = 0.0;
  double wall_clock_seconds = 0.0;
  std::vector<EmittedFile> files;
  std::filesystem::path manifest_path;
};

struct ScenarioRun {
  Scenario scenario;
  SimulationResult simulation;
  ExcitationReport report;
  RunManifest manifest;
};

inline std::string hash_hex(std::uint64_t h) {
  std::ostringstream ss;
  ss << std::hex;
  ss.width(16);
  ss.fill('0');
  ss << h;
  return ss.str();
}

inline toml::table report_to_toml(const ExcitationReport& r) {
  toml::table root;
  if (r.pe) {
    root.insert("pe", toml::table{{"is_pe", r.pe->is_pe},
                                  {"T", r.pe->T},
                                  {"delta", r.pe->delta},
                                  {"stride", r.pe->stride},
                                  {"windows", static_cast<int64_t>(r.pe->windows.size())},
                                  {"certificate", "sampled"}});
  }
  if (r.ie)
    root.insert("ie", toml::table{{"is_ie", r.ie->is_ie}, {"t0", r.ie->t0}, {"tc", r.ie->tc}, {"mu", r.ie->mu}});
  toml::array gpe;
  for (const auto& i : r.generalized_pe)
    gpe.push_back(toml::table{{"tau_start", i.tau_start}, {"tau_end", i.tau_end}, {"delta", i.delta}});
  if (!r.generalized_pe.empty()) root.insert("generalized_pe", std::move(gpe));
  if (r.delta_n) {
    toml::table d{{"rho", r.delta_n->rho}, {"l2_integral", r.delta_n->l2_integral}};
    d.insert("t_star_found", r.delta_n->t_star.has_value());
    if (r.delta_n->t_star) d.insert("t_star", *r.delta_n->t_star);
    root.insert("delta_n", std::move(d));
  }
  return root;
}

inline void write_report(std::ostream& os, const ExcitationReport& r) { os << report_to_toml(r) << '\n'; }

/// CSV: t_start,t_end,min_eig
inline std::size_t write_windows_csv(std::ostream& os, const std::vector<GramWindow>& windows) {
  os << "t_start,t_end,min_eig\n";
  for (const auto& w : windows)
    os << format_double(w.t_start) << ',' << format_double(w.t_end) << ',' << format_double(w.min_eig) << '\n';
  return windows.size();
}

/// Two-column plot data.
inline std::size_t write_series_csv(std::ostream& os, std::string_view column, const std::vector<double>& times,
                                    const std::vector<double>& values) {
  os << "t," << column << '\n';
  for (std::size_t k = 0; k < times.size(); ++k) os << format_double(times[k]) << ',' << format_double(values[k]) << '\n';
  return times.size();
}

namespace detail {

class FileSink {
 public:
  explicit FileSink(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

  /// `writer(os)` returns the number of data rows written.
  template <class Writer>
  void emit(const std::string& name, Writer&& writer) {
    const auto path = dir_ / name;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ValidationError("cannot write '" + path.string() + "'");
    const std::size_t rows = writer(os);
    os.close();
    if (!os) throw ValidationError("failed writing '" + path.string() + "'");
    files_.push_back({path, rows});
  }

  std::vector<EmittedFile>& files() { return files_; }
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::vector<EmittedFile> files_;
};

inline std::size_t count_lines(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

inline std::string gnuplot_script(const std::string& title, const std::vector<std::string>& csv_files) {
  std::ostringstream ss;
  ss << "set datafile separator ','\nset key autotitle columnhead\nset xlabel 't [s]'\nset title '" << title
     << "'\nplot ";
  for (std::size_t i = 0; i < csv_files.size(); ++i)
    ss << (i ? ", \\\n     " : "") << "'" << csv_files[i] << "' using 1:2 with lines";
  ss << '\n';
  return ss.str();
}

inline void write_manifest(FileSink& sink, RunManifest& m, const std::string& stem) {
  m.manifest_path = sink.dir() / (stem + "_manifest.toml");
  toml::array files;
  for (const auto& f : m.files)
    files.push_back(toml::table{{"path", f.path.filename().string()}, {"rows", static_cast<int64_t>(f.rows)}});
  toml::table root{{"scenario", m.scenario_name},
                   {"scenario_hash", hash_hex(m.scenario_hash)},
                   {"tool_version", m.tool_version},
                   {"wall_clock_seconds", m.wall_clock_seconds}};
  root.insert("grid", toml::table{{"t0", m.t0}, {"t_end", m.t_end}, {"dt", m.dt}});
  root.insert("files", std::move(files));
  std::ofstream os(m.manifest_path, std::ios::binary);
  os << root << '\n';
  if (!os) throw ValidationError("failed writing manifest '" + m.manifest_path.string() + "'");
}

}  // namespace detail

inline ExcitationReport build_report(const Scenario& s, const SimulationResult& sim) {
  ExcitationReport r;
  const auto& a = s.analyses;
  if (a.pe_window) r.pe = check_pe(s.regressor, *a.pe_window, s.grid.t_end(), a.pe_stride, a.quad_dt);
  if (a.ie_window) r.ie = check_ie(s.regressor, a.ie_window->first, a.ie_window->second, a.quad_dt);
  if (a.generalized_pe)
    r.generalized_pe = generalized_pe_intervals(s.regressor, s.grid.t_end(), a.generalized_pe_resolution, a.quad_dt);
  r.delta_n = analyze_delta_n(sim.times, sim.delta_trace(), a.positivity_floor);
  return r;
}

/// Runs the scenario and writes every output into scenario.output.dir.
/// `extra(sink, run)` may emit further files before the manifest is written.
template <class Extra>
ScenarioRun execute_scenario(const Scenario& s, Extra&& extra) {
  const auto started = std::chrono::steady_clock::now();
  ScenarioRun run{s, simulate(s.simulation_setup()), {}, {}};
  run.report = build_report(s, run.simulation);

  detail::FileSink sink(s.output.dir);
  const std::string& stem = s.output.stem;
  const auto& sim = run.simulation;

  sink.emit(stem + "_elre.csv", [&](std::ostream& os) { return write_elre_csv(os, sim.elre); });
  sink.emit(stem + "_delta.csv",
            [&](std::ostream& os) { return write_series_csv(os, "delta", sim.times, sim.delta_trace()); });
  for (const auto& trace : sim.estimators)
    sink.emit(stem + "_" + trace.spec.label + "_errors.csv",
              [&](std::ostream& os) { return write_error_csv(os, sim.times, trace); });
  if (run.report.pe)
    sink.emit(stem + "_pe_windows.csv", [&](std::ostream& os) { return write_windows_csv(os, run.report.pe->windows); });
  sink.emit(stem + "_excitation.toml", [&](std::ostream& os) {
    std::ostringstream ss;
    write_report(ss, run.report);
    os << ss.str();
    return detail::count_lines(ss.str());
  });
  if (s.output.plot_script)
    sink.emit(stem + ".gp", [&](std::ostream& os) {
      const std::string script = detail::gnuplot_script(s.name + ": delta", {stem + "_delta.csv"});
      os << script;
      return detail::count_lines(script);
    });
  extra(sink, run);

  run.manifest.scenario_name = s.name;
  run.manifest.scenario_hash = scenario_hash(s);
  run.manifest.t0 = s.grid.t0();
  run.manifest.t_end = s.grid.t_end();
  run.manifest.dt = s.grid.dt();
  run.manifest.files = sink.files();
  run.manifest.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  detail::write_manifest(sink, run.manifest, stem);
  return run;
}

inline ScenarioRun execute_scenario(const Scenario& s) {
  return execute_scenario(s, [](detail::FileSink&, const ScenarioRun&) {});
}

inline RunManifest run_scenario(const Scenario& s) { return execute_scenario(s).manifest; }

enum class Figure { fig1 = 1, fig2, fig3, fig4, fig5 };

inline Figure parse_figure(std::string_view id) {
  if (id == "fig1") return Figure::fig1;
  if (id == "fig2") return Figure::fig2;
  if (id == "fig3") return Figure::fig3;
  if (id == "fig4") return Figure::fig4;
  if (id == "fig5") return Figure::fig5;
  throw ValidationError("unknown figure '" + std::string(id) + "' (expected fig1..fig5)");
}

/// Built-in scenario behind each figure: 1-2 PE, 3-4 IE with gain 0.2, 5 IE with gain 0.35.
inline std::string_view figure_scenario(Figure f) {
  switch (f) {
    case Figure::fig1:
    case Figure::fig2: return "fig1_pe";
    case Figure::fig3:
    case Figure::fig4: return "fig3_ie";
    case Figure::fig5: return "fig5_ie";
  }
  return "fig1_pe";
}

/// Runs the figure's scenario and adds figN_*.csv plot data plus figN.gp.
inline ScenarioRun reproduce(Figure fig, const ScenarioOverrides& overrides = {}) {
  const Scenario s = apply_overrides(builtin_scenario(figure_scenario(fig)), overrides);
  const std::string id = "fig" + std::to_string(static_cast<int>(fig));
  const bool delta_figure = fig == Figure::fig1 || fig == Figure::fig3;

  return execute_scenario(s, [&](detail::FileSink& sink, const ScenarioRun& run) {
    const auto& sim = run.simulation;
    std::vector<std::string> names;
    if (delta_figure) {
      names.push_back(id + "_delta_n.csv");
      sink.emit(names.back(),
                [&](std::ostream& os) { return write_series_csv(os, "delta_n", sim.times, sim.delta_trace()); });
    } else {
      const EstimatorTrace* drem_trace = nullptr;
      for (const auto& t : sim.estimators)
        if (t.spec.kind == EstimatorKind::drem) drem_trace = &t;
      if (!drem_trace) throw ValidationError("figure scenario has no DREM estimator");
      const Eigen::Index q = s.theta.dimension();
      for (Eigen::Index i = 0; i < q; ++i) {
        std::vector<double> err(sim.times.size());
        for (std::size_t k = 0; k < err.size(); ++k) err[k] = drem_trace->error[k][i];
        names.push_back(id + "_error_" + std::to_string(i + 1) + ".csv");
        sink.emit(names.back(), [&](std::ostream& os) {
          return write_series_csv(os, "error_" + std::to_string(i + 1), sim.times, err);
        });
      }
    }
    sink.emit(id + ".gp", [&](std::ostream& os) {
      const std::string script = detail::gnuplot_script(id, names);
      os << script;
      return detail::count_lines(script);
    });
  });
}

}  // namespace drex
