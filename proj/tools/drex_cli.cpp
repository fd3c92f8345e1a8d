// drex: command-line front end for scenario runs, figure reproduction,
// regressor excitation analysis and pole sweeps.
//
// Exit codes: 0 success, 1 validation error, 2 numerical failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "drex/drem.hpp"

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitNumerical = 2;

void print_manifest(const drex::RunManifest& m) {
  std::cout << "scenario " << m.scenario_name << " (hash " << drex::hash_hex(m.scenario_hash) << ") finished in "
            << m.wall_clock_seconds << " s\n";
  for (const auto& f : m.files) std::cout << "  " << f.path.string() << " (" << f.rows << " rows)\n";
  std::cout << "  " << m.manifest_path.string() << '\n';
}

void print_delta_summary(const drex::ScenarioRun& run) {
  const auto& d = *run.report.delta_n;
  if (d.t_star)
    std::cout << "delta_n: t_star = " << *d.t_star << ", rho = " << d.rho << ", int delta^2 = " << d.l2_integral
              << '\n';
  else
    std::cout << "delta_n: no t_star on the horizon, int delta^2 = " << d.l2_integral << '\n';
  for (const auto& t : run.simulation.estimators)
    std::cout << t.spec.label << ": final |error| = " << t.error.back().norm() << '\n';
}

std::pair<double, double> parse_pair(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw drex::ValidationError("expected 't0,tc', got '" + text + "'");
  try {
    return {std::stod(text.substr(0, comma)), std::stod(text.substr(comma + 1))};
  } catch (const std::exception&) {
    throw drex::ValidationError("expected 't0,tc', got '" + text + "'");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DREM parameter estimation: simulate, reproduce, analyze excitation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", drex::kVersion);

  drex::ScenarioOverrides overrides;
  auto add_overrides = [&](CLI::App* sub) {
    sub->add_option("--dt", overrides.dt, "Integration step [s]");
    sub->add_option("--horizon", overrides.horizon, "Simulation end time [s]");
    sub->add_option("--out-dir", overrides.out_dir, "Output directory");
  };

  std::string scenario_path;
  auto* run_cmd = app.add_subcommand("run", "Run a scenario file");
  run_cmd->add_option("scenario", scenario_path, "Scenario TOML file")->required();
  add_overrides(run_cmd);

  std::string figure_id;
  auto* repro_cmd = app.add_subcommand("reproduce", "Reproduce a figure from a built-in scenario");
  repro_cmd->add_option("figure", figure_id, "fig1..fig5")->required();
  add_overrides(repro_cmd);

  std::string csv_path;
  double pe_window = 0.0;
  std::optional<double> pe_stride;
  std::string ie_window;
  double quad_dt = 1e-3;
  std::vector<double> lambdas;
  auto* analyze_cmd = app.add_subcommand("analyze", "Excitation analysis of a tabulated regressor");
  analyze_cmd->add_option("regressor", csv_path, "CSV with header t,phi1,...,phiq")->required();
  analyze_cmd->add_option("--pe-window", pe_window, "PE window length T [s]")->required();
  analyze_cmd->add_option("--pe-stride", pe_stride, "Window stride [s] (default T/20)");
  analyze_cmd->add_option("--ie-window", ie_window, "IE interval as t0,tc")->required();
  analyze_cmd->add_option("--quad-dt", quad_dt, "Quadrature step [s]");
  analyze_cmd->add_option("--lambdas", lambdas, "Filter poles; also runs the filter bank and reports delta_n")
      ->delimiter(',');
  analyze_cmd->add_option("--dt", overrides.dt, "Integration step for --lambdas [s]");
  analyze_cmd->add_option("--out-dir", overrides.out_dir, "Output directory");

  std::size_t trials = 200;
  std::uint64_t seed = 1;
  std::string sweep_scenario;
  double lambda_min = 0.05, lambda_max = 5.0;
  auto* sweep_cmd = app.add_subcommand("sweep-poles", "Random distinct-pole sweep for t_star detection");
  sweep_cmd->add_option("--trials", trials, "Number of pole sets")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--seed", seed, "Random seed");
  sweep_cmd->add_option("--scenario", sweep_scenario, "Scenario file (default: built-in fig3_ie)");
  sweep_cmd->add_option("--lambda-min", lambda_min, "Smallest pole");
  sweep_cmd->add_option("--lambda-max", lambda_max, "Largest pole");
  add_overrides(sweep_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*run_cmd) {
      const auto s = drex::apply_overrides(drex::parse_scenario(scenario_path), overrides);
      const auto run = drex::execute_scenario(s);
      print_delta_summary(run);
      print_manifest(run.manifest);
    } else if (*repro_cmd) {
      const auto run = drex::reproduce(drex::parse_figure(figure_id), overrides);
      print_delta_summary(run);
      print_manifest(run.manifest);
    } else if (*analyze_cmd) {
      const auto sig = drex::load_tabulated_csv(csv_path);
      const auto [t0, tc] = parse_pair(ie_window);
      const double horizon = sig.end_time();
      drex::ExcitationReport report;
      report.pe = drex::check_pe(sig, pe_window, horizon, pe_stride, quad_dt);
      report.ie = drex::check_ie(sig, t0, tc, quad_dt);
      report.generalized_pe = drex::generalized_pe_intervals(sig, horizon, 0.1, quad_dt);
      if (!lambdas.empty()) {
        const double t_start = std::get<drex::Tabulated>(sig.kind()).times.front();
        const drex::LtiFilterBank bank(Eigen::Map<const drex::Vector>(lambdas.data(),
                                                                      static_cast<Eigen::Index>(lambdas.size())));
        const drex::TimeGrid grid(t_start, horizon, overrides.dt.value_or(1e-3));
        const drex::TrueParameters zero(drex::Vector::Zero(sig.dimension()));
        const auto sim = drex::simulate({sig, zero, bank, {}, grid, drex::Method::rk4, drex::MixingRoute::cauchy_binet});
        report.delta_n = drex::analyze_delta_n(sim.times, sim.delta_trace());
      }
      const auto bd = drex::backward_distinguishability_check(sig, horizon, quad_dt);
      drex::write_report(std::cout, report);
      std::cout << "# backward distinguishable on [0, " << horizon << "]: " << (bd.distinguishable ? "yes" : "no")
                << " (min eig " << bd.gram_min_eig << ")\n";
      if (overrides.out_dir) {
        const std::filesystem::path dir(*overrides.out_dir);
        std::filesystem::create_directories(dir);
        const std::string stem = std::filesystem::path(csv_path).stem().string();
        std::ofstream rep(dir / (stem + "_excitation.toml"));
        drex::write_report(rep, report);
        std::ofstream win(dir / (stem + "_pe_windows.csv"));
        drex::write_windows_csv(win, report.pe->windows);
      }
    } else if (*sweep_cmd) {
      const auto base = sweep_scenario.empty() ? drex::builtin_scenario("fig3_ie") : drex::parse_scenario(sweep_scenario);
      const auto s = drex::apply_overrides(base, overrides);
      drex::PoleSweepConfig cfg;
      cfg.trials = trials;
      cfg.seed = seed;
      cfg.lambda_min = lambda_min;
      cfg.lambda_max = lambda_max;
      const auto result = drex::sweep_poles(s.regressor, s.theta, s.grid, cfg, s.method);
      std::cout << "pole sweep on " << s.name << ": " << result.detected << "/" << trials
                << " pole sets yield t_star (fraction " << result.fraction << ")\n";
      for (const auto& poles : result.failures()) {
        std::cout << "  no t_star for poles";
        for (Eigen::Index i = 0; i < poles.size(); ++i) std::cout << ' ' << drex::format_double(poles[i]);
        std::cout << '\n';
      }
      if (overrides.out_dir) {
        const std::filesystem::path dir(*overrides.out_dir);
        std::filesystem::create_directories(dir);
        std::ofstream os(dir / (s.output.stem + "_pole_sweep.csv"));
        os << "trial";
        for (Eigen::Index i = 0; i < s.theta.dimension() + 1; ++i) os << ",lambda_" << i + 1;
        os << ",t_star\n";
        for (std::size_t k = 0; k < result.trials.size(); ++k) {
          os << k;
          for (Eigen::Index i = 0; i < result.trials[k].poles.size(); ++i)
            os << ',' << drex::format_double(result.trials[k].poles[i]);
          os << ',' << (result.trials[k].t_star ? drex::format_double(*result.trials[k].t_star) : "") << '\n';
        }
      }
    }
  } catch (const drex::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const drex::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return 0;
}
