#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "drex/run.hpp"

using namespace drex;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string replaced(std::string text, std::string_view from, std::string_view to) {
  const auto pos = text.find(from);
  REQUIRE(pos != std::string::npos);
  return text.replace(pos, from.size(), to);
}

std::vector<ValidationIssue> issues_of(const std::string& text) {
  try {
    parse_scenario_text(text, "mutated.toml");
  } catch (const ScenarioError& e) {
    return e.issues();
  }
  FAIL("scenario was accepted: " << text);
  return {};
}

bool has_rule(const std::vector<ValidationIssue>& v, std::string_view rule) {
  return std::any_of(v.begin(), v.end(), [&](const auto& i) { return i.rule == rule; });
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("drex_test_" + name);
  fs::remove_all(dir);
  return dir;
}

const std::string kBase(builtin::kFig1Pe);

}  // namespace

TEST_CASE("built-in scenario parses to the expected configuration", "[scenario]") {
  const auto s = builtin_scenario("fig1_pe");
  CHECK(s.name == "fig1_pe");
  CHECK(std::holds_alternative<Sinusoidal>(s.regressor.kind()));
  CHECK(s.theta.theta == Vector{{-1.0, 2.0}});
  REQUIRE(std::holds_alternative<LtiFilterBank>(s.elre));
  CHECK(std::get<LtiFilterBank>(s.elre).lambdas() == Vector{{0.2, 0.3, 0.4}});
  REQUIRE(s.estimators.size() == 2);
  CHECK(s.estimators[0].kind == EstimatorKind::drem);
  CHECK(s.estimators[0].gains == Vector{{2.0, 2.0}});
  CHECK(s.estimators[0].label == "drem");
  CHECK(s.estimators[1].kind == EstimatorKind::gradient);
  CHECK(s.grid.steps() == 40000);
  CHECK(s.method == Method::rk4);
  REQUIRE(s.analyses.pe_window);
  CHECK(s.analyses.generalized_pe);
  CHECK(s.output.stem == "fig1_pe");

  const auto ie = builtin_scenario("fig3_ie");
  CHECK(std::holds_alternative<PiecewiseZeroed>(ie.regressor.kind()));
  CHECK(builtin_scenario("fig5_ie").estimators[0].gains == Vector{{0.35, 0.35}});
  CHECK_THROWS_AS(builtin_scenario("fig9"), ValidationError);
}

TEST_CASE("repository scenario files match the built-ins", "[scenario]") {
  for (auto name : builtin::kNames) {
    const fs::path p = fs::path(DREX_SOURCE_DIR) / "scenarios" / (std::string(name) + ".toml");
    INFO(p);
    CHECK(slurp(p) == std::string(*builtin::scenario_text(name)));
    CHECK(parse_scenario(p).name == name);
  }
}

TEST_CASE("tabulated scenario resolves its data file next to the scenario", "[scenario][io]") {
  const auto s = parse_scenario(fs::path(DREX_FIXTURE_DIR) / "tabulated.toml");
  CHECK(std::holds_alternative<Tabulated>(s.regressor.kind()));
  CHECK(std::holds_alternative<KreisselmeierFilter>(s.elre));
  const auto sim = simulate(s.simulation_setup());
  CHECK(sim.times.size() == 5001);
  CHECK(std::abs(sim.estimators[0].error.back()[0]) < std::abs(sim.estimators[0].error.front()[0]));
}

TEST_CASE("invalid scenarios name the offending field and rule", "[scenario]") {
  struct Case {
    std::string_view from, to, field, rule;
  };
  const std::vector<Case> cases{
      {"lambdas = [0.2, 0.3, 0.4]", "lambdas = [0.2, 0.2, 0.4]", "elre.lambdas", "pole-distinctness"},
      {"lambdas = [0.2, 0.3, 0.4]", "lambdas = [0.2, -0.3, 0.4]", "elre.lambdas", "pole-positivity"},
      {"lambdas = [0.2, 0.3, 0.4]", "lambdas = [0.2, 0.3]", "elre.lambdas", "filter-count"},
      {"family = \"lti\"\nlambdas = [0.2, 0.3, 0.4]", "family = \"kreisselmeier\"\nalpha = 0.0", "elre.alpha",
       "alpha-positivity"},
      {"family = \"lti\"", "family = \"notch\"", "elre.family", "unknown-kind"},
      {"kind = \"sinusoidal\"", "kind = \"chirp\"", "regressor.kind", "unknown-kind"},
      {"gains = [2.0, 2.0]", "gains = [2.0]", "estimators[1].gains", "gain-count"},
      {"gains = [2.0, 2.0]", "gains = [2.0, -1.0]", "estimators[1].gains", "gain-positivity"},
      {"kind = \"gradient\"", "kind = \"drem\"\nlabel = \"drem\"", "estimators[2].label", "label-unique"},
      {"kind = \"gradient\"", "kind = \"newton\"", "estimators[2].kind", "unknown-kind"},
      {"theta = [-1.0, 2.0]", "theta = [-1.0, 2.0]\nextra = 1", "parameters.extra", "unknown-key"},
      {"dt = 0.001", "dt = 0.3", "grid", "grid"},
      {"method = \"rk4\"", "method = \"rk45\"", "grid.method", "unknown-kind"},
      {"pe_window = 6.283185307179586", "pe_window = -1.0", "analyses.pe_window", "window-positive"},
      {"pe_window = 6.283185307179586", "pe_window = 60.0", "analyses.pe_window", "window-horizon"},
      {"generalized_pe = true", "generalized_pe = true\npositivity_floor = -1.0", "analyses.positivity_floor",
       "floor-nonnegative"},
      {"stem = \"fig1_pe\"", "stem = \"a/b\"", "output.stem", "stem"},
      {"t0 = 0.0", "t0 = \"zero\"", "grid.t0", "type"},
      {"amplitudes = [5.0, 8.0]", "amplitudes = [5.0, nan]", "regressor.amplitudes", "finite"},
      {"name = \"fig1_pe\"\n", "", "name", "required"},
      {"phases = [0.0, 1.5707963267948966]", "phases = [0.0, 1.5707963267948966]\nzero_after = -2.0",
       "regressor.zero_after", "cutoff-nonnegative"},
  };
  for (const auto& c : cases) {
    const auto v = issues_of(replaced(kBase, c.from, c.to));
    INFO("expected " << c.field << " / " << c.rule);
    const bool found = std::any_of(v.begin(), v.end(), [&](const auto& i) { return i.field == c.field && i.rule == c.rule; });
    if (!found)
      for (const auto& i : v) UNSCOPED_INFO("got " << i.field << " / " << i.rule << ": " << i.message);
    CHECK(found);
  }
}

TEST_CASE("dimension mismatches and multiple problems are all reported", "[scenario]") {
  auto text = replaced(kBase, "theta = [-1.0, 2.0]", "theta = [-1.0, 2.0, 3.0]");
  text = replaced(text, "gains = 2.0", "gains = -2.0");
  const auto v = issues_of(text);
  CHECK(has_rule(v, "dimension-consistency"));
  CHECK(has_rule(v, "gain-positivity"));
  const auto mismatch = std::find_if(v.begin(), v.end(), [](const auto& i) { return i.rule == "dimension-consistency"; });
  CHECK(mismatch->field.find("parameters.theta") != std::string::npos);
  CHECK(mismatch->field.find("regressor") != std::string::npos);

  const auto nine = issues_of(replaced(kBase, "theta = [-1.0, 2.0]", "theta = [1, 2, 3, 4, 5, 6, 7, 8, 9]"));
  CHECK(has_rule(nine, "dimension-limit"));
}

TEST_CASE("tabulated data problems are reported against the file field", "[scenario][io]") {
  auto text = replaced(kBase, "kind = \"sinusoidal\"", "kind = \"tabulated\"\nfile = \"missing.csv\"");
  text = replaced(text, "amplitudes = [5.0, 8.0]\nfrequencies = [1.0, 1.0]\nphases = [0.0, 1.5707963267948966]\n", "");
  CHECK(has_rule(issues_of(text), "tabulated-data"));
}

TEST_CASE("syntax errors carry line and column", "[scenario]") {
  const auto v = issues_of(replaced(kBase, "theta = [-1.0, 2.0]", "theta = [-1.0, 2.0"));
  REQUIRE(v.size() == 1);
  CHECK(v[0].rule == "syntax");
  CHECK(v[0].field.rfind("mutated.toml:", 0) == 0);
  CHECK_THROWS_AS(parse_scenario("/nonexistent/scenario.toml"), ScenarioError);
}

TEST_CASE("overrides rebuild the grid and output directory", "[scenario]") {
  auto s = apply_overrides(builtin_scenario("fig1_pe"), {0.002, 10.0, "elsewhere"});
  CHECK(s.grid.steps() == 5000);
  CHECK(s.output.dir == "elsewhere");
  CHECK(scenario_hash(s) != scenario_hash(builtin_scenario("fig1_pe")));
  CHECK_THROWS_AS(apply_overrides(builtin_scenario("fig1_pe"), {std::nullopt, 3.0, std::nullopt}), ValidationError);
}

TEST_CASE("runs are deterministic and the manifest describes the emitted files", "[scenario][io]") {
  auto s = apply_overrides(builtin_scenario("fig1_pe"), {std::nullopt, 10.0, std::nullopt});
  const auto a_dir = scratch("run_a"), b_dir = scratch("run_b");
  s.output.dir = a_dir.string();
  const auto a = run_scenario(s);
  s.output.dir = b_dir.string();
  const auto b = run_scenario(s);

  REQUIRE(a.files.size() == b.files.size());
  REQUIRE(fs::exists(a.manifest_path));
  const auto manifest = toml::parse_file(a.manifest_path.string());
  CHECK(manifest["scenario"].value<std::string>() == "fig1_pe");
  CHECK(manifest["scenario_hash"].value<std::string>() == hash_hex(scenario_hash(s)));
  CHECK(manifest["tool_version"].value<std::string>() == std::string(kVersion));
  CHECK(manifest["grid"]["dt"].value<double>() == 1e-3);
  const auto* listed = manifest["files"].as_array();
  REQUIRE(listed);
  CHECK(listed->size() == a.files.size());

  for (std::size_t k = 0; k < a.files.size(); ++k) {
    const auto& f = a.files[k];
    INFO(f.path);
    REQUIRE(fs::exists(f.path));
    const std::string text = slurp(f.path);
    CHECK(text == slurp(b.files[k].path));
    const auto lines = static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
    CHECK(f.rows == (f.path.extension() == ".csv" ? lines - 1 : lines));
    CHECK((*listed)[k].as_table()->at("rows").value<int64_t>() == static_cast<int64_t>(f.rows));
  }
  const auto elre = std::find_if(a.files.begin(), a.files.end(),
                                 [](const auto& f) { return f.path.filename() == "fig1_pe_elre.csv"; });
  REQUIRE(elre != a.files.end());
  CHECK(elre->rows == 10001);
  CHECK(slurp(elre->path).rfind("t,Phi_11,Phi_12,Phi_21,Phi_22,Phi_31,Phi_32,Y_1,Y_2,Y_3\n", 0) == 0);
  fs::remove_all(a_dir);
  fs::remove_all(b_dir);
}

TEST_CASE("estimators started at the true parameters stay there in a scenario run", "[scenario]") {
  const auto text = replaced(replaced(kBase, "gains = [2.0, 2.0]", "gains = [2.0, 2.0]\ninitial = [-1.0, 2.0]"),
                             "gains = 2.0", "gains = 2.0\ninitial = [-1.0, 2.0]");
  auto s = apply_overrides(parse_scenario_text(text), {std::nullopt, 10.0, std::nullopt});
  const auto sim = simulate(s.simulation_setup());
  for (const auto& tr : sim.estimators)
    for (const auto& e : tr.error) REQUIRE(e.cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("figure reproduction", "[scenario][io]") {
  const auto dir = scratch("figures");
  const ScenarioOverrides o{std::nullopt, std::nullopt, dir.string()};

  const auto f2 = reproduce(Figure::fig2, o);
  for (int i = 1; i <= 2; ++i) CHECK(fs::exists(dir / ("fig2_error_" + std::to_string(i) + ".csv")));
  CHECK(fs::exists(dir / "fig2.gp"));
  const auto& drem = f2.simulation.estimators[0];
  for (std::size_t k = 1; k < drem.error.size(); ++k)
    for (int i = 0; i < 2; ++i) REQUIRE(std::abs(drem.error[k][i]) <= std::abs(drem.error[k - 1][i]) + 1e-9);

  const auto f4 = reproduce(Figure::fig4, o);
  const auto f5 = reproduce(Figure::fig5, o);
  for (int i = 0; i < 2; ++i)
    CHECK(std::abs(f5.simulation.estimators[0].error.back()[i]) <
          std::abs(f4.simulation.estimators[0].error.back()[i]));

  reproduce(Figure::fig1, o);
  const std::string once = slurp(dir / "fig1_delta_n.csv");
  reproduce(Figure::fig1, o);
  CHECK(once == slurp(dir / "fig1_delta_n.csv"));
  CHECK(once.rfind("t,delta_n\n", 0) == 0);

  CHECK(parse_figure("fig3") == Figure::fig3);
  CHECK_THROWS_AS(parse_figure("fig6"), ValidationError);
  fs::remove_all(dir);
}
