// Declarative simulation scenarios (TOML) and their validation.
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <tomlplusplus/toml.hpp>

#include "drex/builtin_scenarios.hpp"
#include "drex/core.hpp"
#include "drex/estimators.hpp"
#include "drex/filters.hpp"
#include "drex/integrator.hpp"
#include "drex/signals.hpp"
#include "drex/simulation.hpp"

namespace drex {

struct ValidationIssue {
  std::string field;  // e.g. "elre.lambdas"
  std::string rule;   // e.g. "pole-distinctness"
  std::string message;
};

/// All problems found in one scenario document.
class ScenarioError : public ValidationError {
 public:
  explicit ScenarioError(std::vector<ValidationIssue> issues)
      : ValidationError(summarize(issues)), issues_(std::move(issues)) {}

  const std::vector<ValidationIssue>& issues() const noexcept { return issues_; }

  bool has_rule(std::string_view rule) const {
    for (const auto& i : issues_)
      if (i.rule == rule) return true;
    return false;
  }

 private:
  static std::string summarize(const std::vector<ValidationIssue>& issues) {
    std::string out = "scenario has " + std::to_string(issues.size()) + " problem(s):";
    for (const auto& i : issues) out += "\n  [" + i.rule + "] " + i.field + ": " + i.message;
    return out;
  }
  std::vector<ValidationIssue> issues_;
};

struct AnalysisSpec {
  std::optional<double> pe_window;
  std::optional<double> pe_stride;
  std::optional<std::pair<double, double>> ie_window;  // (t0, tc)
  double quad_dt = 1e-3;
  bool generalized_pe = false;
  double generalized_pe_resolution = 0.1;
  double positivity_floor = 0.0;
};

struct OutputSpec {
  std::string dir = "out";
  std::string stem;
  bool plot_script = true;
};

struct Scenario {
  std::string name;
  RegressorSignal regressor;
  TrueParameters theta;
  ElreFamily elre;
  std::vector<EstimatorSpec> estimators;
  TimeGrid grid;
  Method method = Method::rk4;
  AnalysisSpec analyses;
  OutputSpec output;
  /// Document text the scenario was parsed from (used for hashing).
  std::string source_text;

  SimulationSetup simulation_setup() const {
    return {regressor, theta, elre, estimators, grid, method, MixingRoute::cauchy_binet};
  }
};

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t scenario_hash(const Scenario& s) {
  std::string key = s.source_text;
  key += "\n#grid " + format_double(s.grid.t0()) + " " + format_double(s.grid.t_end()) + " " +
         format_double(s.grid.dt());
  return fnv1a(key);
}

namespace detail {

class ScenarioParser {
 public:
  ScenarioParser(const toml::table& root, std::filesystem::path base_dir) : root_(root), base_(std::move(base_dir)) {}

  Scenario parse(std::string source_text) {
    check_keys(root_, "", {"name", "regressor", "parameters", "elre", "estimators", "grid", "analyses", "output"});
    std::string name = string_at(root_, "name", "name").value_or("");
    if (name.empty()) issue("name", "required", "scenario name is required");

    auto regressor = parse_regressor();
    auto theta = parse_theta();
    Eigen::Index q = theta ? theta->size() : (regressor ? regressor->dimension() : 0);
    if (regressor && theta && regressor->dimension() != theta->size())
      issue("parameters.theta / regressor", "dimension-consistency",
            "parameters.theta has " + std::to_string(theta->size()) + " entries but the regressor has dimension " +
                std::to_string(regressor->dimension()));
    auto elre = parse_elre(q);
    auto estimators = parse_estimators(q);
    auto [grid, method] = parse_grid();
    auto analyses = parse_analyses(grid);
    auto output = parse_output(name);

    if (issues_.empty() && !(regressor && theta && elre && grid))
      issue("<document>", "incomplete", "scenario could not be assembled");
    if (!issues_.empty()) throw ScenarioError(issues_);
    return Scenario{name,     *regressor, TrueParameters(*theta), *elre,  std::move(estimators),
                    *grid,    method,     analyses,                output, std::move(source_text)};
  }

 private:
  void issue(std::string field, std::string rule, std::string message) {
    issues_.push_back({std::move(field), std::move(rule), std::move(message)});
  }

  static std::string where(const toml::node& n) {
    const auto& src = n.source();
    if (src.begin.line == 0) return "";
    return " (line " + std::to_string(src.begin.line) + ")";
  }

  void check_keys(const toml::table& t, const std::string& prefix, std::set<std::string> allowed) {
    for (const auto& [k, v] : t) {
      const std::string key(k.str());
      if (!allowed.count(key))
        issue(prefix + key, "unknown-key", "unrecognized key '" + key + "'" + where(v));
    }
  }

  const toml::table* table_at(const toml::table& parent, std::string_view key, const std::string& field,
                              bool required) {
    const toml::node* n = parent.get(key);
    if (!n) {
      if (required) issue(field, "required", "missing table [" + field + "]");
      return nullptr;
    }
    if (!n->is_table()) {
      issue(field, "type", "expected a table" + where(*n));
      return nullptr;
    }
    return n->as_table();
  }

  std::optional<double> number_at(const toml::table& t, std::string_view key, const std::string& field,
                                  bool required = true) {
    const toml::node* n = t.get(key);
    if (!n) {
      if (required) issue(field, "required", "missing value");
      return std::nullopt;
    }
    if (!n->is_number()) {
      issue(field, "type", "expected a number" + where(*n));
      return std::nullopt;
    }
    const double v = n->value<double>().value_or(std::nan(""));
    if (!std::isfinite(v)) {
      issue(field, "finite", "value must be finite" + where(*n));
      return std::nullopt;
    }
    return v;
  }

  std::optional<std::string> string_at(const toml::table& t, std::string_view key, const std::string& field,
                                       bool required = false) {
    const toml::node* n = t.get(key);
    if (!n) {
      if (required) issue(field, "required", "missing value");
      return std::nullopt;
    }
    if (!n->is_string()) {
      issue(field, "type", "expected a string" + where(*n));
      return std::nullopt;
    }
    return n->value<std::string>();
  }

  std::optional<bool> bool_at(const toml::table& t, std::string_view key, const std::string& field) {
    const toml::node* n = t.get(key);
    if (!n) return std::nullopt;
    if (!n->is_boolean()) {
      issue(field, "type", "expected true or false" + where(*n));
      return std::nullopt;
    }
    return n->value<bool>();
  }

  /// Accepts an array of numbers, or a bare number when `allow_scalar`.
  std::optional<Vector> vector_at(const toml::table& t, std::string_view key, const std::string& field,
                                  bool required = true, bool allow_scalar = false) {
    const toml::node* n = t.get(key);
    if (!n) {
      if (required) issue(field, "required", "missing value");
      return std::nullopt;
    }
    if (allow_scalar && n->is_number()) {
      Vector v(1);
      v[0] = n->value<double>().value_or(0.0);
      return v;
    }
    const toml::array* arr = n->as_array();
    if (!arr) {
      issue(field, "type", "expected an array of numbers" + where(*n));
      return std::nullopt;
    }
    Vector v(static_cast<Eigen::Index>(arr->size()));
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const toml::node& e = *arr->get(i);
      if (!e.is_number()) {
        issue(field, "type", "entry " + std::to_string(i + 1) + " is not a number" + where(*n));
        return std::nullopt;
      }
      v[static_cast<Eigen::Index>(i)] = e.value<double>().value_or(0.0);
    }
    if (!v.allFinite()) {
      issue(field, "finite", "entries must be finite" + where(*n));
      return std::nullopt;
    }
    return v;
  }

  std::optional<RegressorSignal> parse_regressor() {
    const toml::table* t = table_at(root_, "regressor", "regressor", true);
    if (!t) return std::nullopt;
    check_keys(*t, "regressor.", {"kind", "amplitudes", "frequencies", "phases", "value", "file", "zero_after"});
    const auto kind = string_at(*t, "kind", "regressor.kind", true);
    if (!kind) return std::nullopt;

    std::optional<RegressorSignal> sig;
    if (*kind == "sinusoidal") {
      auto amp = vector_at(*t, "amplitudes", "regressor.amplitudes");
      auto freq = vector_at(*t, "frequencies", "regressor.frequencies");
      auto phase = vector_at(*t, "phases", "regressor.phases", false);
      if (amp && !phase) phase = Vector::Zero(amp->size());
      if (amp && freq && phase) {
        if (amp->size() == 0)
          issue("regressor.amplitudes", "dimension-consistency", "at least one channel is required");
        else if (freq->size() != amp->size() || phase->size() != amp->size())
          issue("regressor.amplitudes / regressor.frequencies / regressor.phases", "dimension-consistency",
                "amplitudes, frequencies and phases must have equal length (got " + std::to_string(amp->size()) +
                    ", " + std::to_string(freq->size()) + ", " + std::to_string(phase->size()) + ")");
        else
          sig = RegressorSignal::sinusoidal(*amp, *freq, *phase);
      }
    } else if (*kind == "constant") {
      auto value = vector_at(*t, "value", "regressor.value");
      if (value) {
        if (value->size() == 0) issue("regressor.value", "dimension-consistency", "at least one channel is required");
        else sig = RegressorSignal::constant(*value);
      }
    } else if (*kind == "tabulated") {
      auto file = string_at(*t, "file", "regressor.file", true);
      if (file) {
        std::filesystem::path p(*file);
        if (p.is_relative()) p = base_ / p;
        try {
          sig = load_tabulated_csv(p.string());
        } catch (const ValidationError& e) {
          issue("regressor.file", "tabulated-data", e.what());
        }
      }
    } else {
      issue("regressor.kind", "unknown-kind", "unknown regressor kind '" + *kind +
                                                  "' (expected sinusoidal, constant or tabulated)");
    }

    if (const auto cutoff = number_at(*t, "zero_after", "regressor.zero_after", false)) {
      if (*cutoff < 0.0) issue("regressor.zero_after", "cutoff-nonnegative", "cutoff time must be >= 0");
      else if (sig) sig = RegressorSignal::zeroed_after(*sig, *cutoff);
    }
    return sig;
  }

  std::optional<Vector> parse_theta() {
    const toml::table* t = table_at(root_, "parameters", "parameters", true);
    if (!t) return std::nullopt;
    check_keys(*t, "parameters.", {"theta"});
    auto theta = vector_at(*t, "theta", "parameters.theta");
    if (theta && theta->size() == 0) {
      issue("parameters.theta", "dimension-consistency", "at least one parameter is required");
      return std::nullopt;
    }
    if (theta && theta->size() > kMaxMixingDimension) {
      issue("parameters.theta", "dimension-limit", "at most 8 parameters are supported");
      return std::nullopt;
    }
    return theta;
  }

  std::optional<ElreFamily> parse_elre(Eigen::Index q) {
    const toml::table* t = table_at(root_, "elre", "elre", true);
    if (!t) return std::nullopt;
    check_keys(*t, "elre.", {"family", "lambdas", "alpha"});
    const auto family = string_at(*t, "family", "elre.family", true);
    if (!family) return std::nullopt;
    if (*family == "lti") {
      auto lambdas = vector_at(*t, "lambdas", "elre.lambdas");
      if (!lambdas) return std::nullopt;
      bool ok = true;
      for (Eigen::Index i = 0; i < lambdas->size(); ++i)
        if ((*lambdas)[i] <= 0.0) {
          issue("elre.lambdas", "pole-positivity",
                "pole " + std::to_string(i + 1) + " must be positive (got " + format_double((*lambdas)[i]) + ")");
          ok = false;
        }
      if (lambdas->size() > 0 && ok) {
        const double largest = lambdas->maxCoeff();
        for (Eigen::Index i = 0; i < lambdas->size(); ++i)
          for (Eigen::Index j = i + 1; j < lambdas->size(); ++j)
            if (std::abs((*lambdas)[i] - (*lambdas)[j]) / largest < kPoleSeparationTolerance) {
              issue("elre.lambdas", "pole-distinctness",
                    "poles " + std::to_string(i + 1) + " and " + std::to_string(j + 1) + " coincide (" +
                        format_double((*lambdas)[i]) + ")");
              ok = false;
            }
      }
      if (q > 0 && lambdas->size() <= q) {
        issue("elre.lambdas", "filter-count",
              "need more filters than parameters (got " + std::to_string(lambdas->size()) + " filters for q=" +
                  std::to_string(q) + "; use q+1)");
        ok = false;
      }
      if (lambdas->size() < 2) ok = false;
      if (!ok) return std::nullopt;
      return ElreFamily{LtiFilterBank(*lambdas)};
    }
    if (*family == "kreisselmeier") {
      auto alpha = number_at(*t, "alpha", "elre.alpha");
      if (!alpha) return std::nullopt;
      if (*alpha <= 0.0) {
        issue("elre.alpha", "alpha-positivity", "alpha must be positive");
        return std::nullopt;
      }
      return ElreFamily{KreisselmeierFilter(*alpha)};
    }
    issue("elre.family", "unknown-kind", "unknown extension family '" + *family + "' (expected lti or kreisselmeier)");
    return std::nullopt;
  }

  std::vector<EstimatorSpec> parse_estimators(Eigen::Index q) {
    std::vector<EstimatorSpec> out;
    const toml::node* n = root_.get("estimators");
    if (!n) return out;
    const toml::array* arr = n->as_array();
    if (!arr || !arr->is_array_of_tables()) {
      issue("estimators", "type", "expected [[estimators]] tables" + where(*n));
      return out;
    }
    std::set<std::string> labels;
    for (std::size_t k = 0; k < arr->size(); ++k) {
      const std::string field = "estimators[" + std::to_string(k + 1) + "]";
      const toml::table& t = *arr->get(k)->as_table();
      check_keys(t, field + ".", {"kind", "gains", "initial", "label"});
      const auto kind_name = string_at(t, "kind", field + ".kind", true);
      std::optional<EstimatorKind> kind;
      if (kind_name) {
        try {
          kind = parse_estimator_kind(*kind_name);
        } catch (const ValidationError& e) {
          issue(field + ".kind", "unknown-kind", e.what());
        }
      }
      auto gains = vector_at(t, "gains", field + ".gains", true, true);
      auto initial = vector_at(t, "initial", field + ".initial", false);
      std::string label = string_at(t, "label", field + ".label").value_or(kind_name.value_or(""));
      if (!kind || !gains) continue;

      const Eigen::Index expected = *kind == EstimatorKind::drem ? q : 1;
      bool ok = true;
      if (q > 0 && gains->size() != expected) {
        issue(field + ".gains", "gain-count",
              std::string(to_string(*kind)) + " needs " + std::to_string(expected) + " gain(s), got " +
                  std::to_string(gains->size()));
        ok = false;
      }
      if ((gains->array() <= 0.0).any()) {
        issue(field + ".gains", "gain-positivity", "gains must be positive");
        ok = false;
      }
      if (initial && q > 0 && initial->size() != q) {
        issue(field + ".initial", "dimension-consistency",
              "initial estimate has " + std::to_string(initial->size()) + " entries, expected " + std::to_string(q));
        ok = false;
      }
      if (!labels.insert(label).second) {
        issue(field + ".label", "label-unique", "estimator label '" + label + "' is used twice; set a distinct label");
        ok = false;
      }
      if (ok) out.push_back({*kind, *gains, initial.value_or(Vector()), label});
    }
    return out;
  }

  std::pair<std::optional<TimeGrid>, Method> parse_grid() {
    const toml::table* t = table_at(root_, "grid", "grid", true);
    if (!t) return {std::nullopt, Method::rk4};
    check_keys(*t, "grid.", {"t0", "t_end", "dt", "method"});
    const double t0 = number_at(*t, "t0", "grid.t0", false).value_or(0.0);
    const auto t_end = number_at(*t, "t_end", "grid.t_end");
    const double dt = number_at(*t, "dt", "grid.dt", false).value_or(1e-3);
    Method method = Method::rk4;
    if (const auto m = string_at(*t, "method", "grid.method")) {
      try {
        method = parse_method(*m);
      } catch (const ValidationError& e) {
        issue("grid.method", "unknown-kind", e.what());
      }
    }
    if (!t_end) return {std::nullopt, method};
    try {
      return {TimeGrid(t0, *t_end, dt), method};
    } catch (const ValidationError& e) {
      issue("grid", "grid", e.what());
      return {std::nullopt, method};
    }
  }

  AnalysisSpec parse_analyses(const std::optional<TimeGrid>& grid) {
    AnalysisSpec a;
    const toml::table* t = table_at(root_, "analyses", "analyses", false);
    if (!t) return a;
    check_keys(*t, "analyses.", {"pe_window", "pe_stride", "ie_window", "quad_dt", "generalized_pe",
                                 "generalized_pe_resolution", "positivity_floor"});
    a.pe_window = number_at(*t, "pe_window", "analyses.pe_window", false);
    if (a.pe_window && *a.pe_window <= 0.0) issue("analyses.pe_window", "window-positive", "must be positive");
    if (a.pe_window && grid && *a.pe_window > grid->t_end())
      issue("analyses.pe_window", "window-horizon", "PE window longer than the simulated horizon");
    a.pe_stride = number_at(*t, "pe_stride", "analyses.pe_stride", false);
    if (a.pe_stride && *a.pe_stride <= 0.0) issue("analyses.pe_stride", "window-positive", "must be positive");
    if (auto ie = vector_at(*t, "ie_window", "analyses.ie_window", false)) {
      if (ie->size() != 2) issue("analyses.ie_window", "dimension-consistency", "expected [t0, tc]");
      else if ((*ie)[0] < 0.0 || (*ie)[1] <= 0.0)
        issue("analyses.ie_window", "window-positive", "need t0 >= 0 and tc > 0");
      else a.ie_window = std::make_pair((*ie)[0], (*ie)[1]);
    }
    if (auto qd = number_at(*t, "quad_dt", "analyses.quad_dt", false)) {
      if (*qd <= 0.0) issue("analyses.quad_dt", "window-positive", "must be positive");
      else a.quad_dt = *qd;
    }
    a.generalized_pe = bool_at(*t, "generalized_pe", "analyses.generalized_pe").value_or(false);
    if (auto r = number_at(*t, "generalized_pe_resolution", "analyses.generalized_pe_resolution", false)) {
      if (*r <= 0.0) issue("analyses.generalized_pe_resolution", "window-positive", "must be positive");
      else a.generalized_pe_resolution = *r;
    }
    if (auto f = number_at(*t, "positivity_floor", "analyses.positivity_floor", false)) {
      if (*f < 0.0) issue("analyses.positivity_floor", "floor-nonnegative", "must be >= 0");
      else a.positivity_floor = *f;
    }
    return a;
  }

  OutputSpec parse_output(const std::string& name) {
    OutputSpec o;
    o.stem = name;
    const toml::table* t = table_at(root_, "output", "output", false);
    if (!t) return o;
    check_keys(*t, "output.", {"dir", "stem", "plot_script"});
    if (auto d = string_at(*t, "dir", "output.dir")) o.dir = *d;
    if (auto s = string_at(*t, "stem", "output.stem")) o.stem = *s;
    if (o.stem.empty() || o.stem.find_first_of("/\\") != std::string::npos)
      issue("output.stem", "stem", "file stem must be non-empty and contain no path separators");
    o.plot_script = bool_at(*t, "plot_script", "output.plot_script").value_or(true);
    return o;
  }

  const toml::table& root_;
  std::filesystem::path base_;
  std::vector<ValidationIssue> issues_;
};

}  // namespace detail

/// Parses and validates a scenario document; relative file references
/// resolve against `base_dir`. Throws ScenarioError listing every problem.
inline Scenario parse_scenario_text(std::string_view text, std::string_view origin = "<scenario>",
                                    const std::filesystem::path& base_dir = ".") {
  toml::table root;
  try {
    root = toml::parse(text, origin);
  } catch (const toml::parse_error& e) {
    const auto& src = e.source();
    throw ScenarioError({{std::string(origin) + ":" + std::to_string(src.begin.line) + ":" +
                              std::to_string(src.begin.column),
                          "syntax", std::string(e.description())}});
  }
  return detail::ScenarioParser(root, base_dir).parse(std::string(text));
}

inline Scenario parse_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError({{path.string(), "file", "cannot open scenario file"}});
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario_text(ss.str(), path.string(), path.parent_path());
}

inline Scenario builtin_scenario(std::string_view name) {
  const auto text = builtin::scenario_text(name);
  if (!text) throw ValidationError("unknown built-in scenario '" + std::string(name) + "'");
  return parse_scenario_text(*text, name);
}

struct ScenarioOverrides {
  std::optional<double> dt;
  std::optional<double> horizon;
  std::optional<std::string> out_dir;
};

inline Scenario apply_overrides(Scenario s, const ScenarioOverrides& o) {
  if (o.dt || o.horizon) {
    s.grid = TimeGrid(s.grid.t0(), o.horizon.value_or(s.grid.t_end()), o.dt.value_or(s.grid.dt()));
    if (s.analyses.pe_window && *s.analyses.pe_window > s.grid.t_end())
      throw ValidationError("horizon override is shorter than the PE window");
  }
  if (o.out_dir) s.output.dir = *o.out_dir;
  return s;
}

}  // namespace drex
