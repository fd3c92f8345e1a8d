// Regressor signals phi(t) and the scalar measurement y(t) = phi(t)^T theta.
#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <memory>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "drex/core.hpp"

namespace drex {

/// Which one-sided limit to take at a jump of a piecewise signal.
enum class Side { right, left };

class RegressorSignal;

/// phi_j(t) = amplitude_j * sin(frequency_j * t + phase_j)
struct Sinusoidal {
  Vector amplitudes;
  Vector frequencies;
  Vector phases;
};

struct Constant {
  Vector value;
};

/// Samples on strictly increasing times, linearly interpolated.
struct Tabulated {
  std::vector<double> times;
  Matrix samples;  // N x q
};

/// Equal to the inner signal before cutoff_time, exactly zero from then on.
struct PiecewiseZeroed {
  std::shared_ptr<const RegressorSignal> inner;
  double cutoff_time;
};

/// Immutable, cheaply copyable time-parameterized vector signal.
class RegressorSignal {
 public:
  using Kind = std::variant<Sinusoidal, PiecewiseZeroed, Constant, Tabulated>;

  static RegressorSignal sinusoidal(Vector amplitudes, Vector frequencies,
                                    Vector phases) {
    require(amplitudes.size() > 0, "sinusoidal regressor needs at least one channel");
    require(frequencies.size() == amplitudes.size() && phases.size() == amplitudes.size(),
            "sinusoidal regressor: amplitudes, frequencies and phases must have equal length");
    require(amplitudes.allFinite() && frequencies.allFinite() && phases.allFinite(),
            "sinusoidal regressor: non-finite coefficient");
    return RegressorSignal(
        Sinusoidal{std::move(amplitudes), std::move(frequencies), std::move(phases)});
  }

  static RegressorSignal constant(Vector value) {
    require(value.size() > 0, "constant regressor needs at least one channel");
    require(value.allFinite(), "constant regressor: non-finite value");
    return RegressorSignal(Constant{std::move(value)});
  }

  static RegressorSignal tabulated(std::vector<double> times, Matrix samples) {
    require(times.size() >= 2, "tabulated regressor needs at least two samples");
    require(static_cast<Eigen::Index>(times.size()) == samples.rows(),
            "tabulated regressor: row count differs from number of times");
    require(samples.cols() > 0, "tabulated regressor needs at least one channel");
    for (std::size_t k = 1; k < times.size(); ++k)
      require(times[k] > times[k - 1], "tabulated regressor: times must be strictly increasing (row " +
                                           std::to_string(k + 1) + ")");
    require(std::all_of(times.begin(), times.end(), [](double t) { return std::isfinite(t); }) &&
                samples.allFinite(),
            "tabulated regressor: non-finite entry");
    return RegressorSignal(Tabulated{std::move(times), std::move(samples)});
  }

  static RegressorSignal zeroed_after(RegressorSignal inner, double cutoff_time) {
    require(std::isfinite(cutoff_time) && cutoff_time >= 0.0,
            "piecewise-zeroed regressor: cutoff time must be finite and >= 0");
    return RegressorSignal(PiecewiseZeroed{
        std::make_shared<const RegressorSignal>(std::move(inner)), cutoff_time});
  }

  const Kind& kind() const noexcept { return kind_; }

  Eigen::Index dimension() const {
    return std::visit(
        [](const auto& k) -> Eigen::Index {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, Sinusoidal>) return k.amplitudes.size();
          else if constexpr (std::is_same_v<T, Constant>) return k.value.size();
          else if constexpr (std::is_same_v<T, Tabulated>) return k.samples.cols();
          else return k.inner->dimension();
        },
        kind_);
  }

  /// phi(t). Throws ValidationError for t < 0 or outside a table's range.
  Vector operator()(double t, Side side = Side::right) const {
    if (!(t >= 0.0)) throw ValidationError("regressor evaluated at negative time " + format_double(t));
    return std::visit([&](const auto& k) { return evaluate(k, t, side); }, kind_);
  }

  /// Times in (a, b) where the signal is not smooth (jumps or kinks).
  std::vector<double> breakpoints(double a, double b) const {
    std::vector<double> out;
    collect_breakpoints(a, b, out);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  /// Largest time at which evaluation is defined (infinity when unbounded).
  double end_time() const {
    if (const auto* tab = std::get_if<Tabulated>(&kind_)) return tab->times.back();
    if (const auto* pz = std::get_if<PiecewiseZeroed>(&kind_)) return pz->inner->end_time();
    return std::numeric_limits<double>::infinity();
  }

 private:
  explicit RegressorSignal(Kind kind) : kind_(std::move(kind)) {}

  static Vector evaluate(const Sinusoidal& s, double t, Side) {
    Vector out(s.amplitudes.size());
    for (Eigen::Index j = 0; j < out.size(); ++j)
      out[j] = s.amplitudes[j] * std::sin(s.frequencies[j] * t + s.phases[j]);
    return out;
  }

  static Vector evaluate(const Constant& c, double, Side) { return c.value; }

  static Vector evaluate(const PiecewiseZeroed& p, double t, Side side) {
    const bool zeroed = side == Side::right ? t >= p.cutoff_time : t > p.cutoff_time;
    if (zeroed) return Vector::Zero(p.inner->dimension());
    return (*p.inner)(t, side);
  }

  static Vector evaluate(const Tabulated& tab, double t, Side) {
    const auto& ts = tab.times;
    if (t < ts.front() || t > ts.back())
      throw ValidationError("tabulated regressor evaluated at t=" + format_double(t) +
                            " outside [" + format_double(ts.front()) + ", " +
                            format_double(ts.back()) + "]");
    auto hi = std::upper_bound(ts.begin(), ts.end(), t);
    if (hi == ts.end()) return tab.samples.row(tab.samples.rows() - 1).transpose();
    const auto k = static_cast<Eigen::Index>(hi - ts.begin());
    const double w = (t - ts[k - 1]) / (ts[k] - ts[k - 1]);
    return ((1.0 - w) * tab.samples.row(k - 1) + w * tab.samples.row(k)).transpose();
  }

  void collect_breakpoints(double a, double b, std::vector<double>& out) const {
    if (const auto* tab = std::get_if<Tabulated>(&kind_)) {
      for (double t : tab->times)
        if (t > a && t < b) out.push_back(t);
    } else if (const auto* pz = std::get_if<PiecewiseZeroed>(&kind_)) {
      if (pz->cutoff_time > a && pz->cutoff_time < b) out.push_back(pz->cutoff_time);
      pz->inner->collect_breakpoints(a, std::min(b, pz->cutoff_time), out);
    }
  }

  Kind kind_;
};

/// The unknown parameter vector theta of the regression.
struct TrueParameters {
  Vector theta;

  explicit TrueParameters(Vector value) : theta(std::move(value)) {
    require(theta.allFinite(), "true parameters must be finite");
  }
  Eigen::Index dimension() const { return theta.size(); }
};

/// Uniform time grid t_k = t0 + k*dt, k = 0..steps().
class TimeGrid {
 public:
  TimeGrid(double t0, double t_end, double dt) : t0_(t0), t_end_(t_end), dt_(dt) {
    require(std::isfinite(t0) && t0 >= 0.0, "time grid: t0 must be finite and >= 0");
    require(std::isfinite(t_end) && t_end > t0, "time grid: t_end must exceed t0");
    require(std::isfinite(dt) && dt > 0.0, "time grid: dt must be positive");
    const double n = (t_end - t0) / dt;
    steps_ = static_cast<std::size_t>(std::llround(n));
    require(std::abs(n - static_cast<double>(steps_)) <= 1e-6 * std::max(1.0, n),
            "time grid: (t_end - t0) must be an integer multiple of dt");
    require(steps_ >= 2, "time grid: at least 2 steps required");
  }

  double t0() const noexcept { return t0_; }
  double t_end() const noexcept { return t_end_; }
  double dt() const noexcept { return dt_; }
  std::size_t steps() const noexcept { return steps_; }
  std::size_t samples() const noexcept { return steps_ + 1; }
  /// Computed from the index to avoid accumulating rounding.
  double time(std::size_t k) const noexcept { return t0_ + static_cast<double>(k) * dt_; }

 private:
  double t0_, t_end_, dt_;
  std::size_t steps_ = 0;
};

inline Vector eval_regressor(const RegressorSignal& sig, double t) { return sig(t); }

inline double eval_measurement(const RegressorSignal& sig, const TrueParameters& theta, double t) {
  require(sig.dimension() == theta.dimension(),
          "measurement: regressor dimension " + std::to_string(sig.dimension()) +
              " differs from parameter dimension " + std::to_string(theta.dimension()));
  return sig(t).dot(theta.theta);
}

/// Reads `t,phi1,...,phiq` CSV (header row required).
inline RegressorSignal load_tabulated_csv(std::istream& in, const std::string& origin = "<stream>") {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(origin + ": empty regressor CSV");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      cell.erase(std::remove_if(cell.begin(), cell.end(), [](unsigned char c) { return std::isspace(c); }),
                 cell.end());
      header.push_back(cell);
    }
  }
  if (header.size() < 2 || header[0] != "t")
    throw ValidationError(origin + ": header must be t,phi1,...,phiq");
  for (std::size_t j = 1; j < header.size(); ++j)
    if (header[j] != "phi" + std::to_string(j))
      throw ValidationError(origin + ": header column " + std::to_string(j + 1) + " must be phi" +
                            std::to_string(j) + ", got '" + header[j] + "'");
  const std::size_t q = header.size() - 1;

  std::vector<double> times;
  std::vector<double> values;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    const char* p = line.data();
    const char* end = p + line.size();
    while (p <= end) {
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
      double v = 0.0;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc{})
        throw ValidationError(origin + ":" + std::to_string(line_no) + ": malformed number");
      row.push_back(v);
      p = next;
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
      if (p == end) break;
      if (*p != ',') throw ValidationError(origin + ":" + std::to_string(line_no) + ": expected ','");
      ++p;
    }
    if (row.size() != q + 1)
      throw ValidationError(origin + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(q + 1) + " columns, got " + std::to_string(row.size()));
    times.push_back(row[0]);
    values.insert(values.end(), row.begin() + 1, row.end());
  }
  Matrix samples(static_cast<Eigen::Index>(times.size()), static_cast<Eigen::Index>(q));
  for (Eigen::Index i = 0; i < samples.rows(); ++i)
    for (Eigen::Index j = 0; j < samples.cols(); ++j)
      samples(i, j) = values[static_cast<std::size_t>(i) * q + static_cast<std::size_t>(j)];
  try {
    return RegressorSignal::tabulated(std::move(times), std::move(samples));
  } catch (const ValidationError& e) {
    throw ValidationError(origin + ": " + e.what());
  }
}

inline RegressorSignal load_tabulated_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open regressor CSV '" + path + "'");
  return load_tabulated_csv(in, path);
}

}  // namespace drex
