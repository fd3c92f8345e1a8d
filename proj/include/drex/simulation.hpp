// Co-simulation of the regressor extension and any number of estimators in
// one state vector, so every estimator sees the extension (and the mixed
// regression) at the same integration stages.
#pragma once

#include <string>
#include <vector>

#include "drex/core.hpp"
#include "drex/estimators.hpp"
#include "drex/filters.hpp"
#include "drex/integrator.hpp"
#include "drex/mixing.hpp"
#include "drex/signals.hpp"

namespace drex {

struct EstimatorSpec {
  EstimatorKind kind = EstimatorKind::drem;
  /// One gain for the gradient kinds, q gains for DREM.
  Vector gains;
  /// Empty means zero.
  Vector initial;
  std::string label;
};

struct EstimatorTrace {
  EstimatorSpec spec;
  std::vector<Vector> theta_hat;
  std::vector<Vector> error;
  /// Trapezoid integral of delta^2 up to each sample (DREM only).
  std::vector<double> delta_sq_integral;
};

struct SimulationSetup {
  RegressorSignal signal;
  TrueParameters theta;
  ElreFamily family;
  std::vector<EstimatorSpec> estimators;
  TimeGrid grid;
  Method method = Method::rk4;
  MixingRoute route = MixingRoute::cauchy_binet;
};

struct SimulationResult {
  std::vector<double> times;
  std::vector<ExtendedRegressorState> elre;
  std::vector<MixedRegression> mixed;
  std::vector<EstimatorTrace> estimators;

  std::vector<double> delta_trace() const {
    std::vector<double> out;
    out.reserve(mixed.size());
    for (const auto& m : mixed) out.push_back(m.delta);
    return out;
  }
};

/// Mixed regression of the family's extension (tall for LTI, square for Kreisselmeier).
inline MixedRegression mix_extension(const ElreFamily& family, const Matrix& Phi, const Vector& Y,
                                     MixingRoute route = MixingRoute::cauchy_binet, double t = 0.0) {
  if (std::holds_alternative<LtiFilterBank>(family)) return mix_tall(Phi, Y, route, t);
  return mix_square(Phi, Y, t);
}

inline void validate_estimator(const EstimatorSpec& e, Eigen::Index q) {
  const std::string name = e.label.empty() ? to_string(e.kind) : e.label;
  const Eigen::Index expected = e.kind == EstimatorKind::drem ? q : 1;
  require(e.gains.size() == expected, "estimator '" + name + "': expected " + std::to_string(expected) +
                                          " gain(s), got " + std::to_string(e.gains.size()));
  require(e.gains.allFinite() && (e.gains.array() > 0.0).all(), "estimator '" + name + "': gains must be positive");
  require(e.initial.size() == 0 || e.initial.size() == q,
          "estimator '" + name + "': initial estimate must have " + std::to_string(q) + " entries");
  require(e.initial.allFinite(), "estimator '" + name + "': non-finite initial estimate");
}

inline SimulationResult simulate(const SimulationSetup& setup) {
  const Eigen::Index q = setup.theta.dimension();
  require(setup.signal.dimension() == q, "simulation: regressor dimension " + std::to_string(setup.signal.dimension()) +
                                             " differs from parameter dimension " + std::to_string(q));
  if (const auto* bank = std::get_if<LtiFilterBank>(&setup.family)) bank->check_dimension(q);
  for (const auto& e : setup.estimators) validate_estimator(e, q);

  const Eigen::Index rows = extension_rows(setup.family, q);
  const Eigen::Index elre_n = detail::elre_size(rows, q);
  const auto n_est = static_cast<Eigen::Index>(setup.estimators.size());
  bool needs_mixing = false;
  for (const auto& e : setup.estimators) needs_mixing |= e.kind == EstimatorKind::drem;

  Vector x = Vector::Zero(elre_n + n_est * q);
  for (Eigen::Index k = 0; k < n_est; ++k) {
    const auto& init = setup.estimators[static_cast<std::size_t>(k)].initial;
    if (init.size() == q) x.segment(elre_n + k * q, q) = init;
  }

  Matrix Phi;
  Vector Y;
  auto rhs = [&](double t, const Vector& s) {
    const Vector phi_t = setup.signal(t);
    const double y_t = phi_t.dot(setup.theta.theta);
    Vector dx(s.size());
    detail::elre_derivative(setup.family, s.head(elre_n), q, phi_t, y_t, dx.head(elre_n));
    detail::unpack_elre(s.head(elre_n), rows, q, Phi, Y);
    MixedRegression mixed;
    if (needs_mixing) mixed = mix_extension(setup.family, Phi, Y, setup.route);
    for (Eigen::Index k = 0; k < n_est; ++k) {
      const auto& e = setup.estimators[static_cast<std::size_t>(k)];
      const Vector th = s.segment(elre_n + k * q, q);
      switch (e.kind) {
        case EstimatorKind::gradient:
          dx.segment(elre_n + k * q, q) = gradient_derivative(th, e.gains[0], phi_t, y_t);
          break;
        case EstimatorKind::elre_gradient:
          dx.segment(elre_n + k * q, q) = elre_gradient_derivative(th, e.gains[0], Phi, Y);
          break;
        case EstimatorKind::drem:
          dx.segment(elre_n + k * q, q) = drem_derivative(th, e.gains, mixed.delta, mixed.y_mixed);
          break;
      }
    }
    return dx;
  };

  SimulationResult out;
  const std::size_t n = setup.grid.samples();
  out.times.reserve(n);
  out.elre.reserve(n);
  out.mixed.reserve(n);
  out.estimators.resize(setup.estimators.size());
  for (std::size_t k = 0; k < setup.estimators.size(); ++k) {
    out.estimators[k].spec = setup.estimators[k];
    out.estimators[k].theta_hat.reserve(n);
    out.estimators[k].error.reserve(n);
  }

  auto record = [&](double t) {
    out.times.push_back(t);
    ExtendedRegressorState st;
    detail::unpack_elre(x.head(elre_n), rows, q, st.Phi, st.Y);
    st.t = t;
    out.mixed.push_back(mix_extension(setup.family, st.Phi, st.Y, setup.route, t));
    out.elre.push_back(std::move(st));
    for (Eigen::Index k = 0; k < n_est; ++k) {
      auto& trace = out.estimators[static_cast<std::size_t>(k)];
      Vector th = x.segment(elre_n + k * q, q);
      trace.error.push_back(th - setup.theta.theta);
      trace.theta_hat.push_back(std::move(th));
    }
  };

  const Integrator integ(setup.method, setup.grid.dt());
  record(setup.grid.t0());
  for (std::size_t k = 1; k < n; ++k) {
    x = advance(integ, setup.grid.time(k - 1), x, rhs);
    check_finite(x, setup.grid.time(k), "co-simulation");
    record(setup.grid.time(k));
  }

  for (auto& trace : out.estimators) {
    if (trace.spec.kind != EstimatorKind::drem) continue;
    trace.delta_sq_integral.resize(n);
    double acc = 0.0;
    trace.delta_sq_integral[0] = 0.0;
    for (std::size_t k = 1; k < n; ++k) {
      const double a = out.mixed[k - 1].delta, b = out.mixed[k].delta;
      acc += 0.5 * (a * a + b * b) * setup.grid.dt();
      trace.delta_sq_integral[k] = acc;
    }
  }
  return out;
}

/// CSV: t,theta_hat_1..q,error_1..q,error_norm
inline std::size_t write_error_csv(std::ostream& os, const std::vector<double>& times, const EstimatorTrace& trace) {
  if (trace.theta_hat.empty()) return 0;
  const Eigen::Index q = trace.theta_hat.front().size();
  os << "t";
  for (Eigen::Index i = 0; i < q; ++i) os << ",theta_hat_" << i + 1;
  for (Eigen::Index i = 0; i < q; ++i) os << ",error_" << i + 1;
  os << ",error_norm\n";
  for (std::size_t k = 0; k < times.size(); ++k) {
    os << format_double(times[k]);
    for (Eigen::Index i = 0; i < q; ++i) os << ',' << format_double(trace.theta_hat[k][i]);
    for (Eigen::Index i = 0; i < q; ++i) os << ',' << format_double(trace.error[k][i]);
    os << ',' << format_double(trace.error[k].norm()) << '\n';
  }
  return times.size();
}

}  // namespace drex
