// Online parameter estimators:
//   gradient on the raw regression   theta_hat' = gamma phi (y - phi^T theta_hat)
//   gradient on the extended one     theta_hat' = gamma Phi^T (Y - Phi theta_hat)
//   DREM, per channel i              theta_hat_i' = gamma_i delta (y_mixed_i - delta theta_hat_i)
//
// The step_* functions hold their inputs constant over the step. Co-simulation
// with time-varying inputs goes through the *_derivative functions.
#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <string_view>

#include "drex/core.hpp"
#include "drex/integrator.hpp"
#include "drex/mixing.hpp"

namespace drex {

enum class EstimatorKind { gradient, elre_gradient, drem };

inline EstimatorKind parse_estimator_kind(std::string_view name) {
  if (name == "gradient") return EstimatorKind::gradient;
  if (name == "elre_gradient") return EstimatorKind::elre_gradient;
  if (name == "drem") return EstimatorKind::drem;
  throw ValidationError("unknown estimator kind '" + std::string(name) +
                        "' (expected gradient, elre_gradient or drem)");
}

inline const char* to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::gradient: return "gradient";
    case EstimatorKind::elre_gradient: return "elre_gradient";
    case EstimatorKind::drem: return "drem";
  }
  return "?";
}

struct GradientEstimatorState {
  Vector theta_hat;
  double gamma = 1.0;
  double t = 0.0;

  GradientEstimatorState(Vector initial, double gain, double t0 = 0.0)
      : theta_hat(std::move(initial)), gamma(gain), t(t0) {
    require(std::isfinite(gain) && gain > 0.0, "gradient estimator: gamma must be positive");
    require(theta_hat.allFinite(), "gradient estimator: non-finite initial estimate");
  }
};

struct ElreGradientEstimatorState {
  Vector theta_hat;
  double gamma = 1.0;
  double t = 0.0;

  ElreGradientEstimatorState(Vector initial, double gain, double t0 = 0.0)
      : theta_hat(std::move(initial)), gamma(gain), t(t0) {
    require(std::isfinite(gain) && gain > 0.0, "extended gradient estimator: gamma must be positive");
    require(theta_hat.allFinite(), "extended gradient estimator: non-finite initial estimate");
  }
};

struct DremEstimatorState {
  Vector theta_hat;
  Vector gammas;
  double t = 0.0;
  /// Running integral of delta^2, same value in every channel.
  Vector integral_of_delta_sq;

  DremEstimatorState(Vector initial, Vector gains, double t0 = 0.0)
      : theta_hat(std::move(initial)), gammas(std::move(gains)), t(t0) {
    require(gammas.size() == theta_hat.size(), "DREM estimator: need one gain per parameter");
    require(gammas.allFinite() && (gammas.array() > 0.0).all(), "DREM estimator: gains must be positive");
    require(theta_hat.allFinite(), "DREM estimator: non-finite initial estimate");
    integral_of_delta_sq = Vector::Zero(theta_hat.size());
  }
};

inline Vector gradient_derivative(const Vector& theta_hat, double gamma, const Vector& phi_t, double y_t) {
  return gamma * phi_t * (y_t - phi_t.dot(theta_hat));
}

inline Vector elre_gradient_derivative(const Vector& theta_hat, double gamma, const Matrix& Phi_t,
                                       const Vector& Y_t) {
  return gamma * (Phi_t.transpose() * (Y_t - Phi_t * theta_hat));
}

inline Vector drem_derivative(const Vector& theta_hat, const Vector& gammas, double delta, const Vector& y_mixed) {
  return (gammas.array() * delta * (y_mixed.array() - delta * theta_hat.array())).matrix();
}

inline GradientEstimatorState step_gradient(const GradientEstimatorState& state, const Vector& phi_t, double y_t,
                                            const Integrator& integ) {
  require(phi_t.size() == state.theta_hat.size(), "step_gradient: regressor dimension mismatch");
  GradientEstimatorState out = state;
  out.theta_hat = advance(integ, state.t, state.theta_hat,
                          [&](double, const Vector& th) { return gradient_derivative(th, state.gamma, phi_t, y_t); });
  check_finite(out.theta_hat, state.t + integ.dt, "gradient estimator");
  out.t = state.t + integ.dt;
  return out;
}

inline ElreGradientEstimatorState step_elre_gradient(const ElreGradientEstimatorState& state, const Matrix& Phi_t,
                                                     const Vector& Y_t, const Integrator& integ) {
  require(Phi_t.cols() == state.theta_hat.size() && Y_t.size() == Phi_t.rows(),
          "step_elre_gradient: dimension mismatch");
  ElreGradientEstimatorState out = state;
  out.theta_hat = advance(integ, state.t, state.theta_hat, [&](double, const Vector& th) {
    return elre_gradient_derivative(th, state.gamma, Phi_t, Y_t);
  });
  check_finite(out.theta_hat, state.t + integ.dt, "extended gradient estimator");
  out.t = state.t + integ.dt;
  return out;
}

inline DremEstimatorState step_drem(const DremEstimatorState& state, const MixedRegression& mixed,
                                    const Integrator& integ) {
  require(std::isfinite(mixed.delta), "step_drem: non-finite delta");
  require(mixed.y_mixed.size() == state.theta_hat.size(), "step_drem: mixed regression dimension mismatch");
  DremEstimatorState out = state;
  out.theta_hat = advance(integ, state.t, state.theta_hat, [&](double, const Vector& th) {
    return drem_derivative(th, state.gammas, mixed.delta, mixed.y_mixed);
  });
  check_finite(out.theta_hat, state.t + integ.dt, "DREM estimator");
  out.integral_of_delta_sq.array() += mixed.delta * mixed.delta * integ.dt;
  out.t = state.t + integ.dt;
  return out;
}

/// Analytic DREM channel error e0 * exp(-gamma * int_0^t delta^2).
inline double closed_form_drem_error(double e0, double gamma_i, double delta_sq_integral) {
  require(delta_sq_integral >= 0.0, "closed_form_drem_error: integral of delta^2 must be >= 0");
  if (std::isinf(delta_sq_integral)) return 0.0;
  return e0 * std::exp(-gamma_i * delta_sq_integral);
}

}  // namespace drex
