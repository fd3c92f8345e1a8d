// Fixed-step one-step methods for small ODE systems x' = f(t, x).
#pragma once

#include <string>
#include <string_view>

#include "drex/core.hpp"

namespace drex {

enum class Method { rk4, euler };

inline Method parse_method(std::string_view name) {
  if (name == "rk4") return Method::rk4;
  if (name == "euler") return Method::euler;
  throw ValidationError("unknown integration method '" + std::string(name) + "' (expected rk4 or euler)");
}

inline const char* to_string(Method m) { return m == Method::rk4 ? "rk4" : "euler"; }

struct Integrator {
  Method method = Method::rk4;
  double dt = 1e-3;

  Integrator() = default;
  Integrator(Method m, double step) : method(m), dt(step) {
    require(std::isfinite(step) && step > 0.0, "integrator: dt must be positive");
  }
};

/// Advances x by one step from time t. `rhs(t, x)` returns dx/dt.
template <class Rhs>
Vector advance(const Integrator& integ, double t, const Vector& x, Rhs&& rhs) {
  const double h = integ.dt;
  if (integ.method == Method::euler) return x + h * rhs(t, x);

  const Vector k1 = rhs(t, x);
  const Vector k2 = rhs(t + 0.5 * h, Vector(x + (0.5 * h) * k1));
  const Vector k3 = rhs(t + 0.5 * h, Vector(x + (0.5 * h) * k2));
  const Vector k4 = rhs(t + h, Vector(x + h * k3));
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline void check_finite(const Vector& x, double t, const char* what) {
  if (!x.allFinite()) throw NumericalError(std::string(what) + ": non-finite state", t, x.norm());
}

}  // namespace drex
