// Shared numeric aliases, error types and text formatting helpers.
#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include <Eigen/Dense>

namespace drex {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr const char* kVersion = "0.1.0";

/// Invalid input: bad dimensions, violated invariants, malformed files.
/// Maps to CLI exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Integration produced a non-finite state. Maps to CLI exit code 2.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, double time, double state_norm)
      : std::runtime_error(what + " at t=" + std::to_string(time) +
                           " (state norm " + std::to_string(state_norm) + ")"),
        time_(time),
        state_norm_(state_norm) {}

  double time() const noexcept { return time_; }
  double state_norm() const noexcept { return state_norm_; }

 private:
  double time_;
  double state_norm_;
};

/// Shortest round-trip decimal representation.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, ptr);
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ValidationError(message);
}

namespace detail {

/// Trapezoid rule on a uniform grid.
inline double trapezoid(std::span<const double> values, double h) {
  if (values.size() < 2) return 0.0;
  double sum = 0.5 * (values.front() + values.back());
  for (std::size_t k = 1; k + 1 < values.size(); ++k) sum += values[k];
  return sum * h;
}

}  // namespace detail
}  // namespace drex
