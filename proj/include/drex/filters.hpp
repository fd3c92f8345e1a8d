// Regressor extension: builds Y(t) = Phi(t) theta by filtering y and each
// regressor channel.
//
//   LTI bank (one filter per row i):  lambda_i / (p + lambda_i)
//     Phi_ij' = -lambda_i Phi_ij + lambda_i phi_j(t)
//     Y_i'    = -lambda_i Y_i    + lambda_i y(t)
//   Kreisselmeier (square, time-varying):
//     Phi' = -alpha Phi + phi phi^T
//     Y'   = -alpha Y   + phi y
#pragma once

#include <algorithm>
#include <iostream>
#include <ostream>
#include <variant>
#include <vector>

#include "drex/core.hpp"
#include "drex/integrator.hpp"
#include "drex/signals.hpp"

namespace drex {

/// Relative separation below which two poles count as coincident.
inline constexpr double kPoleSeparationTolerance = 1e-9;

class LtiFilterBank {
 public:
  explicit LtiFilterBank(Vector lambdas) : lambdas_(std::move(lambdas)) {
    require(lambdas_.size() >= 2, "LTI filter bank needs at least two poles");
    require(lambdas_.allFinite(), "LTI filter bank: non-finite pole");
    for (Eigen::Index i = 0; i < lambdas_.size(); ++i)
      require(lambdas_[i] > 0.0, "LTI filter bank: pole " + std::to_string(i + 1) +
                                     " must be positive (got " + format_double(lambdas_[i]) + ")");
    const double largest = lambdas_.maxCoeff();
    for (Eigen::Index i = 0; i < lambdas_.size(); ++i)
      for (Eigen::Index j = i + 1; j < lambdas_.size(); ++j)
        require(std::abs(lambdas_[i] - lambdas_[j]) / largest >= kPoleSeparationTolerance,
                "pole-distinctness: poles " + std::to_string(i + 1) + " and " + std::to_string(j + 1) +
                    " coincide (" + format_double(lambdas_[i]) + ")");
  }

  const Vector& lambdas() const noexcept { return lambdas_; }
  Eigen::Index ell() const noexcept { return lambdas_.size(); }

  /// The bank must have more filters than unknown parameters.
  void check_dimension(Eigen::Index q) const {
    require(ell() > q, "LTI filter bank: need more filters than parameters (ell=" + std::to_string(ell()) +
                           ", q=" + std::to_string(q) + ")");
  }

 private:
  Vector lambdas_;
};

struct KreisselmeierFilter {
  double alpha;

  explicit KreisselmeierFilter(double a) : alpha(a) {
    require(std::isfinite(a) && a > 0.0, "Kreisselmeier filter: alpha must be positive");
  }
};

using ElreFamily = std::variant<LtiFilterBank, KreisselmeierFilter>;

struct ExtendedRegressorState {
  Matrix Phi;
  Vector Y;
  double t = 0.0;

  static ExtendedRegressorState zero(Eigen::Index rows, Eigen::Index q, double t0 = 0.0) {
    return {Matrix::Zero(rows, q), Vector::Zero(rows), t0};
  }

  bool is_zero() const { return (Phi.array() == 0.0).all() && (Y.array() == 0.0).all(); }
};

/// Number of extended-regression rows the family produces for q parameters.
inline Eigen::Index extension_rows(const ElreFamily& family, Eigen::Index q) {
  if (const auto* bank = std::get_if<LtiFilterBank>(&family)) return bank->ell();
  return q;
}

namespace detail {

// Flat layout [Phi row-major, Y].
inline Eigen::Index elre_size(Eigen::Index rows, Eigen::Index q) { return rows * q + rows; }

inline void pack_elre(const Matrix& Phi, const Vector& Y, Eigen::Ref<Vector> out) {
  const Eigen::Index rows = Phi.rows(), q = Phi.cols();
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < q; ++j) out[i * q + j] = Phi(i, j);
  out.segment(rows * q, rows) = Y;
}

inline void unpack_elre(const Eigen::Ref<const Vector>& x, Eigen::Index rows, Eigen::Index q, Matrix& Phi,
                        Vector& Y) {
  Phi.resize(rows, q);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < q; ++j) Phi(i, j) = x[i * q + j];
  Y = x.segment(rows * q, rows);
}

/// d/dt of the packed extension state given phi(t), y(t).
inline void elre_derivative(const ElreFamily& family, const Eigen::Ref<const Vector>& x, Eigen::Index q,
                            const Vector& phi_t, double y_t, Eigen::Ref<Vector> dx) {
  if (const auto* bank = std::get_if<LtiFilterBank>(&family)) {
    const Vector& lam = bank->lambdas();
    const Eigen::Index rows = lam.size();
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < q; ++j) dx[i * q + j] = lam[i] * (phi_t[j] - x[i * q + j]);
      dx[rows * q + i] = lam[i] * (y_t - x[rows * q + i]);
    }
  } else {
    const double alpha = std::get<KreisselmeierFilter>(family).alpha;
    for (Eigen::Index i = 0; i < q; ++i) {
      for (Eigen::Index j = 0; j < q; ++j) dx[i * q + j] = -alpha * x[i * q + j] + phi_t[i] * phi_t[j];
      dx[q * q + i] = -alpha * x[q * q + i] + phi_t[i] * y_t;
    }
  }
}

inline ExtendedRegressorState step_family(const ElreFamily& family, const ExtendedRegressorState& state,
                                          const RegressorSignal& sig, const TrueParameters& theta,
                                          const Integrator& integ) {
  const Eigen::Index q = theta.dimension();
  require(sig.dimension() == q, "extension: regressor and parameter dimensions differ");
  const Eigen::Index rows = extension_rows(family, q);
  require(state.Phi.rows() == rows && state.Phi.cols() == q && state.Y.size() == rows,
          "extension: state has wrong shape for this filter family");

  Vector x(elre_size(rows, q));
  pack_elre(state.Phi, state.Y, x);
  auto rhs = [&](double t, const Vector& s) {
    const Vector phi_t = sig(t);
    Vector dx(s.size());
    elre_derivative(family, s, q, phi_t, phi_t.dot(theta.theta), dx);
    return dx;
  };
  const Vector next = advance(integ, state.t, x, rhs);
  check_finite(next, state.t + integ.dt, "regressor extension");

  ExtendedRegressorState out;
  unpack_elre(next, rows, q, out.Phi, out.Y);
  out.t = state.t + integ.dt;
  return out;
}

}  // namespace detail

/// One integration step of the LTI filter bank.
inline ExtendedRegressorState step_lti(const LtiFilterBank& bank, const ExtendedRegressorState& state,
                                       const RegressorSignal& sig, const TrueParameters& theta,
                                       const Integrator& integ) {
  bank.check_dimension(theta.dimension());
  return detail::step_family(bank, state, sig, theta, integ);
}

/// One integration step of the Kreisselmeier extension.
inline ExtendedRegressorState step_kre(const KreisselmeierFilter& filt, const ExtendedRegressorState& state,
                                       const RegressorSignal& sig, const TrueParameters& theta,
                                       const Integrator& integ) {
  return detail::step_family(filt, state, sig, theta, integ);
}

/// Samples {Phi(t_k), Y(t_k)} over the grid. Zero initial conditions unless
/// `initial` is given; Y = Phi theta then only holds asymptotically.
inline std::vector<ExtendedRegressorState> run_elre(const ElreFamily& family, const RegressorSignal& sig,
                                                    const TrueParameters& theta, const TimeGrid& grid,
                                                    Method method = Method::rk4,
                                                    const ExtendedRegressorState* initial = nullptr) {
  const Eigen::Index q = theta.dimension();
  if (const auto* bank = std::get_if<LtiFilterBank>(&family)) bank->check_dimension(q);
  const Integrator integ(method, grid.dt());

  std::vector<ExtendedRegressorState> out;
  out.reserve(grid.samples());
  if (initial) {
    if (!initial->is_zero())
      std::clog << "warning: nonzero filter initial conditions; Y = Phi*theta holds only asymptotically\n";
    out.push_back(*initial);
    out.back().t = grid.t0();
  } else {
    out.push_back(ExtendedRegressorState::zero(extension_rows(family, q), q, grid.t0()));
  }
  for (std::size_t k = 1; k < grid.samples(); ++k) {
    auto next = detail::step_family(family, out.back(), sig, theta, integ);
    next.t = grid.time(k);
    out.push_back(std::move(next));
  }
  return out;
}

/// CSV: t,Phi_11,...,Phi_lq,Y_1,...,Y_l
inline std::size_t write_elre_csv(std::ostream& os, const std::vector<ExtendedRegressorState>& traj) {
  if (traj.empty()) return 0;
  const Eigen::Index rows = traj.front().Phi.rows(), q = traj.front().Phi.cols();
  os << "t";
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < q; ++j) os << ",Phi_" << i + 1 << j + 1;
  for (Eigen::Index i = 0; i < rows; ++i) os << ",Y_" << i + 1;
  os << '\n';
  for (const auto& s : traj) {
    os << format_double(s.t);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < q; ++j) os << ',' << format_double(s.Phi(i, j));
    for (Eigen::Index i = 0; i < rows; ++i) os << ',' << format_double(s.Y[i]);
    os << '\n';
  }
  return traj.size();
}

}  // namespace drex
