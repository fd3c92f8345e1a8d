// Mixing: turns the extended regression Y = Phi theta into q scalar
// regressions y_mixed_i = delta * theta_i sharing one scalar regressor.
//
// Square Phi:  delta = det(Phi),       y_mixed = adj(Phi) Y
// Tall Phi:    delta = det(Phi^T Phi), y_mixed = adj(Phi^T Phi) Phi^T Y
//
// Determinants and adjugates are templates over the scalar type so that the
// same code runs in exact integer arithmetic.
#pragma once

#include <optional>
#include <type_traits>
#include <vector>

#include "drex/core.hpp"

namespace drex {

template <class Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Largest supported mixing dimension.
inline constexpr Eigen::Index kMaxMixingDimension = 8;

namespace detail {

inline void check_mixing_dimension(Eigen::Index n) {
  require(n <= kMaxMixingDimension,
          "mixing is limited to q <= 8 (got q=" + std::to_string(n) +
              "); split the parameter vector or reparameterize into smaller blocks");
}

// Fraction-free Gaussian elimination; every division is exact.
template <class Scalar>
Scalar bareiss_determinant(MatrixX<Scalar> a) {
  const Eigen::Index n = a.rows();
  Scalar sign = 1;
  Scalar prev = 1;
  for (Eigen::Index k = 0; k + 1 < n; ++k) {
    if (a(k, k) == 0) {
      Eigen::Index swap = k + 1;
      while (swap < n && a(swap, k) == 0) ++swap;
      if (swap == n) return 0;
      a.row(k).swap(a.row(swap));
      sign = -sign;
    }
    for (Eigen::Index i = k + 1; i < n; ++i)
      for (Eigen::Index j = k + 1; j < n; ++j) a(i, j) = (a(i, j) * a(k, k) - a(i, k) * a(k, j)) / prev;
    prev = a(k, k);
  }
  return sign * a(n - 1, n - 1);
}

template <class Scalar>
Scalar lu_determinant(MatrixX<Scalar> a) {
  const Eigen::Index n = a.rows();
  Scalar det = 1;
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::Index pivot = k;
    for (Eigen::Index i = k + 1; i < n; ++i)
      if (std::abs(a(i, k)) > std::abs(a(pivot, k))) pivot = i;
    if (a(pivot, k) == Scalar(0)) return Scalar(0);
    if (pivot != k) {
      a.row(k).swap(a.row(pivot));
      det = -det;
    }
    det *= a(k, k);
    for (Eigen::Index i = k + 1; i < n; ++i) {
      const Scalar f = a(i, k) / a(k, k);
      a.row(i).tail(n - k - 1) -= f * a.row(k).tail(n - k - 1);
    }
  }
  return det;
}

template <class Scalar>
MatrixX<Scalar> minor_matrix(const MatrixX<Scalar>& m, Eigen::Index row, Eigen::Index col) {
  const Eigen::Index n = m.rows();
  MatrixX<Scalar> out(n - 1, n - 1);
  for (Eigen::Index i = 0, r = 0; i < n; ++i) {
    if (i == row) continue;
    for (Eigen::Index j = 0, c = 0; j < n; ++j) {
      if (j == col) continue;
      out(r, c++) = m(i, j);
    }
    ++r;
  }
  return out;
}

}  // namespace detail

/// det(M). Cofactor expansion up to 3x3, then Bareiss (integers) or
/// partial-pivot LU (floating point).
template <class Scalar>
Scalar determinant(const MatrixX<Scalar>& m) {
  require(m.rows() == m.cols(), "determinant: matrix must be square");
  const Eigen::Index n = m.rows();
  detail::check_mixing_dimension(n);
  switch (n) {
    case 0: return Scalar(1);
    case 1: return m(0, 0);
    case 2: return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    case 3:
      return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
             m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
             m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
    default: break;
  }
  if constexpr (std::is_integral_v<Scalar>) return detail::bareiss_determinant<Scalar>(m);
  else return detail::lu_determinant<Scalar>(m);
}

/// adj(M) = transpose of the cofactor matrix; adj(M) M = M adj(M) = det(M) I
/// also for singular M. adj of a 1x1 matrix is [1].
template <class Scalar>
MatrixX<Scalar> adjugate(const MatrixX<Scalar>& m) {
  require(m.rows() == m.cols(), "adjugate: matrix must be square");
  const Eigen::Index n = m.rows();
  require(n >= 1, "adjugate: empty matrix");
  detail::check_mixing_dimension(n);
  MatrixX<Scalar> adj(n, n);
  if (n == 1) {
    adj(0, 0) = Scalar(1);
    return adj;
  }
  if (n == 2) {
    adj << m(1, 1), -m(0, 1), -m(1, 0), m(0, 0);
    return adj;
  }
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const Scalar c = determinant<Scalar>(detail::minor_matrix<Scalar>(m, i, j));
      adj(j, i) = ((i + j) % 2 == 0) ? c : Scalar(-c);
    }
  return adj;
}

inline double determinant(const Matrix& m) { return determinant<double>(m); }
inline Matrix adjugate(const Matrix& m) { return adjugate<double>(m); }

/// Scalar-regressor form: y_mixed = delta * theta when Y = Phi theta.
struct MixedRegression {
  double delta = 0.0;
  Vector y_mixed;
  double t = 0.0;

  /// theta estimate y_mixed / delta, when delta is nonzero.
  std::optional<Vector> recovered() const {
    if (delta == 0.0) return std::nullopt;
    return Vector(y_mixed / delta);
  }
};

/// How the tall-case mixing is evaluated. Both give the same values in exact
/// arithmetic; `cauchy_binet` sums over q-row subsets S,
///   delta = sum_S det(Phi_S)^2, y_mixed = sum_S det(Phi_S) adj(Phi_S) Y_S,
/// which keeps relative precision when rows of Phi decay at different rates
/// and is nonnegative by construction.
enum class MixingRoute { normal_equations, cauchy_binet };

inline MixedRegression mix_square(const Matrix& Phi, const Vector& Y, double t = 0.0) {
  require(Phi.rows() == Phi.cols(), "mix_square: Phi must be square (got " + std::to_string(Phi.rows()) + "x" +
                                        std::to_string(Phi.cols()) + ")");
  require(Y.size() == Phi.rows(), "mix_square: Y length differs from Phi rows");
  return {determinant(Phi), adjugate(Phi) * Y, t};
}

namespace detail {

// Calls f(indices) for each increasing k-subset of {0..n-1}.
template <class F>
void for_each_subset(Eigen::Index n, Eigen::Index k, F&& f) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i;
  while (true) {
    f(idx);
    Eigen::Index i = k - 1;
    while (i >= 0 && idx[static_cast<std::size_t>(i)] == n - k + i) --i;
    if (i < 0) return;
    ++idx[static_cast<std::size_t>(i)];
    for (Eigen::Index j = i + 1; j < k; ++j)
      idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
  }
}

}  // namespace detail

inline MixedRegression mix_tall(const Matrix& Phi, const Vector& Y, MixingRoute route = MixingRoute::normal_equations,
                                double t = 0.0) {
  const Eigen::Index ell = Phi.rows(), q = Phi.cols();
  require(ell >= q, "mix_tall: Phi must have at least as many rows as columns");
  require(Y.size() == ell, "mix_tall: Y length differs from Phi rows");
  require(q >= 1, "mix_tall: empty regressor");
  detail::check_mixing_dimension(q);

  MixedRegression out;
  out.t = t;
  if (route == MixingRoute::normal_equations) {
    const Matrix gram = Phi.transpose() * Phi;
    out.delta = std::max(0.0, determinant(gram));
    out.y_mixed = adjugate(gram) * (Phi.transpose() * Y);
    return out;
  }

  out.y_mixed = Vector::Zero(q);
  Matrix sub(q, q);
  Vector sub_y(q);
  detail::for_each_subset(ell, q, [&](const std::vector<Eigen::Index>& rows) {
    for (Eigen::Index r = 0; r < q; ++r) {
      sub.row(r) = Phi.row(rows[static_cast<std::size_t>(r)]);
      sub_y[r] = Y[rows[static_cast<std::size_t>(r)]];
    }
    const double d = determinant(sub);
    if (d == 0.0) return;
    out.delta += d * d;
    out.y_mixed += d * (adjugate(sub) * sub_y);
  });
  return out;
}

struct RankCheck {
  bool full_rank = false;
  double smallest_singular_value = 0.0;
};

/// Full column rank test: sigma_min(Phi) > tol. Default tol = 1e-10 * ||Phi||_2.
inline RankCheck rank_check(const Matrix& Phi, std::optional<double> tol = std::nullopt) {
  if (tol) require(*tol > 0.0, "rank_check: tolerance must be positive");
  if (Phi.size() == 0) return {};
  const Eigen::JacobiSVD<Matrix> svd(Phi);
  const Vector& sv = svd.singularValues();
  const double threshold = tol ? *tol : 1e-10 * sv[0];
  RankCheck out;
  out.smallest_singular_value = Phi.rows() < Phi.cols() ? 0.0 : sv[sv.size() - 1];
  out.full_rank = out.smallest_singular_value > threshold;
  return out;
}

}  // namespace drex
