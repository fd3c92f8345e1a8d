// Excitation analysis of regressors and of the mixed scalar regressor.
//
// All certificates here are sampled: windows are placed on a finite grid of
// start times over a finite horizon, so a positive PE verdict means "every
// sampled window is excited", not a proof for all t.
#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <optional>
#include <random>
#include <thread>
#include <vector>

#include "drex/core.hpp"
#include "drex/filters.hpp"
#include "drex/mixing.hpp"
#include "drex/signals.hpp"
#include "drex/simulation.hpp"

namespace drex {

inline constexpr double kDefaultExcitationFloor = 1e-8;

namespace detail {

/// Composite Simpson over [a, b], split at the signal's breakpoints so that
/// jumps are integrated with the correct one-sided limits. `f(t, side)`
/// returns an Eigen expression-compatible value.
template <class F>
auto simpson(const RegressorSignal& sig, double a, double b, double quad_dt, F&& f) {
  std::vector<double> knots{a};
  for (double bp : sig.breakpoints(a, b)) knots.push_back(bp);
  knots.push_back(b);

  auto total = decltype(f(a, Side::right))(f(a, Side::right) * 0.0);
  for (std::size_t p = 0; p + 1 < knots.size(); ++p) {
    const double lo = knots[p], hi = knots[p + 1];
    auto n = static_cast<std::size_t>(std::ceil((hi - lo) / quad_dt - 1e-9));
    n = std::max<std::size_t>(n, 2);
    if (n % 2) ++n;
    const double h = (hi - lo) / static_cast<double>(n);
    auto piece = decltype(total)(f(lo, Side::right) + f(hi, Side::left));
    for (std::size_t k = 1; k < n; ++k) piece += (k % 2 ? 4.0 : 2.0) * f(lo + static_cast<double>(k) * h, Side::right);
    total += piece * (h / 3.0);
  }
  return total;
}

inline double min_eigenvalue(const Matrix& sym) {
  if (sym.rows() == 1) return sym(0, 0);
  const Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues()[0];
}

}  // namespace detail

struct GramWindow {
  double t_start = 0.0;
  double t_end = 0.0;
  Matrix gram;
  double min_eig = 0.0;
};

/// Gram integral of phi phi^T over [t_start, t_end] (composite Simpson).
inline GramWindow gram_integral(const RegressorSignal& sig, double t_start, double t_end, double quad_dt = 1e-3) {
  require(t_end > t_start, "gram_integral: window must have positive length");
  require(quad_dt > 0.0, "gram_integral: quad_dt must be positive");
  Matrix g = detail::simpson(sig, t_start, t_end, quad_dt, [&](double t, Side side) {
    const Vector p = sig(t, side);
    return Matrix(p * p.transpose());
  });
  g = 0.5 * (g + g.transpose()).eval();
  return {t_start, t_end, g, detail::min_eigenvalue(g)};
}

struct PeVerdict {
  bool is_pe = false;
  double T = 0.0;
  double delta = 0.0;
  double stride = 0.0;
  std::vector<GramWindow> windows;
};

/// Slides a length-T window over [0, horizon]; PE iff every sampled window
/// has min_eig >= floor. delta = smallest min_eig seen.
inline PeVerdict check_pe(const RegressorSignal& sig, double T, double horizon, std::optional<double> stride = {},
                          double quad_dt = 1e-3, double floor = kDefaultExcitationFloor) {
  require(T > 0.0, "check_pe: window length must be positive");
  require(horizon >= T, "check_pe: horizon must be at least the window length");
  const double step = stride.value_or(T / 20.0);
  require(step > 0.0, "check_pe: stride must be positive");

  PeVerdict out;
  out.T = T;
  out.stride = step;
  const double last_start = horizon - T;
  const auto count = static_cast<std::size_t>(std::floor(last_start / step + 1e-9));
  for (std::size_t k = 0; k <= count; ++k) out.windows.push_back(gram_integral(sig, k * step, k * step + T, quad_dt));
  if (last_start - static_cast<double>(count) * step > 1e-9 * std::max(1.0, horizon))
    out.windows.push_back(gram_integral(sig, last_start, horizon, quad_dt));

  out.delta = std::numeric_limits<double>::infinity();
  for (const auto& w : out.windows) out.delta = std::min(out.delta, w.min_eig);
  out.is_pe = out.delta >= floor;
  return out;
}

struct IeVerdict {
  bool is_ie = false;
  double t0 = 0.0;
  double tc = 0.0;
  double mu = 0.0;
};

inline IeVerdict check_ie(const RegressorSignal& sig, double t0, double tc, double quad_dt = 1e-3,
                          double floor = kDefaultExcitationFloor) {
  require(tc > 0.0, "check_ie: interval length must be positive");
  require(t0 >= 0.0, "check_ie: interval start must be >= 0");
  const auto w = gram_integral(sig, t0, t0 + tc, quad_dt);
  return {w.min_eig > floor, t0, tc, w.min_eig};
}

struct GeneralizedPeInterval {
  double tau_start = 0.0;
  double tau_end = 0.0;
  double delta = 0.0;
};

/// Greedy earliest-closure scan: grows each interval in steps of
/// `resolution` until its Gram min_eig exceeds `floor`, then starts the next.
inline std::vector<GeneralizedPeInterval> generalized_pe_intervals(const RegressorSignal& sig, double horizon,
                                                                   double resolution = 0.1, double quad_dt = 1e-3,
                                                                   double floor = kDefaultExcitationFloor) {
  require(horizon > 0.0 && resolution > 0.0, "generalized_pe_intervals: horizon and resolution must be positive");
  std::vector<GeneralizedPeInterval> out;
  const Eigen::Index q = sig.dimension();
  Matrix acc = Matrix::Zero(q, q);
  double start = 0.0;
  const auto steps = static_cast<std::size_t>(std::ceil(horizon / resolution - 1e-9));
  for (std::size_t k = 0; k < steps; ++k) {
    const double lo = static_cast<double>(k) * resolution;
    const double hi = std::min(horizon, lo + resolution);
    acc += gram_integral(sig, lo, hi, quad_dt).gram;
    const double me = detail::min_eigenvalue(acc);
    if (me > floor) {
      out.push_back({start, hi, me});
      start = hi;
      acc.setZero();
    }
  }
  return out;
}

struct DeltaNAnalysis {
  std::optional<double> t_star;
  double rho = 0.0;
  double l2_integral = 0.0;
};

/// t_star: start of the final run of samples with delta > floor that lasts to
/// the end of the trace. rho: min of delta over that run. l2_integral:
/// trapezoid integral of delta^2 over the whole trace.
inline DeltaNAnalysis analyze_delta_n(std::span<const double> times, std::span<const double> delta,
                                      double positivity_floor = 0.0) {
  require(!delta.empty(), "analyze_delta_n: empty trace");
  require(times.size() == delta.size(), "analyze_delta_n: times and values differ in length");
  DeltaNAnalysis out;
  if (delta.size() >= 2) {
    const double h = times[1] - times[0];
    require(h > 0.0, "analyze_delta_n: times must increase");
    for (std::size_t k = 1; k < times.size(); ++k)
      require(std::abs((times[k] - times[k - 1]) - h) <= 1e-6 * h, "analyze_delta_n: grid must be uniform");
    std::vector<double> sq(delta.size());
    std::transform(delta.begin(), delta.end(), sq.begin(), [](double d) { return d * d; });
    out.l2_integral = detail::trapezoid(sq, h);
  }
  std::size_t first = delta.size();
  while (first > 0 && delta[first - 1] > positivity_floor) --first;
  if (first < delta.size()) {
    out.t_star = times[first];
    out.rho = *std::min_element(delta.begin() + static_cast<std::ptrdiff_t>(first), delta.end());
  }
  return out;
}

struct KklCheck {
  double residual = 0.0;
  bool injective = false;
};

/// Compares the observer map int_0^t e^{lambda_i (s - t)} y_theta(s) ds,
/// computed by direct quadrature, with Lambda^{-1} Phi(t) theta_probe from the
/// simulated filter bank. Injectivity of the map is full column rank of Phi(t).
inline KklCheck kkl_mapping_check(const LtiFilterBank& bank, const Matrix& Phi_t, const RegressorSignal& sig,
                                  const Vector& theta_probe, double t, double quad_dt = 1e-3) {
  const Vector& lam = bank.lambdas();
  require(Phi_t.rows() == lam.size() && Phi_t.cols() == theta_probe.size() && sig.dimension() == theta_probe.size(),
          "kkl_mapping_check: dimension mismatch");
  require(t > 0.0, "kkl_mapping_check: t must be positive");
  const Vector direct = detail::simpson(sig, 0.0, t, quad_dt, [&](double s, Side side) {
    const double y = sig(s, side).dot(theta_probe);
    return Vector(((lam.array() * (s - t)).exp() * y).matrix());
  });
  const Vector mapped = (Phi_t * theta_probe).array() / lam.array();
  return {(direct - mapped).norm(), rank_check(Phi_t).full_rank};
}

struct BackwardDistinguishability {
  bool distinguishable = false;
  double gram_min_eig = 0.0;
};

/// Two parameter vectors give identical outputs on [0, t] iff their difference
/// lies in the null space of int_0^t phi phi^T.
inline BackwardDistinguishability backward_distinguishability_check(const RegressorSignal& sig, double t,
                                                                    double quad_dt = 1e-3,
                                                                    double floor = kDefaultExcitationFloor) {
  require(t > 0.0, "backward_distinguishability_check: t must be positive");
  const auto w = gram_integral(sig, 0.0, t, quad_dt);
  return {w.min_eig > floor, w.min_eig};
}

struct ExcitationReport {
  std::optional<PeVerdict> pe;
  std::optional<IeVerdict> ie;
  std::vector<GeneralizedPeInterval> generalized_pe;
  std::optional<DeltaNAnalysis> delta_n;
};

struct PoleSweepConfig {
  std::size_t trials = 200;
  double lambda_min = 0.05;
  double lambda_max = 5.0;
  std::uint64_t seed = 1;
  /// Number of filters; 0 means q + 1.
  Eigen::Index ell = 0;
  /// Worker threads; 0 means hardware concurrency.
  unsigned threads = 0;
};

struct PoleSweepTrial {
  Vector poles;
  std::optional<double> t_star;
};

struct PoleSweepResult {
  std::vector<PoleSweepTrial> trials;
  std::size_t detected = 0;
  double fraction = 0.0;

  std::vector<Vector> failures() const {
    std::vector<Vector> out;
    for (const auto& t : trials)
      if (!t.t_star) out.push_back(t.poles);
    return out;
  }
};

/// Draws random distinct pole sets and reports how often an L-ELRE run on
/// the given regressor yields a detectable t_star.
inline PoleSweepResult sweep_poles(const RegressorSignal& sig, const TrueParameters& theta, const TimeGrid& grid,
                                   const PoleSweepConfig& cfg, Method method = Method::rk4) {
  require(cfg.trials > 0, "sweep_poles: need at least one trial");
  require(cfg.lambda_min > 0.0 && cfg.lambda_max > cfg.lambda_min, "sweep_poles: invalid pole range");
  const Eigen::Index ell = cfg.ell == 0 ? theta.dimension() + 1 : cfg.ell;
  require(ell > theta.dimension(), "sweep_poles: need more filters than parameters");

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> dist(cfg.lambda_min, cfg.lambda_max);
  std::vector<LtiFilterBank> banks;
  banks.reserve(cfg.trials);
  while (banks.size() < cfg.trials) {
    Vector poles(ell);
    for (Eigen::Index i = 0; i < ell; ++i) poles[i] = dist(rng);
    try {
      banks.emplace_back(poles);
    } catch (const ValidationError&) {
      // coincident draw, resample
    }
  }

  PoleSweepResult out;
  out.trials.resize(cfg.trials);
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(cfg.trials);
  auto worker = [&] {
    for (std::size_t k = next++; k < cfg.trials; k = next++) {
      try {
        const SimulationSetup setup{sig, theta, banks[k], {}, grid, method, MixingRoute::cauchy_binet};
        const auto sim = simulate(setup);
        out.trials[k] = {banks[k].lambdas(), analyze_delta_n(sim.times, sim.delta_trace()).t_star};
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  unsigned n_threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, cfg.trials));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < n_threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  for (const auto& t : out.trials) out.detected += t.t_star.has_value();
  out.fraction = static_cast<double>(out.detected) / static_cast<double>(cfg.trials);
  return out;
}

}  // namespace drex
