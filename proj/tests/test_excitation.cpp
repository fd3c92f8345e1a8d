#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "drex/excitation.hpp"
#include "drex/simulation.hpp"
#include "oracles.hpp"

using namespace drex;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr double kPi = std::numbers::pi;

RegressorSignal reference_regressor() {
  return RegressorSignal::sinusoidal(Vector{{5.0, 8.0}}, Vector{{1.0, 1.0}}, Vector{{0.0, kPi / 2}});
}

RegressorSignal vanishing_regressor() { return RegressorSignal::zeroed_after(reference_regressor(), 5.0); }

const TrueParameters kTheta(Vector{{-1.0, 2.0}});

SimulationResult run_filters(const RegressorSignal& sig, const ElreFamily& fam, double t_end,
                             const TrueParameters& theta = kTheta) {
  return simulate({sig, theta, fam, {}, TimeGrid(0.0, t_end, 1e-3), Method::rk4, MixingRoute::cauchy_binet});
}

const LtiFilterBank kBank(Vector{{0.2, 0.3, 0.4}});

}  // namespace

TEST_CASE("Gram integral over a full period is diag(25 pi, 64 pi)", "[excitation]") {
  const auto sig = reference_regressor();
  for (double a : {0.0, 0.7, 3.1, 12.0}) {
    const auto w = gram_integral(sig, a, a + 2 * kPi);
    CHECK_THAT(w.gram(0, 0), WithinAbs(25 * kPi, 1e-6));
    CHECK_THAT(w.gram(1, 1), WithinAbs(64 * kPi, 1e-6));
    CHECK_THAT(w.gram(0, 1), WithinAbs(0.0, 1e-6));
    CHECK(w.gram(0, 1) == w.gram(1, 0));
    CHECK_THAT(w.min_eig, WithinAbs(25 * kPi, 1e-6));
  }
  // arbitrary windows against the closed form
  for (auto [a, b] : {std::pair{0.0, 5.0}, {1.3, 2.2}, {4.0, 17.5}}) {
    const auto w = gram_integral(sig, a, b);
    const auto ref = oracle::sine_cosine_gram(a, b);
    CHECK_THAT(w.gram(0, 0), WithinAbs(ref.g11, 1e-8));
    CHECK_THAT(w.gram(0, 1), WithinAbs(ref.g12, 1e-8));
    CHECK_THAT(w.gram(1, 1), WithinAbs(ref.g22, 1e-8));
  }
}

TEST_CASE("Gram integral of trivial signals", "[excitation]") {
  const auto zero = gram_integral(RegressorSignal::constant(Vector::Zero(2)), 0.0, 3.0);
  CHECK(zero.gram.isZero());
  CHECK(zero.min_eig == 0.0);
  const auto one = gram_integral(RegressorSignal::constant(Vector{{2.0}}), 1.0, 4.0);
  CHECK_THAT(one.gram(0, 0), WithinRel(12.0, 1e-12));
  CHECK_THROWS_AS(gram_integral(reference_regressor(), 2.0, 2.0), ValidationError);
}

TEST_CASE("Gram integral splits quadrature at the cutoff", "[excitation]") {
  // [3, 7] covers the cutoff at 5; the closed form counts only [3, 5]
  const auto w = gram_integral(vanishing_regressor(), 3.0, 7.0, 1e-2);
  const auto ref = oracle::sine_cosine_gram(3.0, 5.0);
  CHECK_THAT(w.gram(0, 0), WithinAbs(ref.g11, 1e-6));
  CHECK_THAT(w.gram(1, 1), WithinAbs(ref.g22, 1e-6));
  CHECK_THAT(w.gram(0, 1), WithinAbs(ref.g12, 1e-6));
}

TEST_CASE("PE verdicts", "[excitation]") {
  const auto pe = check_pe(reference_regressor(), 2 * kPi, 40.0);
  CHECK(pe.is_pe);
  CHECK_THAT(pe.delta, WithinAbs(25 * kPi, 1e-4));
  CHECK_THAT(pe.stride, WithinRel(2 * kPi / 20, 1e-15));
  CHECK(pe.windows.size() > 100);

  CHECK_FALSE(check_pe(vanishing_regressor(), 2 * kPi, 40.0).is_pe);
  const auto rank_one = check_pe(RegressorSignal::constant(Vector{{1.0, 0.0}}), 1.0, 10.0);
  CHECK_FALSE(rank_one.is_pe);
  CHECK_THAT(rank_one.delta, WithinAbs(0.0, 1e-12));
  CHECK_THROWS_AS(check_pe(reference_regressor(), 50.0, 40.0), ValidationError);
  CHECK_THROWS_AS(check_pe(reference_regressor(), -1.0, 40.0), ValidationError);
}

TEST_CASE("IE verdicts", "[excitation]") {
  const auto ref = oracle::sine_cosine_gram(0.0, 5.0);
  // quadrature oracle for the closed form itself
  const double g11 = oracle::gauss_legendre([](double s) { return 25 * std::sin(s) * std::sin(s); }, 0.0, 5.0);
  const double g12 = oracle::gauss_legendre([](double s) { return 40 * std::sin(s) * std::cos(s); }, 0.0, 5.0);
  REQUIRE_THAT(ref.g11, WithinAbs(g11, 1e-10));
  REQUIRE_THAT(ref.g12, WithinAbs(g12, 1e-10));
  REQUIRE_THAT(ref.min_eig(), WithinAbs(62.11, 0.01));

  const auto ie = check_ie(vanishing_regressor(), 0.0, 5.0);
  CHECK(ie.is_ie);
  CHECK_THAT(ie.mu, WithinRel(ref.min_eig(), 1e-4));
  CHECK(ie.t0 == 0.0);
  CHECK(ie.tc == 5.0);

  const auto zero = check_ie(RegressorSignal::constant(Vector::Zero(2)), 0.0, 3.0);
  CHECK_FALSE(zero.is_ie);
  CHECK(zero.mu == 0.0);
  CHECK_FALSE(check_ie(vanishing_regressor(), 5.0, 5.0).is_ie);
  CHECK_THROWS_AS(check_ie(vanishing_regressor(), 0.0, 0.0), ValidationError);
}

TEST_CASE("delta_N analysis", "[excitation]") {
  const std::vector<double> t{0.0, 0.1, 0.2, 0.3, 0.4};
  const std::vector<double> zero(5, 0.0);
  const auto z = analyze_delta_n(t, zero);
  CHECK_FALSE(z.t_star);
  CHECK(z.l2_integral == 0.0);

  const std::vector<double> d{0.0, 0.5, 0.0, 2.0, 1.0};
  const auto a = analyze_delta_n(t, d);
  REQUIRE(a.t_star);
  CHECK(*a.t_star == 0.3);
  CHECK(a.rho == 1.0);
  CHECK_THAT(a.l2_integral, WithinRel(0.1 * (0.25 + 4.0 + 0.5), 1e-14));
  CHECK_FALSE(analyze_delta_n(t, d, 1.5).t_star);

  CHECK_THROWS_AS(analyze_delta_n({}, {}), ValidationError);
  const std::vector<double> uneven{0.0, 0.1, 0.3, 0.4, 0.5};
  CHECK_THROWS_AS(analyze_delta_n(uneven, d), ValidationError);
}

TEST_CASE("delta_N for the persistently and the intervally exciting runs", "[excitation]") {
  const auto pe = run_filters(reference_regressor(), kBank, 40.0);
  const auto pa = analyze_delta_n(pe.times, pe.delta_trace());
  REQUIRE(pa.t_star);
  CHECK(*pa.t_star <= 2 * kPi);
  CHECK(pa.rho > 0.0);

  const auto ie = run_filters(vanishing_regressor(), kBank, 40.0);
  const auto delta = ie.delta_trace();
  const auto ia = analyze_delta_n(ie.times, delta);
  REQUIRE(ia.t_star);
  const double peak = *std::max_element(delta.begin(), delta.end());
  for (std::size_t k = 30000; k < delta.size(); ++k) REQUIRE(delta[k] <= 1e-6 * peak);
  // positive over the whole tail after the excitation window
  for (std::size_t k = 5000; k < delta.size(); ++k) REQUIRE(delta[k] > 0.0);
}

TEST_CASE("observer map residual and injectivity", "[excitation]") {
  const auto sig = reference_regressor();
  const auto sim = run_filters(sig, kBank, 20.0);
  const auto at = [&](double t) { return sim.elre[static_cast<std::size_t>(std::llround(t / 1e-3))].Phi; };

  const auto zero = kkl_mapping_check(kBank, at(10.0), sig, Vector::Zero(2), 10.0);
  CHECK(zero.residual == 0.0);
  const auto fixed = kkl_mapping_check(kBank, at(10.0), sig, kTheta.theta, 10.0);
  CHECK(fixed.residual <= 1e-6);
  CHECK(fixed.injective);

  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::uniform_int_distribution<int> k(1, 20000);
  for (int trial = 0; trial < 10; ++trial) {
    const Vector probe = Vector::NullaryExpr(2, [&] { return u(rng); });
    const double t = k(rng) * 1e-3;
    const auto c = kkl_mapping_check(kBank, at(t), sig, probe, t);
    REQUIRE(c.residual <= 1e-6);
    const double delta = sim.mixed[static_cast<std::size_t>(std::llround(t / 1e-3))].delta;
    REQUIRE(c.injective == (delta > 0.0));
  }
  CHECK_THROWS_AS(kkl_mapping_check(kBank, at(1.0), sig, Vector::Zero(3), 1.0), ValidationError);
}

TEST_CASE("injectivity is full column rank", "[excitation][property]") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Vector lam{{0.2, 0.3, 0.4}};
  for (int trial = 0; trial < 100; ++trial) {
    Matrix Phi = Matrix::NullaryExpr(3, 2, [&] { return u(rng); });
    const Vector a = Vector::NullaryExpr(2, [&] { return u(rng); });
    Vector b;
    if (trial % 2 == 0) {
      Phi.col(1) = Phi.col(0) * 1.5;  // null vector (1.5, -1)
      b = a + Vector{{1.5, -1.0}} * 0.7;
      REQUIRE_FALSE(rank_check(Phi).full_rank);
      const Vector ta = (Phi * a).array() / lam.array(), tb = (Phi * b).array() / lam.array();
      REQUIRE((ta - tb).norm() <= 1e-14);
    } else {
      REQUIRE(rank_check(Phi).full_rank);
      b = a + Vector::NullaryExpr(2, [&] { return u(rng); });
      const Vector ta = (Phi * a).array() / lam.array(), tb = (Phi * b).array() / lam.array();
      const double eps = rank_check(Phi).smallest_singular_value;
      REQUIRE((ta - tb).norm() >= eps * (a - b).norm() / lam.maxCoeff() * (1 - 1e-12));
    }
  }
}

TEST_CASE("backward distinguishability", "[excitation]") {
  const auto pe = backward_distinguishability_check(reference_regressor(), 2 * kPi);
  CHECK(pe.distinguishable);
  CHECK_THAT(pe.gram_min_eig, WithinAbs(25 * kPi, 1e-4));
  for (double t : {0.5, 4.0, 30.0})
    CHECK_FALSE(backward_distinguishability_check(RegressorSignal::constant(Vector{{1.0, 0.0}}), t).distinguishable);
  const auto ie = backward_distinguishability_check(vanishing_regressor(), 6.0);
  CHECK(ie.distinguishable);
  CHECK_THAT(ie.gram_min_eig, WithinRel(oracle::sine_cosine_gram(0.0, 5.0).min_eig(), 1e-6));
}

TEST_CASE("Gram windows are PSD and the cumulative Gram is monotone", "[excitation][property]") {
  const auto sig = RegressorSignal::sinusoidal(Vector{{1.0, 0.4, 2.0}}, Vector{{0.3, 1.7, 0.9}},
                                               Vector{{0.0, 1.0, -0.5}});
  const auto pe = check_pe(sig, 3.0, 30.0, 0.5);
  for (const auto& w : pe.windows) REQUIRE(w.min_eig >= -1e-10);
  double prev = -1.0;
  for (double t = 0.25; t <= 20.0; t += 0.25) {
    const double m = gram_integral(sig, 0.0, t).min_eig;
    REQUIRE(m >= prev - 1e-10);
    prev = m;
  }
}

TEST_CASE("IE implies positive delta_N after the window on random bursts", "[excitation][property]") {
  std::mt19937_64 rng(2718);
  std::uniform_real_distribution<double> amp(0.5, 5.0), freq(0.3, 3.0), phase(0.0, 2 * kPi), cut(1.0, 6.0),
      pole(0.05, 5.0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto inner = RegressorSignal::sinusoidal(Vector{{amp(rng), amp(rng)}}, Vector{{freq(rng), freq(rng)}},
                                                   Vector{{phase(rng), phase(rng)}});
    const double tc = cut(rng);
    const auto sig = RegressorSignal::zeroed_after(inner, tc);
    Vector poles(3);
    for (;;) {
      for (int i = 0; i < 3; ++i) poles[i] = pole(rng);
      try {
        LtiFilterBank{poles};
        break;
      } catch (const ValidationError&) {
      }
    }
    const auto ie = check_ie(sig, 0.0, tc);
    if (!ie.is_ie) continue;
    const auto sim = run_filters(sig, LtiFilterBank(poles), 15.0);
    const auto k0 = static_cast<std::size_t>(std::ceil(tc / 1e-3 - 1e-9));
    for (std::size_t k = k0; k < sim.mixed.size(); ++k) {
      INFO("trial " << trial << " t " << sim.times[k] << " poles " << poles.transpose());
      REQUIRE(sim.mixed[k].delta > 0.0);
    }
  }
}

TEST_CASE("PE implies a finite t_star and positive rho", "[excitation][property]") {
  std::mt19937_64 rng(314);
  std::uniform_real_distribution<double> amp(0.5, 5.0), freq(0.5, 2.5), phase(0.0, 2 * kPi);
  int certified = 0;
  for (int trial = 0; trial < 6; ++trial) {
    const auto sig = RegressorSignal::sinusoidal(Vector{{amp(rng), amp(rng)}}, Vector{{freq(rng), freq(rng)}},
                                                 Vector{{phase(rng), phase(rng)}});
    if (!check_pe(sig, 8.0, 20.0, 0.5).is_pe) continue;
    ++certified;
    const auto sim = run_filters(sig, kBank, 20.0);
    const auto a = analyze_delta_n(sim.times, sim.delta_trace());
    REQUIRE(a.t_star);
    REQUIRE(a.rho > 0.0);
  }
  CHECK(certified >= 3);
}

TEST_CASE("Kreisselmeier extension keeps det Phi away from zero under PE", "[excitation]") {
  const auto sim = run_filters(reference_regressor(), KreisselmeierFilter(1.0), 40.0);
  double inf = std::numeric_limits<double>::infinity();
  for (std::size_t k = 5000; k < sim.mixed.size(); ++k) inf = std::min(inf, sim.mixed[k].delta);
  CHECK(inf > 1.0);
}

TEST_CASE("generalized PE intervals", "[excitation]") {
  const auto pe = generalized_pe_intervals(reference_regressor(), 20.0, 0.5);
  REQUIRE(pe.size() >= 3);
  double prev_end = 0.0;
  for (const auto& iv : pe) {
    CHECK(iv.tau_start == prev_end);
    CHECK(iv.tau_end > iv.tau_start);
    CHECK(iv.delta > kDefaultExcitationFloor);
    const auto w = gram_integral(reference_regressor(), iv.tau_start, iv.tau_end);
    CHECK_THAT(iv.delta, WithinRel(w.min_eig, 1e-9));
    prev_end = iv.tau_end;
  }
  const auto ie = generalized_pe_intervals(vanishing_regressor(), 20.0, 0.5);
  for (const auto& iv : ie) CHECK(iv.tau_end <= 5.0 + 1e-12);
  CHECK(generalized_pe_intervals(RegressorSignal::constant(Vector{{1.0, 0.0}}), 10.0).empty());
}

TEST_CASE("pole sweep on the vanishing regressor", "[excitation]") {
  PoleSweepConfig cfg;
  cfg.trials = 8;
  cfg.seed = 99;
  const auto a = sweep_poles(vanishing_regressor(), kTheta, TimeGrid(0.0, 10.0, 1e-3), cfg);
  CHECK(a.trials.size() == 8);
  CHECK(a.detected == 8);
  CHECK(a.fraction == 1.0);
  CHECK(a.failures().empty());
  for (const auto& t : a.trials) {
    CHECK(t.poles.size() == 3);
    CHECK((t.poles.array() > 0.05).all());
    CHECK((t.poles.array() < 5.0).all());
  }
  cfg.threads = 1;
  const auto b = sweep_poles(vanishing_regressor(), kTheta, TimeGrid(0.0, 10.0, 1e-3), cfg);
  for (std::size_t k = 0; k < a.trials.size(); ++k) {
    CHECK(a.trials[k].poles == b.trials[k].poles);
    CHECK(a.trials[k].t_star == b.trials[k].t_star);
  }
}
