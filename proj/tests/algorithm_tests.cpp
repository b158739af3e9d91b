#include <cmath>

#include <catch2/catch_amalgamated.hpp>

#include "ntrust/config.hpp"
#include "ntrust/problems.hpp"
#include "ntrust/tr1ne.hpp"
#include "ntrust/trqne.hpp"

using namespace ntrust;

namespace {

ExactOracle half_norm_squared(int n) {
  ExactOracle o;
  o.dimension = n;
  o.value_fn = [](const Vector& x) { return 0.5 * x.squaredNorm(); };
  o.gradient_fn = [](const Vector& x) { return x; };
  o.hessian_fn = [n](const Vector&) { return Matrix::Identity(n, n); };
  o.f_low = 0.0;
  return o;
}

}  // namespace

TEST_CASE("configuration invariants are enforced with named messages") {
  AlgoConfig cfg;
  REQUIRE_NOTHROW(cfg.validate());
  REQUIRE(cfg.nu() == Catch::Approx(std::min(0.5 * cfg.eta, 0.25 * (1.0 - cfg.eta))).margin(1e-15));

  cfg.eta = 1.5;
  REQUIRE_THROWS_WITH(cfg.validate(), Catch::Matchers::ContainsSubstring("eta must be in (0,1)"));
  cfg.eta = 0.1;

  cfg.r0 = cfg.epsilon_min();
  REQUIRE_THROWS_WITH(cfg.validate(), Catch::Matchers::ContainsSubstring("r0"));
  cfg.r0 = 1.0;

  cfg.epsilon = {0.01, 0.01};
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);  // q = 1 wants one tolerance
  cfg.q = 2;
  REQUIRE_NOTHROW(cfg.validate());
}

TEST_CASE("degree selection accepts the cheapest sufficient model") {
  AlgoConfig cfg;
  cfg.q = 2;
  cfg.epsilon = {0.01, 0.01};
  const NoisyOracle quad(benchmark_by_name("quadratic").oracle, NoiseModel{}, 1);

  // Far from stationarity the first-order decrement clears its threshold.
  const Vector far = Vector::Constant(10, 2.0);
  const DegreeSelection s1 = select_degree(quad, far, 1.0, cfg, 0);
  REQUIRE(s1.j_k == 1);
  REQUIRE_FALSE(s1.fallthrough);
  REQUIRE(s1.candidates.size() == 1);

  // At a saddle the gradient stalls but the curvature step does not.
  const NoisyOracle trig(benchmark_by_name("trig").oracle, NoiseModel{}, 1);
  Vector saddle(2);
  saddle << 0.0, M_PI;
  const DegreeSelection s2 = select_degree(trig, saddle, 1.0, cfg, 0);
  REQUIRE(s2.j_k == 2);
  REQUIRE_FALSE(s2.fallthrough);
  REQUIRE(s2.candidates.size() == 2);
  REQUIRE(s2.candidates[1].decrement == Catch::Approx(0.5).margin(1e-6));

  // Near the minimizer no degree qualifies and selection falls through.
  const DegreeSelection s3 = select_degree(quad, Vector::Constant(10, 1e-9), 1.0, cfg, 0);
  REQUIRE(s3.j_k == 2);
  REQUIRE(s3.fallthrough);
}

TEST_CASE("analysis constants at default settings") {
  AlgoConfig cfg;
  LipschitzEstimate lip;
  lip.per_order = {1.0};
  const ThresholdConstants tc = threshold_constants(cfg, lip);
  REQUIRE(tc.vartheta_f == 1.0);
  REQUIRE(tc.kappa_r == Catch::Approx(0.21428571428571427).margin(1e-15));
  REQUIRE(tc.r_bar == Catch::Approx(0.0021428571428571425).margin(1e-15));
  REQUIRE(tc.kappa_delta == Catch::Approx(0.20408163265306123).margin(1e-15));
  REQUIRE(iteration_bound(cfg, lip, 10.0, 0.0, 1.0) > 0.0);

  AlgoConfig tight = cfg;
  tight.epsilon = {1e-3};
  REQUIRE(iteration_bound(tight, lip, 10.0, 0.0, 1.0) > iteration_bound(cfg, lip, 10.0, 0.0, 1.0));

  REQUIRE(bar_b(0.1, 0.05, 1.0) == Catch::Approx(2.0).margin(1e-15));
  REQUIRE(bar_b(0.1, 0.05, 0.5) == Catch::Approx(4.0).margin(1e-15));
  REQUIRE_THROWS_AS(bar_b(0.1, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("first-order iteration on the hand example") {
  AlgoConfig cfg;
  cfg.q = 1;
  cfg.epsilon = {1e-3};
  cfg.r0 = 0.1;
  cfg.budget = 1;
  const NoisyOracle oracle(half_norm_squared(2), NoiseModel{}, 1);
  Vector x0(2);
  x0 << 3.0, 4.0;
  const Trace t = run_tr1ne(cfg, oracle, x0);
  REQUIRE(t.records.size() == 1);
  const IterationRecord& rec = t.records[0];
  REQUIRE(rec.step[0] == Catch::Approx(-0.06).margin(1e-15));
  REQUIRE(rec.step[1] == Catch::Approx(-0.08).margin(1e-15));
  REQUIRE(rec.decrement == Catch::Approx(0.5).margin(1e-15));
  REQUIRE(rec.decrease == Catch::Approx(0.495).margin(1e-12));
  REQUIRE(rec.rho == Catch::Approx(0.99).margin(1e-12));
  REQUIRE(rec.success);
  REQUIRE_FALSE(rec.guard);
  REQUIRE(t.r_final == Catch::Approx(0.2).margin(1e-15));
  REQUIRE(t.x_final[0] == Catch::Approx(2.94).margin(1e-15));
}

TEST_CASE("zero noisy gradient raises the guard and shrinks the radius") {
  AlgoConfig cfg;
  cfg.q = 1;
  cfg.epsilon = {1e-3};
  cfg.r0 = 1.0;
  cfg.budget = 1;
  const NoisyOracle oracle(half_norm_squared(2), NoiseModel{}, 1);
  const Trace t = run_tr1ne(cfg, oracle, Vector::Zero(2));
  REQUIRE(t.records.size() == 1);
  REQUIRE(t.records[0].guard);
  REQUIRE_FALSE(t.records[0].success);
  REQUIRE(t.records[0].decrement == 0.0);
  REQUIRE(t.records[0].step.norm() == 0.0);
  REQUIRE(std::isnan(t.records[0].rho));
  REQUIRE(t.r_final == Catch::Approx(0.5).margin(1e-15));
}

TEST_CASE("radius underflow at an exact stationary point ends the run early") {
  AlgoConfig cfg;
  cfg.q = 1;
  cfg.epsilon = {1e-3};
  cfg.budget = 10000;
  const NoisyOracle oracle(half_norm_squared(2), NoiseModel{}, 1);
  const Trace t = run_tr1ne(cfg, oracle, Vector::Zero(2));
  REQUIRE(t.records.size() < 2000);  // halving reaches denormal zero long before the budget
  REQUIRE(t.x_final.norm() == 0.0);
}

TEST_CASE("general method with q=1 reproduces the first-order method") {
  AlgoConfig cfg;
  cfg.q = 1;
  cfg.epsilon = {1e-3};
  cfg.theta = 1.0;
  cfg.r_max = 1.0;
  cfg.r0 = 0.5;
  cfg.budget = 60;
  const Benchmark b = benchmark_by_name("example");
  NoiseModel noise;
  noise.kind = NoiseKind::AdditiveGaussian;
  noise.amp_value = 0.01;
  noise.amp_gradient = 0.01;
  const NoisyOracle oracle(b.oracle, noise, 31, b.finite_sum);
  const Trace tq = run_trqne(cfg, oracle, b.x0);
  const Trace t1 = run_tr1ne(cfg, oracle, b.x0);
  REQUIRE(tq.records.size() == t1.records.size());
  for (std::size_t i = 0; i < tq.records.size(); ++i) {
    const IterationRecord& a = tq.records[i];
    const IterationRecord& c = t1.records[i];
    REQUIRE(a.x[0] == c.x[0]);
    REQUIRE(a.r == c.r);
    REQUIRE(a.step[0] == c.step[0]);
    REQUIRE(a.decrement == c.decrement);
    REQUIRE(a.decrease == c.decrease);
    REQUIRE(a.success == c.success);
    REQUIRE(a.noisy_before == c.noisy_before);
    REQUIRE(a.noisy_after == c.noisy_after);
  }
  REQUIRE(tq.x_final[0] == t1.x_final[0]);
}

TEST_CASE("observer can stop a run early") {
  AlgoConfig cfg;
  cfg.q = 1;
  cfg.epsilon = {1e-6};
  cfg.budget = 1000;
  const NoisyOracle oracle(half_norm_squared(3), NoiseModel{}, 2);
  int seen = 0;
  const Trace t = run_trqne(cfg, oracle, Vector::Constant(3, 2.0), [&](const IterationRecord&) {
    ++seen;
    return seen < 5;
  });
  REQUIRE(seen == 5);
  REQUIRE(t.records.size() == 5);
}
