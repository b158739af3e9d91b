#include <catch2/catch_amalgamated.hpp>

#include "ntrust/core.hpp"
#include "ntrust/problems.hpp"
#include "ntrust/rng.hpp"
#include "ntrust/subproblem.hpp"

using namespace ntrust;

TEST_CASE("factorials used by the model weights") {
  REQUIRE(factorial(0) == 1.0);
  REQUIRE(factorial(1) == 1.0);
  REQUIRE(factorial(2) == 2.0);
  REQUIRE(factorial(5) == 120.0);
}

TEST_CASE("taylor model evaluates the weighted expansion") {
  DerivativeBundle b;
  b.value = 1.0;
  b.gradient = Vector::Constant(1, 4.0);
  b.hessian = Matrix::Constant(1, 1, 12.0);
  b.order = 2;
  const TaylorModel m = make_model(Vector::Zero(1), b, 2);
  const Vector s = Vector::Constant(1, 0.5);
  // 1 + 4*0.5 + 12*0.25/2
  REQUIRE(taylor_value(m, s) == Catch::Approx(4.5).margin(1e-14));
  REQUIRE(taylor_decrement(m, s) == Catch::Approx(1.0 - 4.5).margin(1e-14));
}

TEST_CASE("bundle validation rejects malformed derivatives") {
  DerivativeBundle b;
  b.value = 0.0;
  b.gradient = Vector::Zero(2);
  b.hessian = Matrix::Zero(2, 2);
  b.order = 2;
  REQUIRE_NOTHROW(check_bundle(b));
  b.hessian(0, 1) = 1.0;  // asymmetric
  REQUIRE_THROWS_AS(check_bundle(b), std::invalid_argument);
  b.hessian(1, 0) = 1.0;
  b.order = 3;
  REQUIRE_THROWS_AS(check_bundle(b), std::invalid_argument);
}

TEST_CASE("first-order ball maximizer has its closed form") {
  Vector g(2);
  g << 3.0, 4.0;
  const DisplacementResult r = phi_order1(g, 0.1);
  REQUIRE(r.displacement[0] == Catch::Approx(-0.06).margin(1e-15));
  REQUIRE(r.displacement[1] == Catch::Approx(-0.08).margin(1e-15));
  REQUIRE(r.decrement == Catch::Approx(0.5).margin(1e-15));
  REQUIRE_THROWS_AS(phi_order1(g, 0.0), std::invalid_argument);

  const DisplacementResult z = phi_order1(Vector::Zero(3), 1.0);
  REQUIRE(z.decrement == 0.0);
  REQUIRE(z.displacement.norm() == 0.0);
}

TEST_CASE("second-order maximizer handles the pure eigenstep") {
  Vector g = Vector::Zero(2);
  Matrix h = Matrix::Zero(2, 2);
  h(0, 0) = -2.0;
  h(1, 1) = 1.0;
  const DisplacementResult r = phi_order2(g, h, 1.0);
  REQUIRE(r.decrement == Catch::Approx(1.0).margin(1e-9));
  REQUIRE(r.displacement[0] == Catch::Approx(-1.0).margin(1e-9));
  REQUIRE(r.displacement[1] == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("second-order maximizer agrees with sampling on random instances") {
  Rng rng(91);
  for (int i = 0; i < 10; ++i) {
    const int n = 2 + static_cast<int>(rng.next_below(3));
    Matrix a(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) a(r, c) = rng.next_normal();
    const Matrix h = 0.5 * (a + a.transpose());
    const Vector g = rng.next_gaussian_vector(n);
    DerivativeBundle b;
    b.order = 2;
    b.gradient = g;
    b.hessian = h;
    const double delta = rng.next_uniform(0.2, 1.5);
    const DisplacementResult exact = phi_order2(g, h, delta, 1e-9);
    const DisplacementResult approx = phi_bruteforce(b, 2, delta, 40000, 1234 + i);
    REQUIRE(exact.decrement >= approx.decrement - 1e-6 * std::max(1.0, approx.decrement));
    REQUIRE(std::abs(exact.decrement - approx.decrement) <= 2e-3 * std::max(1.0, std::abs(exact.decrement)));
  }
}

TEST_CASE("remainder envelopes hold on the benchmark boxes") {
  for (const std::string& name : benchmark_names()) {
    const Benchmark b = benchmark_by_name(name);
    Rng rng(7);
    for (int i = 0; i < 50; ++i) {
      Vector x(b.box_lo.size()), y(b.box_lo.size());
      for (int d = 0; d < x.size(); ++d) {
        x[d] = rng.next_uniform(b.box_lo[d], b.box_hi[d]);
        y[d] = rng.next_uniform(b.box_lo[d], b.box_hi[d]);
      }
      for (int degree = 1; degree <= static_cast<int>(b.lip.per_order.size()); ++degree)
        REQUIRE(remainder_bound_check(b.oracle, x, Vector(y - x), degree, b.lip));
    }
  }
}
