#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "ntrust/core.hpp"
#include "ntrust/example_problem.hpp"
#include "ntrust/oracle.hpp"

namespace ntrust {

// A test problem: exact oracle, derivative Lipschitz envelopes valid on the
// stated box, a start point, and the finite-sum structure where one exists.
struct Benchmark {
  std::string name;
  ExactOracle oracle;
  LipschitzEstimate lip;
  Vector x0;
  Vector box_lo, box_hi;
  std::shared_ptr<const FiniteSumProblem> finite_sum;
  ExampleProblem example;
  bool has_example = false;
};

// f = x'Ax/2 with A = diag(1..n). Exact quadratic: degree-2 models are exact.
inline Benchmark make_quadratic(int n = 10) {
  Benchmark b;
  b.name = "quadratic";
  Vector diag(n);
  for (int i = 0; i < n; ++i) diag[i] = static_cast<double>(i + 1);
  b.oracle.dimension = n;
  b.oracle.value_fn = [diag](const Vector& x) { return 0.5 * x.dot(diag.asDiagonal() * x); };
  b.oracle.gradient_fn = [diag](const Vector& x) { return Vector(diag.asDiagonal() * x); };
  b.oracle.hessian_fn = [diag](const Vector&) { return Matrix(diag.asDiagonal()); };
  b.oracle.f_low = 0.0;
  b.lip.per_order = {static_cast<double>(n), 0.0};
  b.x0 = Vector::Constant(n, 2.0);
  b.box_lo = Vector::Constant(n, -5.0);
  b.box_hi = Vector::Constant(n, 5.0);
  return b;
}

// Scaled two-dimensional valley f = c [100 (y - x^2)^2 + (1 - x)^2] with
// c = 0.05. Lipschitz envelopes are Frobenius bounds of the second and third
// derivative tensors over the box [-2,2] x [-1,3].
inline Benchmark make_rosenbrock() {
  constexpr double c = 0.05;
  Benchmark b;
  b.name = "rosenbrock";
  b.oracle.dimension = 2;
  b.oracle.value_fn = [](const Vector& v) {
    const double x = v[0], y = v[1];
    return c * (100.0 * (y - x * x) * (y - x * x) + (1.0 - x) * (1.0 - x));
  };
  b.oracle.gradient_fn = [](const Vector& v) {
    const double x = v[0], y = v[1];
    Vector g(2);
    g[0] = c * (-400.0 * x * (y - x * x) - 2.0 * (1.0 - x));
    g[1] = c * 200.0 * (y - x * x);
    return g;
  };
  b.oracle.hessian_fn = [](const Vector& v) {
    const double x = v[0], y = v[1];
    Matrix h(2, 2);
    h(0, 0) = c * (-400.0 * y + 1200.0 * x * x + 2.0);
    h(0, 1) = h(1, 0) = c * -400.0 * x;
    h(1, 1) = c * 200.0;
    return h;
  };
  b.oracle.f_low = 0.0;
  // sqrt(6002^2 + 2*800^2 + 200^2) and sqrt(4*2400^2 + 3*400^2), scaled by c.
  b.lip.per_order = {c * 6112.0, c * 4850.0};
  b.x0 = Vector(2);
  b.x0 << -1.2, 1.0;
  b.box_lo = Vector(2);
  b.box_lo << -2.0, -1.0;
  b.box_hi = Vector(2);
  b.box_hi << 2.0, 3.0;
  return b;
}

// f = sum_i cos(x_i). Globally valid envelopes; the point (0, pi) is a
// saddle with Hessian diag(-1, 1), which exercises degree-2 selection.
inline Benchmark make_trig(int n = 2) {
  Benchmark b;
  b.name = "trig";
  b.oracle.dimension = n;
  b.oracle.value_fn = [](const Vector& x) { return x.array().cos().sum(); };
  b.oracle.gradient_fn = [](const Vector& x) { return Vector(-x.array().sin()); };
  b.oracle.hessian_fn = [](const Vector& x) { return Matrix(Vector(-x.array().cos()).asDiagonal()); };
  b.oracle.f_low = -static_cast<double>(n);
  b.lip.per_order = {1.0, 1.0};
  b.x0 = Vector::Constant(n, 0.4);
  if (n >= 2) b.x0[n - 1] = M_PI - 0.4;
  b.box_lo = Vector::Constant(n, -2.0 * M_PI);
  b.box_hi = Vector::Constant(n, 2.0 * M_PI);
  return b;
}

// One-dimensional finite-sum family with closed-form noise behavior.
inline Benchmark make_example(std::int64_t m = 1000, double alpha = 0.5) {
  Benchmark b;
  b.name = "example";
  b.example = ExampleProblem{m, alpha};
  b.has_example = true;
  b.oracle = b.example.exact();
  b.lip.per_order = {1.0};
  b.x0 = Vector::Constant(1, 1.5);
  b.box_lo = Vector::Constant(1, -4.0);
  b.box_hi = Vector::Constant(1, 4.0);
  b.finite_sum = b.example.finite_sum();
  return b;
}

inline std::vector<std::string> benchmark_names() { return {"quadratic", "rosenbrock", "trig", "example"}; }

inline Benchmark benchmark_by_name(const std::string& name) {
  if (name == "quadratic") return make_quadratic();
  if (name == "rosenbrock") return make_rosenbrock();
  if (name == "trig") return make_trig();
  if (name == "example") return make_example();
  throw std::invalid_argument("unknown problem: " + name);
}

}  // namespace ntrust
