#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>

#include "ntrust/core.hpp"
#include "ntrust/oracle.hpp"

namespace ntrust {

// One-dimensional finite-sum family over the signed universe {-m..m}\{0}:
//   f_i(x) = x^2/2 + (alpha/2) sgn(i) exp(-x^2),
// whose exact mean is f(x) = x^2/2. Subsampled estimates depend on the data
// only through the mean component sign of the batch, which makes every
// accuracy event a closed-form region in that statistic.
struct ExampleProblem {
  std::int64_t m = 1000;
  double alpha = 0.5;

  double component_value(std::int64_t i, double x) const {
    return 0.5 * x * x + 0.5 * alpha * (i < 0 ? -1.0 : 1.0) * std::exp(-x * x);
  }

  double component_gradient(std::int64_t i, double x) const {
    return x * (1.0 - alpha * (i < 0 ? -1.0 : 1.0) * std::exp(-x * x));
  }

  ExactOracle exact() const {
    ExactOracle o;
    o.dimension = 1;
    o.value_fn = [](const Vector& x) { return 0.5 * x[0] * x[0]; };
    o.gradient_fn = [](const Vector& x) { return Vector::Constant(1, x[0]); };
    o.hessian_fn = [](const Vector&) { return Matrix::Constant(1, 1, 1.0); };
    o.f_low = 0.0;
    return o;
  }

  std::shared_ptr<const FiniteSumProblem> finite_sum() const {
    auto p = std::make_shared<FiniteSumProblem>();
    p->m = m;
    p->signed_universe = true;
    const double a = alpha;
    p->component_value = [a](std::int64_t i, const Vector& x) {
      return 0.5 * x[0] * x[0] + 0.5 * a * (i < 0 ? -1.0 : 1.0) * std::exp(-x[0] * x[0]);
    };
    p->component_gradient = [a](std::int64_t i, const Vector& x) {
      return Vector::Constant(1, x[0] * (1.0 - a * (i < 0 ? -1.0 : 1.0) * std::exp(-x[0] * x[0])));
    };
    return p;
  }

  // Envelopes for the Bernstein exponents, measurable before the iteration:
  // per-component decrease ranges over at most r (|x| + r)(1 + alpha) on a
  // step of length r, and per-component gradients over |x| (1 + alpha).
  double kappa_value(double x, double r) const { return r * (std::abs(x) + r) * (1.0 + alpha); }
  double kappa_gradient(double x) const { return std::abs(x) * (1.0 + alpha); }
};

// Closed-form subsampled estimates given the batch sign statistics.
struct ExampleComponents {
  double f_exact = 0.0;
  double grad_exact = 0.0;
  double f_noisy = 0.0;
  double grad_noisy = 0.0;
};

inline ExampleComponents example_components(const ExampleProblem& p, double x, double psi0, double psi1) {
  ExampleComponents out;
  const double e = std::exp(-x * x);
  out.f_exact = 0.5 * x * x;
  out.grad_exact = x;
  out.f_noisy = 0.5 * x * x + 0.5 * p.alpha * psi0 * e;
  out.grad_noisy = x * (1.0 - p.alpha * psi1 * e);
  return out;
}

// Acceptance regions of the accuracy events in the sign statistics, for the
// first-order method at the point x. Boundaries are closed.

// Model event, gradient-norm band: |1 - alpha psi exp(-x^2)| >= 1/(1+nu).
inline bool acceptance_region_m1(double psi, double alpha, double x, double nu) {
  return std::abs(1.0 - alpha * psi * std::exp(-x * x)) >= 1.0 / (1.0 + nu);
}

inline double m1_threshold_low(double alpha, double x, double nu) {
  return std::exp(x * x) / alpha * (1.0 - 1.0 / (1.0 + nu));
}

inline double m1_threshold_high(double alpha, double x, double nu) {
  return std::exp(x * x) / alpha * (1.0 + 1.0 / (1.0 + nu));
}

// Two-sided band: 1/(1+nu) <= 1 - alpha psi exp(-x^2) <= 1/(1-nu).
inline bool acceptance_region_m2(double psi, double alpha, double x, double nu) {
  const double t = 1.0 - alpha * psi * std::exp(-x * x);
  return t >= 1.0 / (1.0 + nu) && t <= 1.0 / (1.0 - nu);
}

inline double m2_threshold_low(double alpha, double x, double nu) {
  return std::exp(x * x) / alpha * (1.0 - 1.0 / (1.0 - nu));
}

inline double m2_threshold_high(double alpha, double x, double nu) { return m1_threshold_low(alpha, x, nu); }

inline double m2_width(double alpha, double x, double nu) {
  return m2_threshold_high(alpha, x, nu) - m2_threshold_low(alpha, x, nu);
}

// Decrease event at the step s taken from x with radius |s|:
//   (alpha/2) |psi0| |exp(-x^2) - exp(-(x+s)^2)| <= 2 nu |s| |x| |1 - alpha psi1 exp(-x^2)|.
inline bool acceptance_region_f(double psi0, double psi1, double alpha, double x, double s, double nu) {
  const double lhs = 0.5 * alpha * std::abs(psi0) * std::abs(std::exp(-x * x) - std::exp(-(x + s) * (x + s)));
  const double rhs = 2.0 * nu * std::abs(s) * std::abs(x) * std::abs(1.0 - alpha * psi1 * std::exp(-x * x));
  return lhs <= rhs;
}

}  // namespace ntrust
