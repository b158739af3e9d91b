#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

namespace ntrust {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline double factorial(int n) {
  double out = 1.0;
  for (int i = 2; i <= n; ++i) out *= static_cast<double>(i);
  return out;
}

// Value and derivatives of one function at one point, up to `order` (1 or 2).
// `hessian` has size 0 when order == 1.
struct DerivativeBundle {
  double value = 0.0;
  Vector gradient;
  Matrix hessian;
  int order = 1;

  int dimension() const { return static_cast<int>(gradient.size()); }
};

inline void check_bundle(const DerivativeBundle& b) {
  if (b.order < 1 || b.order > 2) throw std::invalid_argument("derivative order must be 1 or 2");
  if (b.order == 2) {
    if (b.hessian.rows() != b.gradient.size() || b.hessian.cols() != b.gradient.size())
      throw std::invalid_argument("hessian shape does not match gradient");
    const double asym = (b.hessian - b.hessian.transpose()).cwiseAbs().maxCoeff();
    const double scale = std::max(1.0, b.hessian.cwiseAbs().maxCoeff());
    if (asym > 1e-12 * scale) throw std::invalid_argument("hessian is not symmetric");
  }
}

// Truncated Taylor expansion of degree <= bundle.order anchored at `center`.
struct TaylorModel {
  Vector center;
  DerivativeBundle bundle;
  int degree = 1;
};

inline TaylorModel make_model(Vector center, DerivativeBundle bundle, int degree) {
  check_bundle(bundle);
  if (degree < 1 || degree > bundle.order) throw std::invalid_argument("model degree exceeds available derivatives");
  return TaylorModel{std::move(center), std::move(bundle), degree};
}

// t(x, s) = f(x) + g.s (+ 1/2 s'Hs for degree 2).
inline double taylor_value(const TaylorModel& m, const Vector& s) {
  double v = m.bundle.value + m.bundle.gradient.dot(s);
  if (m.degree >= 2) v += 0.5 * s.dot(m.bundle.hessian * s);
  return v;
}

// Decrement t(x, 0) - t(x, s) = -(g.s + 1/2 s'Hs). Independent of f(x).
inline double taylor_decrement(const TaylorModel& m, const Vector& s) {
  double v = m.bundle.gradient.dot(s);
  if (m.degree >= 2) v += 0.5 * s.dot(m.bundle.hessian * s);
  return -v;
}

// Per-order Lipschitz constants for the derivative tensors; entry j-1 bounds
// the Lipschitz constant of the j-th derivative on the region of interest.
struct LipschitzEstimate {
  std::vector<double> per_order;

  double order(int j) const {
    if (j < 1 || j > static_cast<int>(per_order.size())) throw std::invalid_argument("no Lipschitz constant for this order");
    return per_order[static_cast<std::size_t>(j - 1)];
  }

  // max(1, max_j per_order[j]).
  double aggregate() const {
    double m = 1.0;
    for (double v : per_order) m = std::max(m, v);
    return m;
  }
};

// Exact problem access: value/gradient/hessian callables plus a known lower
// bound on f. `hessian_fn` may be empty for problems used only at order 1.
struct ExactOracle {
  int dimension = 0;
  std::function<double(const Vector&)> value_fn;
  std::function<Vector(const Vector&)> gradient_fn;
  std::function<Matrix(const Vector&)> hessian_fn;
  double f_low = 0.0;

  double value(const Vector& x) const { return value_fn(x); }
  Vector gradient(const Vector& x) const { return gradient_fn(x); }
  Matrix hessian(const Vector& x) const {
    if (!hessian_fn) throw std::runtime_error("problem provides no hessian");
    return hessian_fn(x);
  }

  DerivativeBundle bundle(const Vector& x, int order) const {
    DerivativeBundle b;
    b.order = order;
    b.value = value(x);
    b.gradient = gradient(x);
    if (order >= 2) b.hessian = hessian(x);
    check_bundle(b);
    return b;
  }

  TaylorModel model(const Vector& x, int degree) const { return make_model(x, bundle(x, degree), degree); }
};

// True when |f(x+s) - t_j(x, s)| <= lip(j)/(j+1)! * ||s||^(j+1), with a small
// absolute slack for floating point cancellation in the left-hand side.
inline bool remainder_bound_check(const ExactOracle& oracle, const Vector& x, const Vector& s, int degree,
                                  const LipschitzEstimate& lip, double slack = 1e-10) {
  const TaylorModel m = oracle.model(x, degree);
  const double lhs = std::abs(oracle.value(x + s) - taylor_value(m, s));
  const double rhs = lip.order(degree) / factorial(degree + 1) * std::pow(s.norm(), degree + 1);
  return lhs <= rhs + slack;
}

}  // namespace ntrust
