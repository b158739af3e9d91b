#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "ntrust/core.hpp"
#include "ntrust/rng.hpp"

namespace ntrust {

// Maximizer of the model decrement over a ball, with the achieved decrement
// and a solver confidence in [0, 1].
struct DisplacementResult {
  Vector displacement;
  double decrement = 0.0;
  double quality = 0.0;
};

namespace detail {

inline bool lex_less(const Vector& a, const Vector& b) {
  for (int i = 0; i < a.size(); ++i) {
    if (a[i] < b[i]) return true;
    if (a[i] > b[i]) return false;
  }
  return false;
}

}  // namespace detail

// Degree 1: maximize -g.d over ||d|| <= delta. Closed form.
inline DisplacementResult phi_order1(const Vector& g, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
  DisplacementResult out;
  const double gn = g.norm();
  if (gn == 0.0) {
    out.displacement = Vector::Zero(g.size());
    out.decrement = 0.0;
  } else {
    out.displacement = -(delta / gn) * g;
    out.decrement = delta * gn;
  }
  out.quality = 1.0;
  return out;
}

// Degree 2: maximize -(g.d + 1/2 d'Hd) over ||d|| <= delta.
// Eigendecomposition plus a secular-equation bisection for the boundary
// multiplier; the hard case (gradient orthogonal to the bottom eigenspace)
// fills the ball with a bottom eigenvector. Ties pick the lexicographically
// smallest displacement.
inline DisplacementResult phi_order2(const Vector& g, const Matrix& H, double delta, double tol = 1e-6) {
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
  if (H.rows() != g.size() || H.cols() != g.size()) throw std::invalid_argument("hessian shape does not match gradient");
  const int n = static_cast<int>(g.size());

  Eigen::SelfAdjointEigenSolver<Matrix> eig(H);
  if (eig.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
  const Vector lam = eig.eigenvalues();
  const Matrix Q = eig.eigenvectors();
  const Vector gt = Q.transpose() * g;
  const double lam_min = lam[0];
  const double scale = std::max({1.0, g.norm(), lam.cwiseAbs().maxCoeff()});

  const auto compose = [&](double mult) {
    Vector dt(n);
    for (int i = 0; i < n; ++i) {
      const double den = lam[i] + mult;
      dt[i] = den > 0.0 ? -gt[i] / den : 0.0;
    }
    return Vector(Q * dt);
  };
  const auto norm_at = [&](double mult) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      const double den = lam[i] + mult;
      if (den > 0.0) s += (gt[i] / den) * (gt[i] / den);
    }
    return std::sqrt(s);
  };

  Vector d;
  double mult = 0.0;
  if (lam_min > 0.0 && norm_at(0.0) <= delta) {
    d = compose(0.0);
  } else {
    const double lo = std::max(0.0, -lam_min);
    // Hard case test: no gradient mass on the bottom eigenspace and the
    // pseudo-solution at mult = -lam_min stays inside the ball.
    const double gap_tol = 1e-12 * scale;
    bool grad_in_bottom = false;
    for (int i = 0; i < n; ++i)
      if (lam[i] - lam_min <= gap_tol && std::abs(gt[i]) > gap_tol) grad_in_bottom = true;
    bool hard = false;
    Vector d_p;
    if (lam_min <= 0.0 && !grad_in_bottom) {
      Vector dt = Vector::Zero(n);
      for (int i = 0; i < n; ++i)
        if (lam[i] - lam_min > gap_tol) dt[i] = -gt[i] / (lam[i] - lam_min);
      d_p = Q * dt;
      if (d_p.norm() <= delta) hard = true;
    }
    if (hard) {
      mult = -lam_min;
      const double tau = std::sqrt(std::max(0.0, delta * delta - d_p.squaredNorm()));
      const Vector u = Q.col(0);
      const Vector a = d_p + tau * u;
      const Vector b = d_p - tau * u;
      d = detail::lex_less(a, b) ? a : b;
    } else {
      // ||d(mult)|| is decreasing on (max(0, -lam_min), inf); bracket and bisect.
      double a = lo;
      double step = std::max(1e-8 * scale, 1e-3 * std::abs(lam_min));
      double b = lo + step;
      while (norm_at(b) > delta) {
        b = lo + (b - lo) * 2.0;
        if (!std::isfinite(b)) throw std::runtime_error("subproblem multiplier bracket failed");
      }
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (a + b);
        if (norm_at(mid) > delta)
          a = mid;
        else
          b = mid;
      }
      mult = 0.5 * (a + b);
      d = compose(mult);
      // Boundary solution: rescale onto the sphere to absorb bisection residue.
      const double dn = d.norm();
      if (dn > 0.0) d *= delta / dn;
    }
  }

  DisplacementResult out;
  out.displacement = d;
  out.decrement = -(g.dot(d) + 0.5 * d.dot(H * d));
  const double kkt = ((H + mult * Matrix::Identity(n, n)) * d + g).norm();
  const double feas = d.norm() - delta;
  const bool boundary_ok = mult == 0.0 || std::abs(feas) <= 1e-9 * std::max(1.0, delta);
  if (feas > 1e-9 * std::max(1.0, delta) || !boundary_ok || (mult > 0.0 && kkt > std::max(tol, 1e-7) * scale * 10.0))
    throw std::runtime_error("subproblem optimality certificate failed");
  out.quality = 1.0 - tol;
  return out;
}

namespace detail {

inline double ball_decrement(const Vector& g, const Matrix& H, int degree, const Vector& d) {
  double v = g.dot(d);
  if (degree >= 2) v += 0.5 * d.dot(H * d);
  return -v;
}

inline Vector project_ball(const Vector& d, double delta) {
  const double n = d.norm();
  return n > delta ? Vector((delta / n) * d) : d;
}

inline Vector ascent_refine(const Vector& g, const Matrix& H, int degree, double delta, Vector d, int iters) {
  double best = ball_decrement(g, H, degree, d);
  double t = delta;
  for (int it = 0; it < iters; ++it) {
    Vector grad = -g;
    if (degree >= 2) grad -= H * d;
    const double gn = grad.norm();
    if (gn <= 1e-300) break;
    const Vector cand = project_ball(d + (t / gn) * grad, delta);
    const double val = ball_decrement(g, H, degree, cand);
    if (val > best) {
      d = cand;
      best = val;
      t *= 1.5;
    } else {
      t *= 0.5;
      if (t < 1e-18 * delta) break;
    }
  }
  return d;
}

}  // namespace detail

// Cross-check oracle: dense ball/sphere sampling followed by projected
// gradient ascent on the best candidates. No optimality certificate.
inline DisplacementResult phi_bruteforce(const DerivativeBundle& bundle, int degree, double delta, int samples,
                                         std::uint64_t seed) {
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
  if (degree < 1 || degree > bundle.order) throw std::invalid_argument("degree exceeds available derivatives");
  const Vector& g = bundle.gradient;
  const Matrix& H = bundle.hessian;
  const int n = static_cast<int>(g.size());
  Rng rng(seed);

  Vector best_d = Vector::Zero(n);
  double best = 0.0;
  std::vector<std::pair<double, Vector>> top;
  const auto consider = [&](const Vector& d) {
    const double v = detail::ball_decrement(g, H, degree, d);
    if (v > best) {
      best = v;
      best_d = d;
    }
    top.emplace_back(v, d);
  };
  for (int i = 0; i < samples; ++i) {
    consider(i % 2 == 0 ? rng.next_on_sphere(n, delta) : rng.next_in_ball(n, delta));
  }
  std::partial_sort(top.begin(), top.begin() + std::min<std::size_t>(top.size(), 32), top.end(),
                    [](const auto& a, const auto& b) { return a.first > b.first; });
  const std::size_t refine_count = std::min<std::size_t>(top.size(), 32);
  for (std::size_t i = 0; i < refine_count; ++i) {
    const Vector d = detail::ascent_refine(g, H, degree, delta, top[i].second, 400);
    const double v = detail::ball_decrement(g, H, degree, d);
    if (v > best) {
      best = v;
      best_d = d;
    }
  }
  return DisplacementResult{best_d, best, 0.0};
}

// Dispatch on the model degree.
inline DisplacementResult phi_solve(const DerivativeBundle& bundle, int degree, double delta, double tol = 1e-6) {
  if (degree == 1) return phi_order1(bundle.gradient, delta);
  if (degree == 2) return phi_order2(bundle.gradient, bundle.hessian, delta, tol);
  throw std::invalid_argument("degree must be 1 or 2");
}

}  // namespace ntrust
