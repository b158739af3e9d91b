#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "ntrust/config.hpp"
#include "ntrust/core.hpp"
#include "ntrust/oracle.hpp"
#include "ntrust/subproblem.hpp"
#include "ntrust/trace.hpp"

namespace ntrust {

enum class Method { TRqNE, TR1NE };

// Closed-set inequality with relative slack: event boundaries are closed, and
// the slack keeps subproblem-solver roundoff from flipping boundary cases.
inline bool leq_slack(double lhs, double rhs, double slack = 1e-9) {
  return lhs <= rhs + slack * std::max({1.0, std::abs(lhs), std::abs(rhs)});
}

// Exact optimality measures phi_j(delta) for j = 1..q.
inline std::vector<double> optimality_measures(const ExactOracle& exact, const Vector& x, double delta, int q,
                                               double tol = 1e-9) {
  const DerivativeBundle b = exact.bundle(x, q);
  std::vector<double> out;
  for (int j = 1; j <= q; ++j) out.push_back(phi_solve(b, j, delta, tol).decrement);
  return out;
}

// Accuracy criterion: phi_j(delta) <= eps_j delta^j / j! for every j <= q.
inline bool optimality_hit(const ExactOracle& exact, const Vector& x, double delta, const AlgoConfig& cfg,
                           double slack = 1e-12) {
  const std::vector<double> phi = optimality_measures(exact, x, delta, cfg.q, cfg.subproblem_tol);
  for (int j = 1; j <= cfg.q; ++j) {
    const double rhs = cfg.epsilon[static_cast<std::size_t>(j - 1)] * std::pow(delta, j) / factorial(j);
    if (!leq_slack(phi[static_cast<std::size_t>(j - 1)], rhs, slack)) return false;
  }
  return true;
}

namespace detail {

// Noisy model decrement of degree j at displacement v.
inline double noisy_decrement_at(const DerivativeBundle& noisy, int j, const Vector& v) {
  double s = noisy.gradient.dot(v);
  if (j >= 2) s += 0.5 * v.dot(noisy.hessian * v);
  return -s;
}

// Raw error tensor application |(est - exact)[v]^l| for l = 1, 2.
inline double error_tensor_apply(const DerivativeBundle& noisy, const DerivativeBundle& exact_b, int l,
                                 const Vector& v) {
  if (l == 1) return std::abs((noisy.gradient - exact_b.gradient).dot(v));
  return std::abs(v.dot((noisy.hessian - exact_b.hessian) * v));
}

}  // namespace detail

// Model-accuracy event. For the adaptive method this is the per-degree
// comparison of exact optimality measures against noisy decrements plus the
// two-sided decrement band at the step; for the first-order method it is the
// gradient-norm band |  ||g|| - ||gbar||  | <= nu ||gbar||.
inline void detect_m(IterationRecord& rec, const ExactOracle& exact, const AlgoConfig& cfg, Method method,
                     double slack = 1e-9) {
  const double nu = cfg.nu();
  rec.events.m1.clear();
  if (method == Method::TR1NE) {
    const double gn_exact = exact.gradient(rec.x).norm();
    const double gn_noisy = rec.noisy_bundle.gradient.norm();
    const bool band = leq_slack(std::abs(gn_exact - gn_noisy), nu * gn_noisy, slack);
    rec.events.m1.push_back(band);
    rec.events.m1_all = band;
    rec.events.m2 = band;
    rec.events.m = band;
    return;
  }
  const DerivativeBundle eb = exact.bundle(rec.x, rec.j_k);
  rec.events.m1_all = true;
  for (int j = 1; j <= rec.j_k; ++j) {
    const double phi_exact = phi_solve(eb, j, rec.delta, cfg.subproblem_tol).decrement;
    const double rhs = (1.0 + nu) / cfg.varsigma * rec.candidates[static_cast<std::size_t>(j - 1)].decrement;
    const bool ok = leq_slack(phi_exact, rhs, slack);
    rec.events.m1.push_back(ok);
    rec.events.m1_all = rec.events.m1_all && ok;
  }
  const double dt_exact = -([&] {
    double s = eb.gradient.dot(rec.step);
    if (rec.j_k >= 2) s += 0.5 * rec.step.dot(eb.hessian * rec.step);
    return s;
  }());
  rec.events.m2 = leq_slack((1.0 - nu) * rec.decrement, dt_exact, slack) &&
                  leq_slack(dt_exact, (1.0 + nu) * rec.decrement, slack);
  rec.events.m = rec.events.m1_all && rec.events.m2;
}

// Function-accuracy event: the noisy decrease tracks the exact decrease to
// within 2 nu times the model decrement at the step.
inline void detect_f(IterationRecord& rec, const ExactOracle& exact, const AlgoConfig& cfg, double slack = 1e-9) {
  const double df_exact = exact.value(rec.x) - exact.value(rec.x + rec.step);
  rec.events.f = leq_slack(std::abs(df_exact - rec.decrease), 2.0 * cfg.nu() * rec.decrement, slack);
}

// Derivative-error conditions that provably imply the model-accuracy event:
// the error tensors applied to the taken step and to the exact maximizers of
// each tried degree are small relative to the corresponding noisy decrements.
inline void check_sufficient_conditions(IterationRecord& rec, const ExactOracle& exact, const AlgoConfig& cfg,
                                        double slack = 1e-9) {
  const double half_nu = 0.5 * cfg.nu();
  const DerivativeBundle eb = exact.bundle(rec.x, rec.j_k);
  bool ok = true;
  const double dt_step = detail::noisy_decrement_at(rec.noisy_bundle, rec.j_k, rec.step);
  for (int l = 1; l <= rec.j_k && ok; ++l)
    ok = leq_slack(detail::error_tensor_apply(rec.noisy_bundle, eb, l, rec.step), half_nu * dt_step, slack);
  for (int j = 1; j <= rec.j_k && ok; ++j) {
    const Vector d_hat = phi_solve(eb, j, rec.delta, cfg.subproblem_tol).displacement;
    const double dt_hat = detail::noisy_decrement_at(rec.noisy_bundle, j, d_hat);
    for (int l = 1; l <= j && ok; ++l)
      ok = leq_slack(detail::error_tensor_apply(rec.noisy_bundle, eb, l, d_hat), half_nu * dt_hat, slack);
  }
  rec.events.sufficient = ok;
}

// First-order vector-error events; each implies its plain counterpart.
inline void detect_tilde_events(IterationRecord& rec, const ExactOracle& exact, const AlgoConfig& cfg,
                                double slack = 1e-9) {
  const double nu = cfg.nu();
  const Vector g = exact.gradient(rec.x);
  const double gn_noisy = rec.noisy_bundle.gradient.norm();
  rec.events.tilde_m = leq_slack((g - rec.noisy_bundle.gradient).norm(), nu * gn_noisy, slack);
  const double df_exact = exact.value(rec.x) - exact.value(rec.x + rec.step);
  rec.events.tilde_f =
      leq_slack(std::abs(df_exact - rec.decrease), 2.0 * nu * gn_noisy * std::min(1.0, rec.r), slack);
}

// Fill every event flag of one record.
inline void detect_events(IterationRecord& rec, const ExactOracle& exact, const AlgoConfig& cfg, Method method,
                          double slack = 1e-9) {
  detect_m(rec, exact, cfg, method, slack);
  detect_f(rec, exact, cfg, slack);
  if (method == Method::TR1NE) {
    detect_tilde_events(rec, exact, cfg, slack);
    rec.events.sufficient = rec.events.tilde_m && rec.events.tilde_f;
  } else {
    check_sufficient_conditions(rec, exact, cfg, slack);
  }
  rec.events.e = rec.events.m && rec.events.f;
  rec.events.computed = true;
}

inline void detect_events(Trace& trace, const ExactOracle& exact, const AlgoConfig& cfg, double slack = 1e-9) {
  const Method method = trace.algorithm == "tr1ne" ? Method::TR1NE : Method::TRqNE;
  for (IterationRecord& rec : trace.records) detect_events(rec, exact, cfg, method, slack);
}

// Iteration classes before the hitting time, split at the radius threshold.
// Counters named over the closure use R_k >= r_bar; n_U and n_lambda use the
// strict set R_k > r_bar.
struct ClassCounts {
  std::int64_t n_eps = 0;
  bool censored = false;
  std::int64_t n_lambda = 0;
  std::int64_t n_lambda_bar = 0;
  std::int64_t n_closure = 0;
  std::int64_t n_I = 0;
  std::int64_t n_A = 0;
  std::int64_t n_AS = 0;
  std::int64_t n_AU = 0;
  std::int64_t n_IS = 0;
  std::int64_t n_S = 0;
  std::int64_t n_U = 0;
};

// Hitting time of the accuracy criterion along a trace, evaluated with the
// exact oracle at each iterate with that iteration's model ball.
inline std::int64_t hitting_time(const Trace& trace, const ExactOracle& exact, const AlgoConfig& cfg,
                                 bool* censored = nullptr) {
  const Method method = trace.algorithm == "tr1ne" ? Method::TR1NE : Method::TRqNE;
  for (const IterationRecord& rec : trace.records) {
    const bool hit = method == Method::TR1NE ? rec.grad_norm_exact <= cfg.epsilon[0]
                                             : optimality_hit(exact, rec.x, rec.delta, cfg);
    if (hit) {
      if (censored) *censored = false;
      return rec.k;
    }
  }
  if (censored) *censored = true;
  return static_cast<std::int64_t>(trace.records.size());
}

// Requires event flags to be filled (detect_events) beforehand.
inline ClassCounts classify_trace(const Trace& trace, const ExactOracle& exact, const AlgoConfig& cfg, double r_bar) {
  ClassCounts out;
  out.n_eps = hitting_time(trace, exact, cfg, &out.censored);
  for (const IterationRecord& rec : trace.records) {
    if (rec.k >= out.n_eps) break;
    const bool strict = rec.r > r_bar;
    const bool closure = rec.r >= r_bar;
    if (strict) ++out.n_lambda;
    if (!strict) ++out.n_lambda_bar;
    if (strict && !rec.success) ++out.n_U;
    if (closure) {
      ++out.n_closure;
      if (rec.events.e) {
        ++out.n_A;
        if (rec.success)
          ++out.n_AS;
        else
          ++out.n_AU;
      } else {
        ++out.n_I;
        if (rec.success) ++out.n_IS;
      }
      if (rec.success) ++out.n_S;
    }
  }
  return out;
}

// Per-iteration output of the degraded-accuracy analysis: the gradient
// threshold bbar_k from Bernstein quantiles at confidence level alpha_star,
// and the large-gradient indicators it defines.
struct DegradedRecord {
  double b_bound = 0.0;
  double b_bar = 0.0;
  double grad_ratio = 0.0;
  bool g_exact = false;
  bool g_noisy = false;
};

inline DegradedRecord degraded_optimality_check(const IterationRecord& rec, double alpha_star, double nu,
                                                std::int64_t batch_value, std::int64_t batch_gradient, double kappa_f,
                                                double kappa_g, int dim) {
  if (!(alpha_star > 0.0 && alpha_star < 1.0)) throw std::invalid_argument("alpha_star must be in (0,1)");
  const double root = std::sqrt(alpha_star);
  const double c0 = -std::log(1.0 - root);
  const double c1 = std::log(static_cast<double>(dim + 1) / (1.0 - root));
  const double b0 = bernstein_quantile(c0, batch_value, kappa_f);
  const double b1 = bernstein_quantile(c1, batch_gradient, kappa_g);
  DegradedRecord out;
  out.b_bound = std::max(b0, b1);
  out.b_bar = out.b_bound / (nu * std::min(1.0, rec.r));
  out.grad_ratio = rec.grad_norm_exact / (2.0 * out.b_bar);
  out.g_exact = out.grad_ratio >= 1.0;
  out.g_noisy = rec.noisy_bundle.gradient.norm() >= out.b_bar;
  return out;
}

// Empirical frequency of an event across traces.
struct EventRate {
  std::int64_t total = 0;
  std::int64_t hit = 0;
  double rate() const { return total > 0 ? static_cast<double>(hit) / static_cast<double>(total) : 0.0; }
};

// Empirical estimate of the per-iteration accuracy probability from an
// ensemble of traces with event flags filled.
inline EventRate as3_estimate(const std::vector<Trace>& traces) {
  EventRate out;
  for (const Trace& t : traces)
    for (const IterationRecord& rec : t.records) {
      ++out.total;
      if (rec.events.e) ++out.hit;
    }
  return out;
}

// Expected-decrement condition: the noisy model decrement clears the tail
// integral of the decrease-error distribution scaled by 1/eta. Inclusive.
inline bool expectation_condition_check(double decrement, double threshold) { return decrement >= threshold; }

}  // namespace ntrust
