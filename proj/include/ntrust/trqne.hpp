#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "ntrust/config.hpp"
#include "ntrust/core.hpp"
#include "ntrust/oracle.hpp"
#include "ntrust/subproblem.hpp"
#include "ntrust/trace.hpp"

namespace ntrust {

// Constants the complexity analysis runs on. r_bar is the radius below which
// exact-and-accurate iterations at non-stationary points must succeed.
struct ThresholdConstants {
  double vartheta_f = 1.0;
  double kappa_r = 0.0;
  double r_bar = 0.0;
  double kappa_delta = 0.0;
};

inline ThresholdConstants threshold_constants(const AlgoConfig& cfg, const LipschitzEstimate& lip) {
  ThresholdConstants out;
  out.vartheta_f = lip.aggregate();
  const double nu = cfg.nu();
  out.kappa_r = cfg.varsigma * (1.0 - cfg.eta) / (4.0 * (1.0 + nu) * out.vartheta_f);
  out.r_bar = std::min(cfg.theta, out.kappa_r * cfg.epsilon_min());
  out.kappa_delta = out.kappa_r / (1.0 + nu);
  return out;
}

// Expected-iteration bound before the accuracy criterion holds, for event
// probability p_star > 1/2.
inline double iteration_bound(const AlgoConfig& cfg, const LipschitzEstimate& lip, double f0, double f_low,
                              double p_star) {
  const ThresholdConstants tc = threshold_constants(cfg, lip);
  const double em = cfg.epsilon_min();
  const double front = 2.0 * p_star / ((2.0 * p_star - 1.0) * (2.0 * p_star - 1.0));
  const double main_term = 4.0 * factorial(cfg.q) * (f0 - f_low) /
                           (cfg.varsigma * cfg.eta * std::pow(tc.kappa_delta * em, cfg.q + 1));
  const double log_term = std::ceil(std::log(cfg.r0 / tc.r_bar) / std::log(cfg.gamma));
  return front * (main_term + log_term + 2.0);
}

// Outcome of the degree-selection loop: displacement candidates for every
// degree tried, the derivative estimates used, and whether the selection
// fell through to degree q without meeting the decrement threshold.
struct DegreeSelection {
  int j_k = 1;
  bool fallthrough = false;
  DerivativeBundle bundle;
  std::vector<DisplacementResult> candidates;
};

// Degree threshold on the model decrement for accepting degree j.
inline double degree_threshold(const AlgoConfig& cfg, int j, double delta) {
  return cfg.varsigma * cfg.epsilon[static_cast<std::size_t>(j - 1)] / (1.0 + cfg.nu()) * std::pow(delta, j) /
         factorial(j);
}

// Try degrees 1..q; accept the first whose candidate decrement strictly
// exceeds its threshold, else fall through to degree q.
inline DegreeSelection select_degree(const NoisyOracle& oracle, const Vector& x, double delta, const AlgoConfig& cfg,
                                     std::int64_t iteration) {
  DegreeSelection sel;
  for (int j = 1; j <= cfg.q; ++j) {
    sel.bundle = oracle.eval(x, j, iteration);
    sel.candidates.push_back(phi_solve(sel.bundle, j, delta, cfg.subproblem_tol));
    if (sel.candidates.back().decrement > degree_threshold(cfg, j, delta)) {
      sel.j_k = j;
      sel.fallthrough = false;
      return sel;
    }
  }
  sel.j_k = cfg.q;
  sel.fallthrough = true;
  return sel;
}

// Step for the full radius. Inside theta the displacement is the step; when
// r exceeds the model ball, re-solve at radius r and keep whichever
// candidate has the larger model decrement.
inline DisplacementResult compute_step(const DegreeSelection& sel, double r, double delta, const AlgoConfig& cfg) {
  const DisplacementResult& d = sel.candidates[static_cast<std::size_t>(sel.j_k - 1)];
  if (r <= delta) return d;
  const DisplacementResult wide = phi_solve(sel.bundle, sel.j_k, r, cfg.subproblem_tol);
  return wide.decrement >= d.decrement ? wide : d;
}

struct RunState {
  Vector x;
  double r = 0.0;
  double noisy_value = 0.0;
  bool have_noisy_value = false;
};

inline IterationRecord trqne_iterate(const NoisyOracle& oracle, RunState& state, const AlgoConfig& cfg,
                                     std::int64_t k) {
  IterationRecord rec;
  rec.k = k;
  rec.x = state.x;
  rec.r = state.r;
  rec.delta = std::min(state.r, cfg.theta);

  DegreeSelection sel = select_degree(oracle, state.x, rec.delta, cfg, k);
  rec.j_k = sel.j_k;
  rec.fallthrough = sel.fallthrough;
  rec.displacement = sel.candidates[static_cast<std::size_t>(sel.j_k - 1)].displacement;
  const DisplacementResult chosen = compute_step(sel, state.r, rec.delta, cfg);
  rec.step = chosen.displacement;
  rec.decrement = chosen.decrement;
  rec.candidates = std::move(sel.candidates);
  rec.noisy_bundle = std::move(sel.bundle);

  if (!state.have_noisy_value) {
    state.noisy_value = rec.noisy_bundle.value;
    state.have_noisy_value = true;
  }
  rec.noisy_before = state.noisy_value;

  rec.decrease = oracle.decrease(state.x, rec.step, k);
  if (rec.decrement <= 0.0) {
    rec.guard = true;
    rec.rho = std::numeric_limits<double>::quiet_NaN();
    rec.success = false;
  } else {
    rec.rho = rec.decrease / rec.decrement;
    rec.success = rec.rho >= cfg.eta;
  }

  if (rec.success) {
    state.x += rec.step;
    state.noisy_value -= rec.decrease;
    state.r = std::min(cfg.r_max, cfg.gamma * state.r);
  } else {
    state.r /= cfg.gamma;
  }
  rec.noisy_after = state.noisy_value;
  return rec;
}

// Observer returns false to stop the run early (it sees the finished record,
// including exact instrumentation).
using TraceObserver = std::function<bool(const IterationRecord&)>;

inline Trace run_trqne(const AlgoConfig& cfg, const NoisyOracle& oracle, const Vector& x0,
                       const TraceObserver& observer = nullptr, bool keep_records = true) {
  cfg.validate();
  Trace trace;
  trace.algorithm = "trqne";
  RunState state{x0, cfg.r0, 0.0, false};
  for (std::int64_t k = 0; k < cfg.budget; ++k) {
    // A long failure streak (e.g. at an exact stationary point) can underflow
    // the radius to zero; the ball would be empty, so the run ends here.
    if (!(state.r > 0.0)) break;
    IterationRecord rec = trqne_iterate(oracle, state, cfg, k);
    rec.f_exact = oracle.exact().value(rec.x);
    rec.grad_norm_exact = oracle.exact().gradient(rec.x).norm();
    const bool go = observer ? observer(rec) : true;
    if (keep_records) trace.records.push_back(std::move(rec));
    if (!go) break;
  }
  trace.x_final = state.x;
  trace.r_final = state.r;
  return trace;
}

}  // namespace ntrust
