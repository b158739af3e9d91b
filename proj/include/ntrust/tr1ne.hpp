#pragma once

#include <cmath>
#include <limits>

#include "ntrust/config.hpp"
#include "ntrust/oracle.hpp"
#include "ntrust/trace.hpp"
#include "ntrust/trqne.hpp"

namespace ntrust {

// Scaling from a raw noise amplitude b to the gradient threshold
// bbar = b / (nu min(1, r)) used by the degraded-accuracy analysis.
inline double bar_b(double b, double nu, double r) {
  if (!(nu > 0.0) || !(r > 0.0)) throw std::invalid_argument("nu and r must be positive");
  return b / (nu * std::min(1.0, r));
}

// First-order method: full-radius step along the negative noisy gradient.
// A zero noisy gradient leaves the step undefined; the iteration is declared
// unsuccessful, the radius shrinks, and the record carries the guard flag.
inline IterationRecord tr1ne_iterate(const NoisyOracle& oracle, RunState& state, const AlgoConfig& cfg,
                                     std::int64_t k) {
  IterationRecord rec;
  rec.k = k;
  rec.x = state.x;
  rec.r = state.r;
  rec.delta = state.r;
  rec.j_k = 1;

  rec.noisy_bundle = oracle.eval(state.x, 1, k);
  if (!state.have_noisy_value) {
    state.noisy_value = rec.noisy_bundle.value;
    state.have_noisy_value = true;
  }
  rec.noisy_before = state.noisy_value;

  const double gn = rec.noisy_bundle.gradient.norm();
  if (gn == 0.0) {
    rec.step = Vector::Zero(state.x.size());
    rec.displacement = rec.step;
    rec.candidates.push_back(DisplacementResult{rec.step, 0.0, 1.0});
    rec.decrement = 0.0;
    rec.decrease = 0.0;
    rec.rho = std::numeric_limits<double>::quiet_NaN();
    rec.success = false;
    rec.guard = true;
  } else {
    rec.step = -(state.r / gn) * rec.noisy_bundle.gradient;
    rec.displacement = rec.step;
    rec.decrement = gn * state.r;
    rec.candidates.push_back(DisplacementResult{rec.step, rec.decrement, 1.0});
    rec.decrease = oracle.decrease(state.x, rec.step, k);
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

inline Trace run_tr1ne(const AlgoConfig& cfg, const NoisyOracle& oracle, const Vector& x0,
                       const TraceObserver& observer = nullptr, bool keep_records = true) {
  cfg.validate();
  Trace trace;
  trace.algorithm = "tr1ne";
  RunState state{x0, cfg.r0, 0.0, false};
  for (std::int64_t k = 0; k < cfg.budget; ++k) {
    // Radius underflow after a long failure streak leaves an empty ball.
    if (!(state.r > 0.0)) break;
    IterationRecord rec = tr1ne_iterate(oracle, state, cfg, k);
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
