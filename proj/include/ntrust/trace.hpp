#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ntrust/core.hpp"
#include "ntrust/subproblem.hpp"

namespace ntrust {

// Accuracy/success events of one iteration, measured by instrumentation
// against the exact oracle. `m1` holds one flag per model degree 1..j_k.
struct EventFlags {
  bool computed = false;
  std::vector<bool> m1;
  bool m1_all = false;
  bool m2 = false;
  bool m = false;
  bool f = false;
  bool e = false;
  bool sufficient = false;
  bool tilde_m = false;
  bool tilde_f = false;
};

// Everything observed in one iteration. `candidates[j-1]` is the displacement
// computed for degree j during degree selection; `noisy_bundle` holds the
// derivative estimates of the selected degree.
struct IterationRecord {
  std::int64_t k = 0;
  Vector x;
  double r = 0.0;
  double delta = 0.0;
  int j_k = 1;
  Vector displacement;
  Vector step;
  double decrement = 0.0;
  double decrease = 0.0;
  double rho = 0.0;
  bool success = false;
  bool fallthrough = false;
  bool guard = false;
  double noisy_before = 0.0;
  double noisy_after = 0.0;
  std::vector<DisplacementResult> candidates;
  DerivativeBundle noisy_bundle;
  double f_exact = 0.0;
  double grad_norm_exact = 0.0;
  EventFlags events;
};

struct Trace {
  std::string algorithm;
  std::vector<IterationRecord> records;
  Vector x_final;
  double r_final = 0.0;
};

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline const char* trace_csv_header() {
  return "k,r,delta,j_k,rho,success,decrement,f_exact,f_noisy,grad_norm_exact,"
         "ev_m1,ev_m2,ev_m,ev_f,ev_e,ev_tilde_m,ev_tilde_f,ev_sufficient,fallthrough,guard";
}

inline std::string trace_csv_row(const IterationRecord& rec) {
  std::string row;
  row += std::to_string(rec.k);
  row += ',';
  row += detail::fmt_double(rec.r);
  row += ',';
  row += detail::fmt_double(rec.delta);
  row += ',';
  row += std::to_string(rec.j_k);
  row += ',';
  row += detail::fmt_double(rec.rho);
  row += ',';
  row += rec.success ? '1' : '0';
  row += ',';
  row += detail::fmt_double(rec.decrement);
  row += ',';
  row += detail::fmt_double(rec.f_exact);
  row += ',';
  row += detail::fmt_double(rec.noisy_before);
  row += ',';
  row += detail::fmt_double(rec.grad_norm_exact);
  const bool flags[] = {rec.events.m1_all, rec.events.m2,      rec.events.m,          rec.events.f,  rec.events.e,
                        rec.events.tilde_m, rec.events.tilde_f, rec.events.sufficient, rec.fallthrough, rec.guard};
  for (bool b : flags) {
    row += ',';
    row += b ? '1' : '0';
  }
  return row;
}

inline void write_trace_csv(const std::string& path, const Trace& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << trace_csv_header() << '\n';
  for (const IterationRecord& rec : trace.records) out << trace_csv_row(rec) << '\n';
}

}  // namespace ntrust
