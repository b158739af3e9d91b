#pragma once

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "ntrust/events.hpp"
#include "ntrust/example_problem.hpp"
#include "ntrust/harness.hpp"
#include "ntrust/problems.hpp"
#include "ntrust/subproblem.hpp"
#include "ntrust/tr1ne.hpp"
#include "ntrust/trqne.hpp"

namespace ntrust {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

struct VerifyOptions {
  std::string out_root = "runs";
  std::string cli_path;  // needed only by the determinism check
  std::uint64_t seed = 20260817;
};

namespace verifydetail {

template <typename F>
CheckResult timed(const std::string& name, F&& body) {
  CheckResult out;
  out.name = name;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(out);
  } catch (const std::exception& e) {
    out.pass = false;
    out.detail = std::string("exception: ") + e.what();
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

inline std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

inline Vector box_point(const Benchmark& b, Rng& rng) {
  Vector x(b.box_lo.size());
  for (int i = 0; i < x.size(); ++i) x[i] = rng.next_uniform(b.box_lo[i], b.box_hi[i]);
  return x;
}

inline bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

inline bool vectors_equal(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) return false;
  for (int i = 0; i < a.size(); ++i)
    if (a[i] != b[i] && !(std::isnan(a[i]) && std::isnan(b[i]))) return false;
  return true;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Runs a command line, returns the process exit code (-1 if it did not exit
// normally).
inline int run_command(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  if (status == -1) return -1;
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  return -1;
}

}  // namespace verifydetail

// Every benchmark's truncated models satisfy the remainder envelope at random
// segment endpoints inside the box; a deliberately shrunken envelope is
// flagged, so the test cannot pass vacuously.
inline CheckResult check_taylor_remainder(const VerifyOptions& opt) {
  return verifydetail::timed("taylor_remainder", [&](CheckResult& out) {
    std::int64_t violations = 0, samples = 0;
    const std::vector<std::string> names = benchmark_names();
    for (std::size_t bi = 0; bi < names.size(); ++bi) {
      const Benchmark b = benchmark_by_name(names[bi]);
      const int max_degree = static_cast<int>(b.lip.per_order.size());
      Rng rng(derive_seed(opt.seed, 11, bi));
      for (int i = 0; i < 1000; ++i) {
        const Vector x = verifydetail::box_point(b, rng);
        const Vector y = verifydetail::box_point(b, rng);
        const int degree = 1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(max_degree)));
        ++samples;
        if (!remainder_bound_check(b.oracle, x, Vector(y - x), degree, b.lip)) ++violations;
      }
    }
    // Negative control: an envelope 10^4 times too small must be rejected.
    std::int64_t control_hits = 0;
    {
      Benchmark b = make_rosenbrock();
      for (double& v : b.lip.per_order) v *= 1e-4;
      Rng rng(derive_seed(opt.seed, 12));
      for (int i = 0; i < 200; ++i) {
        const Vector x = verifydetail::box_point(b, rng);
        const Vector y = verifydetail::box_point(b, rng);
        const int degree = 1 + static_cast<int>(rng.next_below(2));
        if (!remainder_bound_check(b.oracle, x, Vector(y - x), degree, b.lip)) ++control_hits;
      }
    }
    out.pass = violations == 0 && control_hits > 0;
    out.detail = verifydetail::fmt("%lld samples, %lld violations; shrunken envelope flagged %lld/200",
                                   static_cast<long long>(samples), static_cast<long long>(violations),
                                   static_cast<long long>(control_hits));
  });
}

// The certified ball maximizer agrees with an independent sampling-plus-ascent
// search on random instances, including hard-case and indefinite spectra, and
// the first-order maximizer matches its closed form.
inline CheckResult check_subproblem_solver(const VerifyOptions& opt) {
  return verifydetail::timed("subproblem_solver", [&](CheckResult& out) {
    Rng rng(derive_seed(opt.seed, 21));
    std::int64_t bad = 0;
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const int n = 2 + static_cast<int>(rng.next_below(4));
      const double delta = rng.next_uniform(0.1, 2.0);
      Matrix A(n, n);
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) A(r, c) = rng.next_normal();
      Matrix H = 0.5 * (A + A.transpose());
      Vector g = rng.next_gaussian_vector(n);
      const int variant = i % 5;
      if (variant == 1) H -= (std::abs(rng.next_normal()) + 0.5) * Matrix::Identity(n, n);
      if (variant == 2) {
        // Hard case: no gradient mass on the bottom eigenspace, small g.
        Eigen::SelfAdjointEigenSolver<Matrix> eig(H);
        Vector lam = eig.eigenvalues();
        lam[0] = -std::abs(lam[0]) - 1.0;
        Vector gt = 0.05 * rng.next_gaussian_vector(n);
        gt[0] = 0.0;
        H = eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
        H = Matrix(0.5 * (H + H.transpose()));
        g = eig.eigenvectors() * gt;
      }
      if (variant == 3) g.setZero();
      if (variant == 4) {
        H = H.transpose() * H + Matrix::Identity(n, n);
        g *= 1e-3;
      }
      DerivativeBundle bundle;
      bundle.order = 2;
      bundle.gradient = g;
      bundle.hessian = H;
      const DisplacementResult a = phi_order2(g, H, delta, 1e-8);
      const DisplacementResult bf = phi_bruteforce(bundle, 2, delta, 100000, derive_seed(opt.seed, 22, i));
      const double gap = (a.decrement - bf.decrement) / std::max(1.0, std::abs(a.decrement));
      worst = std::max(worst, std::abs(gap));
      if (std::abs(gap) > 1e-3) ++bad;
    }
    // First-order maximizer against its closed form.
    std::int64_t bad1 = 0;
    for (int i = 0; i < 50; ++i) {
      const int n = 1 + static_cast<int>(rng.next_below(6));
      const Vector g = rng.next_gaussian_vector(n);
      const double delta = rng.next_uniform(0.05, 3.0);
      const DisplacementResult r = phi_order1(g, delta);
      if (!verifydetail::near(r.decrement, delta * g.norm(), 1e-12 * std::max(1.0, delta * g.norm()))) ++bad1;
      if (std::abs(r.displacement.norm() - (g.norm() > 0 ? delta : 0.0)) > 1e-12 * std::max(1.0, delta)) ++bad1;
    }
    out.pass = bad == 0 && bad1 == 0;
    out.detail = verifydetail::fmt("100 ball instances, %lld over gap 1e-3 (worst %.3g); closed-form misses %lld",
                                   static_cast<long long>(bad), worst, static_cast<long long>(bad1));
  });
}

namespace verifydetail {

inline CheckResult scaling_check(const std::string& name, const VerifyOptions& opt, const json& spec_doc,
                                 double slope_cap) {
  return timed(name, [&](CheckResult& out) {
    const ExperimentSpec spec = parse_experiment(spec_doc);
    std::filesystem::create_directories(opt.out_root);
    const ExperimentResult res = run_experiment(spec, opt.out_root);
    const json& s = res.summary;
    std::int64_t censored = 0;
    bool bound_ok = s.at("bound_ok").get<bool>();
    for (const json& cell : s.at("grid")) censored += cell.at("censored").get<std::int64_t>();
    const double slope = s.at("slope").get<double>();
    const bool slope_valid = s.at("slope_valid").get<bool>();
    out.pass = slope_valid && slope <= slope_cap && bound_ok && censored == 0 && res.exit_code == 0;
    std::string ns;
    for (const json& cell : s.at("grid")) ns += fmt(" %.0f", cell.at("n_mean").get<double>());
    out.detail = fmt("slope %.3f (cap %.1f), bound_ok %d, censored %lld, N per eps:%s", slope, slope_cap,
                     bound_ok ? 1 : 0, static_cast<long long>(censored), ns.c_str());
  });
}

}  // namespace verifydetail

// Hitting times of exact first-order runs grow no faster than the theoretical
// order in 1/eps and sit below the evaluated expectation bound.
inline CheckResult check_scaling_first_order(const VerifyOptions& opt) {
  const json doc{{"experiment", "scaling"},
                 {"problem", "rosenbrock"},
                 {"algorithm", "trqne"},
                 {"config", {{"q", 1}, {"epsilon", {0.01}}, {"budget", 2000000}}},
                 {"noise", {{"kind", "none"}}},
                 {"replications", 1},
                 {"p_star", 1.0},
                 {"seed", opt.seed}};
  return verifydetail::scaling_check("scaling_first_order", opt, doc, 2.4);
}

inline CheckResult check_scaling_second_order(const VerifyOptions& opt) {
  const json doc{{"experiment", "scaling"},
                 {"problem", "trig"},
                 {"algorithm", "trqne"},
                 {"config", {{"q", 2}, {"epsilon", {0.01, 0.01}}, {"budget", 100000}}},
                 {"noise", {{"kind", "none"}}},
                 {"replications", 1},
                 {"p_star", 1.0},
                 {"seed", opt.seed}};
  return verifydetail::scaling_check("scaling_second_order", opt, doc, 3.5);
}

// Exact-oracle traces on every benchmark: all accuracy events hold, every
// small-radius iteration before the hitting time succeeds, the iteration
// classes partition, failures above the radius threshold are capped by the
// success count plus the shrink backlog, and per-iteration decrements and
// decreases clear their guaranteed floors.
inline CheckResult check_exact_run_classes(const VerifyOptions& opt) {
  return verifydetail::timed("exact_run_classes", [&](CheckResult& out) {
    struct RunPlan {
      std::string problem;
      int q;
    };
    const std::vector<RunPlan> plans{{"quadratic", 2}, {"rosenbrock", 2}, {"trig", 2}, {"example", 1}};
    std::int64_t premise_total = 0, premise_bad = 0, e_bad = 0, partition_bad = 0, cap_bad = 0;
    std::int64_t floor_bad = 0, decrease_bad = 0, censored_runs = 0;
    std::string per_run;
    for (std::size_t pi = 0; pi < plans.size(); ++pi) {
      const Benchmark b = benchmark_by_name(plans[pi].problem);
      AlgoConfig cfg;
      cfg.q = plans[pi].q;
      cfg.epsilon.assign(static_cast<std::size_t>(cfg.q), 1e-3);
      cfg.budget = 20000;
      const NoisyOracle oracle(b.oracle, NoiseModel{}, derive_seed(opt.seed, 31, pi), b.finite_sum);
      Trace trace = run_trqne(cfg, oracle, b.x0);
      detect_events(trace, b.oracle, cfg);
      const ThresholdConstants tc = threshold_constants(cfg, b.lip);
      const ClassCounts c = classify_trace(trace, b.oracle, cfg, tc.r_bar);
      if (c.censored) ++censored_runs;
      for (const IterationRecord& rec : trace.records) {
        if (!rec.events.e) ++e_bad;
        if (rec.k >= c.n_eps) continue;
        if (rec.r <= tc.r_bar) {
          ++premise_total;
          if (!rec.success) ++premise_bad;
        }
        if (rec.r >= tc.r_bar) {
          const double qf = factorial(cfg.q);
          const double floor_dec = cfg.varsigma / qf * std::pow(tc.kappa_delta * cfg.epsilon_min(), cfg.q + 1);
          if (!(rec.decrement >= floor_dec * (1.0 - 1e-9))) ++floor_bad;
          if (rec.success) {
            const double drop = b.oracle.value(rec.x) - b.oracle.value(rec.x + rec.step);
            if (!(drop >= 0.5 * cfg.eta * floor_dec * (1.0 - 1e-9))) ++decrease_bad;
          }
        }
        if (rec.success) {
          // Accurate estimates turn acceptance into real progress.
          const double drop = b.oracle.value(rec.x) - b.oracle.value(rec.x + rec.step);
          if (!(drop >= 0.5 * cfg.eta * rec.decrement * (1.0 - 1e-9) - 1e-300)) ++decrease_bad;
        }
      }
      if (c.n_lambda + c.n_lambda_bar != c.n_eps) ++partition_bad;
      if (c.n_I + c.n_A != c.n_closure) ++partition_bad;
      if (c.n_AS + c.n_AU != c.n_A) ++partition_bad;
      if (c.n_IS > c.n_I || c.n_AS > c.n_S) ++partition_bad;
      const double backlog = std::ceil(std::max(0.0, std::log(cfg.r0 / tc.r_bar) / std::log(cfg.gamma)));
      if (static_cast<double>(c.n_U) > static_cast<double>(c.n_S) + backlog) ++cap_bad;
      per_run += verifydetail::fmt(" %s:n_eps=%lld", plans[pi].problem.c_str(), static_cast<long long>(c.n_eps));
    }
    out.pass = premise_bad == 0 && e_bad == 0 && partition_bad == 0 && cap_bad == 0 && floor_bad == 0 &&
               decrease_bad == 0 && censored_runs == 0;
    out.detail = verifydetail::fmt(
        "small-radius premise %lld/%lld ok; inaccurate-event records %lld; partition faults %lld; "
        "failure-cap faults %lld; decrement-floor faults %lld; decrease faults %lld;%s",
        static_cast<long long>(premise_total - premise_bad), static_cast<long long>(premise_total),
        static_cast<long long>(e_bad), static_cast<long long>(partition_bad), static_cast<long long>(cap_bad),
        static_cast<long long>(floor_bad), static_cast<long long>(decrease_bad), per_run.c_str());
  });
}

// Randomized perturbed iterations: whenever the derivative-error conditions
// hold, the model-accuracy event holds, and the vector-error events of the
// first-order method imply their plain counterparts. Both directions must be
// populated so the implications are not vacuous.
inline CheckResult check_event_implications(const VerifyOptions& opt) {
  return verifydetail::timed("event_implications", [&](CheckResult& out) {
    const std::vector<Benchmark> benches{make_quadratic(3), make_rosenbrock(), make_trig()};
    AlgoConfig cfg;
    cfg.q = 2;
    cfg.epsilon = {1e-2, 1e-2};
    std::int64_t suff_true = 0, suff_violations = 0;
    Rng rng(derive_seed(opt.seed, 41));
    for (int i = 0; i < 10000; ++i) {
      const Benchmark& b = benches[static_cast<std::size_t>(i) % benches.size()];
      IterationRecord rec;
      rec.k = i;
      rec.x = verifydetail::box_point(b, rng);
      rec.delta = rng.next_uniform(0.1, 1.5);
      rec.r = rec.delta;
      rec.j_k = 1 + static_cast<int>(rng.next_below(2));
      DerivativeBundle noisy = b.oracle.bundle(rec.x, 2);
      const double gscale = std::pow(10.0, rng.next_uniform(-7.0, 0.0)) * std::max(1.0, noisy.gradient.norm());
      const double hscale =
          std::pow(10.0, rng.next_uniform(-7.0, 0.0)) * std::max(1.0, noisy.hessian.cwiseAbs().maxCoeff());
      noisy.gradient += gscale * rng.next_gaussian_vector(static_cast<int>(noisy.gradient.size()));
      Matrix e(noisy.hessian.rows(), noisy.hessian.cols());
      for (int r = 0; r < e.rows(); ++r)
        for (int c = r; c < e.cols(); ++c) e(r, c) = e(c, r) = hscale * rng.next_normal();
      noisy.hessian += e;
      for (int j = 1; j <= rec.j_k; ++j) rec.candidates.push_back(phi_solve(noisy, j, rec.delta, cfg.subproblem_tol));
      rec.step = rec.candidates.back().displacement;
      rec.displacement = rec.step;
      rec.decrement = rec.candidates.back().decrement;
      rec.noisy_bundle = noisy;
      detect_m(rec, b.oracle, cfg, Method::TRqNE);
      check_sufficient_conditions(rec, b.oracle, cfg);
      if (rec.events.sufficient) {
        ++suff_true;
        if (!rec.events.m) ++suff_violations;
      }
    }
    // First-order records.
    const Benchmark b1 = make_quadratic(5);
    AlgoConfig cfg1;
    cfg1.q = 1;
    cfg1.epsilon = {1e-2};
    std::int64_t tm_true = 0, tf_true = 0, tm_violations = 0, tf_violations = 0;
    for (int i = 0; i < 10000; ++i) {
      IterationRecord rec;
      rec.k = i;
      rec.x = verifydetail::box_point(b1, rng);
      rec.r = std::pow(10.0, rng.next_uniform(-2.0, 1.0));
      rec.delta = rec.r;
      rec.j_k = 1;
      DerivativeBundle noisy = b1.oracle.bundle(rec.x, 1);
      const double gscale = std::pow(10.0, rng.next_uniform(-7.0, 0.0)) * std::max(1.0, noisy.gradient.norm());
      noisy.gradient += gscale * rng.next_gaussian_vector(5);
      const double gn = noisy.gradient.norm();
      if (gn == 0.0) continue;
      rec.noisy_bundle = noisy;
      rec.step = Vector(-(rec.r / gn) * noisy.gradient);
      rec.displacement = rec.step;
      rec.decrement = gn * rec.r;
      const double df = b1.oracle.value(rec.x) - b1.oracle.value(rec.x + rec.step);
      rec.decrease = df + std::pow(10.0, rng.next_uniform(-7.0, 0.0)) * std::max(1.0, std::abs(df)) * rng.next_normal();
      detect_m(rec, b1.oracle, cfg1, Method::TR1NE);
      detect_f(rec, b1.oracle, cfg1);
      detect_tilde_events(rec, b1.oracle, cfg1);
      if (rec.events.tilde_m) {
        ++tm_true;
        if (!rec.events.m) ++tm_violations;
      }
      if (rec.events.tilde_f) {
        ++tf_true;
        if (!rec.events.f) ++tf_violations;
      }
    }
    const bool populated = suff_true >= 200 && suff_true <= 9800 && tm_true >= 200 && tm_true <= 9800 &&
                           tf_true >= 200 && tf_true <= 9800;
    out.pass = suff_violations == 0 && tm_violations == 0 && tf_violations == 0 && populated;
    out.detail = verifydetail::fmt(
        "derivative-error premise true %lld (violations %lld); vector-error premises true %lld/%lld "
        "(violations %lld/%lld)",
        static_cast<long long>(suff_true), static_cast<long long>(suff_violations), static_cast<long long>(tm_true),
        static_cast<long long>(tf_true), static_cast<long long>(tm_violations), static_cast<long long>(tf_violations));
  });
}

// Quadrature and closed-form values of the error-tail integral at the
// documented batch setting.
inline CheckResult check_tail_integral_constants(const VerifyOptions&) {
  return verifydetail::timed("tail_integral_constants", [&](CheckResult& out) {
    const double integral = bernstein_integral(2056, 1.0);
    const double bound = bernstein_integral_bound(2056, 1.0);
    out.pass = verifydetail::near(integral, 0.0556, 1e-3) && verifydetail::near(bound, 0.1818, 1e-3) &&
               integral <= bound;
    out.detail = verifydetail::fmt("integral %.7f (target 0.0556), closed bound %.7f (target 0.1818)", integral,
                                   bound);
  });
}

// Empirical tails of the batch sign statistic and of subsampled decrease
// errors stay under their analytic bounds, and the minimal-batch rule
// reproduces its documented value.
inline CheckResult check_sign_statistic_tails(const VerifyOptions& opt) {
  return verifydetail::timed("sign_statistic_tails", [&](CheckResult& out) {
    const json doc{{"experiment", "concentration"}, {"problem", "example"}, {"algorithm", "tr1ne"},
                   {"config", {{"q", 1}}},           {"noise", {{"kind", "none"}}}, {"seed", opt.seed}};
    std::filesystem::create_directories(opt.out_root);
    const ExperimentResult res = run_experiment(parse_experiment(doc), opt.out_root);
    const json& s = res.summary;
    const bool psi_ok = s.at("psi_tail").at("all_pass").get<bool>();
    const bool bern_ok = s.at("bernstein_tail").at("all_pass").get<bool>();
    const std::int64_t minimal = s.at("constants").at("minimal_batch_t01").get<std::int64_t>();
    const bool integral_ok = s.at("constants").at("integral_below_bound").get<bool>();
    out.pass = psi_ok && bern_ok && minimal == 246 && integral_ok && res.exit_code == 0;
    out.detail = verifydetail::fmt("sign tails %s, decrease tails %s, minimal batch %lld (target 246)",
                                   psi_ok ? "ok" : "FAIL", bern_ok ? "ok" : "FAIL", static_cast<long long>(minimal));
  });
}

// Acceptance-region sweep: closed-form thresholds at the documented noise
// levels, grid consistency of the region indicators, and shrinking two-sided
// interval widths as the local noise level grows.
inline CheckResult check_acceptance_regions(const VerifyOptions& opt) {
  return verifydetail::timed("acceptance_regions", [&](CheckResult& out) {
    const double nu = 0.25;
    bool thresholds_ok = true;
    const auto expect = [&](double got, double want) {
      if (!verifydetail::near(got, want, 1e-12)) thresholds_ok = false;
    };
    expect(m1_threshold_low(0.5, 0.0, nu), 0.4);
    expect(m2_threshold_low(0.5, 0.0, nu), -2.0 / 3.0);
    expect(m2_threshold_high(0.5, 0.0, nu), 0.4);
    expect(m1_threshold_low(4.0 / 3.0, 0.0, nu), 0.15);
    expect(m2_threshold_low(4.0 / 3.0, 0.0, nu), -0.25);
    expect(m1_threshold_low(4.0, 0.0, nu), 0.05);
    expect(m1_threshold_high(4.0, 0.0, nu), 0.45);
    expect(m2_threshold_low(4.0, 0.0, nu), -1.0 / 12.0);
    expect(m2_width(0.5, 0.0, nu), 16.0 / 15.0);
    expect(m2_width(4.0 / 3.0, 0.0, nu), 0.4);
    expect(m2_width(4.0, 0.0, nu), 2.0 / 15.0);

    const json doc{{"experiment", "regions"}, {"problem", "example"}, {"algorithm", "tr1ne"},
                   {"config", {{"q", 1}}},     {"noise", {{"kind", "none"}}}, {"region_nu", nu},
                   {"seed", opt.seed}};
    std::filesystem::create_directories(opt.out_root);
    const ExperimentResult res = run_experiment(parse_experiment(doc), opt.out_root);
    bool grid_ok = true;
    for (const json& level : res.summary.at("levels"))
      if (!level.at("grid_consistent").get<bool>()) grid_ok = false;
    const bool widths_ok = res.summary.at("m2_widths_decreasing").get<bool>();
    out.pass = thresholds_ok && grid_ok && widths_ok && res.exit_code == 0;
    out.detail = verifydetail::fmt("thresholds %s, grid consistency %s, widths decreasing %s",
                                   thresholds_ok ? "ok" : "FAIL", grid_ok ? "ok" : "FAIL", widths_ok ? "ok" : "FAIL");
  });
}

// Calibrated subsampled first-order runs: in the bin where the exact gradient
// clears twice the quantile threshold, accuracy-event frequencies meet the
// confidence level, and every well-populated bin with a low model-accuracy
// frequency lies strictly below the threshold ratio. A second run with tiny
// batches stresses the same binning on genuinely inaccurate estimates.
inline CheckResult check_degraded_thresholds(const VerifyOptions& opt) {
  return verifydetail::timed("degraded_thresholds", [&](CheckResult& out) {
    std::filesystem::create_directories(opt.out_root);
    const json calibrated{{"experiment", "degraded"},
                          {"problem", "example"},
                          {"algorithm", "tr1ne"},
                          {"config",
                           {{"q", 1},
                            {"epsilon", {0.001}},
                            {"eta", 1.0 / 3.0},
                            {"r0", 1.0},
                            {"r_max", 1.0},
                            {"budget", 50}}},
                          {"noise", {{"kind", "subsampled"}, {"batch_value", 8192}, {"batch_gradient", 8192}}},
                          {"x0", {4.0}},
                          {"replications", 1000},
                          {"alpha_star", 0.6},
                          {"example", {{"m", 50000}, {"alpha", 0.5}}},
                          {"seed", opt.seed}};
    const ExperimentResult res = run_experiment(parse_experiment(calibrated), opt.out_root);
    const json& s = res.summary;
    const bool inconclusive = s.at("inconclusive").get<bool>();
    bool pass_m = false, pass_f = false, binning_ok = s.at("below_threshold_only_small").get<bool>();
    double fm = 0.0, ff = 0.0;
    std::int64_t large_count = 0;
    if (!inconclusive) {
      const json& lg = s.at("large_gradient");
      pass_m = lg.at("pass_m").get<bool>();
      pass_f = lg.at("pass_f").get<bool>();
      fm = lg.at("freq_m").get<double>();
      ff = lg.at("freq_f").get<double>();
      large_count = lg.at("count").get<std::int64_t>();
    }

    json stress = calibrated;
    stress["noise"]["batch_value"] = 4;
    stress["noise"]["batch_gradient"] = 4;
    stress["example"]["alpha"] = 0.95;
    stress["replications"] = 500;
    stress["seed"] = opt.seed + 1;
    const ExperimentResult res2 = run_experiment(parse_experiment(stress), opt.out_root);
    const bool stress_binning_ok = res2.summary.at("below_threshold_only_small").get<bool>();

    out.pass = !inconclusive && pass_m && pass_f && binning_ok && stress_binning_ok;
    out.detail = verifydetail::fmt(
        "large-gradient bin count %lld, freq_m %.4f, freq_f %.4f (level 0.6); binning ok %d; tiny-batch binning ok %d",
        static_cast<long long>(large_count), fm, ff, binning_ok ? 1 : 0, stress_binning_ok ? 1 : 0);
  });
}

// Under every noise model, the tracked estimate stream never increases, the
// stream/radius/iterate update laws match the success flags bit for bit, and
// consecutive records chain exactly.
inline CheckResult check_monotone_stream(const VerifyOptions& opt) {
  return verifydetail::timed("monotone_stream", [&](CheckResult& out) {
    struct Plan {
      std::string algorithm;
      std::string problem;
      int q;
      NoiseModel noise;
    };
    std::vector<Plan> plans;
    plans.push_back({"trqne", "rosenbrock", 2, NoiseModel{}});
    plans.push_back({"trqne", "rosenbrock", 2, NoiseModel{NoiseKind::AdditiveBounded, 0.01, 0.01, 0.01, 0, 0}});
    plans.push_back({"trqne", "trig", 2, NoiseModel{NoiseKind::AdditiveGaussian, 0.005, 0.005, 0.005, 0, 0}});
    plans.push_back({"trqne", "quadratic", 1, NoiseModel{NoiseKind::AdditiveBounded, 0.01, 0.01, 0.0, 0, 0}});
    plans.push_back({"trqne", "example", 1, NoiseModel{NoiseKind::Subsampled, 0, 0, 0, 128, 128}});
    plans.push_back({"tr1ne", "example", 1, NoiseModel{}});
    plans.push_back({"tr1ne", "example", 1, NoiseModel{NoiseKind::AdditiveGaussian, 0.01, 0.01, 0.0, 0, 0}});
    plans.push_back({"tr1ne", "example", 1, NoiseModel{NoiseKind::Subsampled, 0, 0, 0, 64, 64}});
    std::int64_t stream_bad = 0, chain_bad = 0, radius_bad = 0, iterate_bad = 0, records = 0;
    for (std::size_t pi = 0; pi < plans.size(); ++pi) {
      const Plan& p = plans[pi];
      const Benchmark b = benchmark_by_name(p.problem);
      AlgoConfig cfg;
      cfg.q = p.q;
      cfg.epsilon.assign(static_cast<std::size_t>(p.q), 1e-3);
      cfg.budget = 400;
      const NoisyOracle oracle(b.oracle, p.noise, derive_seed(opt.seed, 51, pi), b.finite_sum);
      const Trace trace = p.algorithm == "tr1ne" ? run_tr1ne(cfg, oracle, b.x0) : run_trqne(cfg, oracle, b.x0);
      for (std::size_t i = 0; i < trace.records.size(); ++i) {
        const IterationRecord& rec = trace.records[i];
        ++records;
        const double expected_after = rec.success ? rec.noisy_before - rec.decrease : rec.noisy_before;
        if (rec.noisy_after != expected_after) ++stream_bad;
        if (!(rec.noisy_after <= rec.noisy_before)) ++stream_bad;
        if (i + 1 < trace.records.size()) {
          const IterationRecord& next = trace.records[i + 1];
          if (next.noisy_before != rec.noisy_after) ++chain_bad;
          const double expected_r = rec.success ? std::min(cfg.r_max, cfg.gamma * rec.r) : rec.r / cfg.gamma;
          if (next.r != expected_r) ++radius_bad;
          const Vector expected_x = rec.success ? Vector(rec.x + rec.step) : rec.x;
          if (!verifydetail::vectors_equal(next.x, expected_x)) ++iterate_bad;
        }
      }
    }
    out.pass = stream_bad == 0 && chain_bad == 0 && radius_bad == 0 && iterate_bad == 0 && records > 0;
    out.detail = verifydetail::fmt(
        "%lld records over %zu runs; stream faults %lld, chain faults %lld, radius faults %lld, iterate faults %lld",
        static_cast<long long>(records), plans.size(), static_cast<long long>(stream_bad),
        static_cast<long long>(chain_bad), static_cast<long long>(radius_bad), static_cast<long long>(iterate_bad));
  });
}

// Two invocations of the command-line runner with the same config produce
// byte-identical traces and summaries, and reordering config keys changes
// neither the run directory name nor the outputs.
inline CheckResult check_run_determinism(const VerifyOptions& opt) {
  return verifydetail::timed("run_determinism", [&](CheckResult& out) {
    namespace fs = std::filesystem;
    if (opt.cli_path.empty()) {
      out.pass = false;
      out.detail = "no runner path configured";
      return;
    }
    const fs::path root = fs::path(opt.out_root) / "determinism";
    fs::create_directories(root);
    const json config{{"experiment", "trace"},
                      {"problem", "example"},
                      {"algorithm", "tr1ne"},
                      {"config", {{"q", 1}, {"epsilon", {0.01}}, {"budget", 200}}},
                      {"noise", {{"kind", "subsampled"}, {"batch_value", 246}, {"batch_gradient", 246}}},
                      {"replications", 3},
                      {"seed", 7}};
    // Same data, different key order.
    const json reordered{{"seed", 7},
                         {"replications", 3},
                         {"noise", {{"batch_gradient", 246}, {"batch_value", 246}, {"kind", "subsampled"}}},
                         {"config", {{"budget", 200}, {"epsilon", {0.01}}, {"q", 1}}},
                         {"algorithm", "tr1ne"},
                         {"problem", "example"},
                         {"experiment", "trace"}};
    const std::string cfg1 = (root / "config1.json").string();
    const std::string cfg2 = (root / "config2.json").string();
    detail::write_text(cfg1, config.dump(2) + "\n");
    detail::write_text(cfg2, reordered.dump(2) + "\n");

    const auto run_into = [&](const std::string& cfg, const std::string& sub) {
      const fs::path dir = root / sub;
      fs::create_directories(dir);
      const std::string log = (root / (sub + ".log")).string();
      const std::string cmd =
          "\"" + opt.cli_path + "\" run --config \"" + cfg + "\" --out \"" + dir.string() + "\" > \"" + log +
          "\" 2>&1";
      return verifydetail::run_command(cmd);
    };
    const int rc_a = run_into(cfg1, "a");
    const int rc_b = run_into(cfg1, "b");
    const int rc_c = run_into(cfg2, "c");

    const auto only_child = [&](const std::string& sub) -> std::string {
      std::vector<std::string> names;
      for (const auto& entry : fs::directory_iterator(root / sub)) names.push_back(entry.path().filename().string());
      return names.size() == 1 ? names.front() : std::string();
    };
    const std::string dir_a = only_child("a"), dir_b = only_child("b"), dir_c = only_child("c");
    bool bytes_equal = !dir_a.empty() && dir_a == dir_b && dir_a == dir_c;
    std::int64_t files_compared = 0;
    if (bytes_equal) {
      const std::vector<std::string> files{"trace_rep0000.csv", "trace_rep0001.csv", "trace_rep0002.csv",
                                           "summary.json"};
      for (const std::string& f : files) {
        const std::string a = verifydetail::read_file((root / "a" / dir_a / f).string());
        const std::string b2 = verifydetail::read_file((root / "b" / dir_b / f).string());
        const std::string c2 = verifydetail::read_file((root / "c" / dir_c / f).string());
        if (a != b2 || a != c2) bytes_equal = false;
        ++files_compared;
      }
    }
    out.pass = rc_a == 0 && rc_b == 0 && rc_c == 0 && bytes_equal;
    out.detail = verifydetail::fmt("exit codes %d/%d/%d; run dir \"%s\"; %lld files byte-compared, %s", rc_a, rc_b,
                                   rc_c, dir_a.c_str(), static_cast<long long>(files_compared),
                                   bytes_equal ? "identical" : "MISMATCH");
  });
}

inline std::vector<std::string> verify_suites() {
  return {"lemmas", "concentration", "regions", "scaling-q1", "scaling-q2", "degraded"};
}

inline std::vector<CheckResult> verify_suite(const std::string& suite, const VerifyOptions& opt) {
  std::vector<CheckResult> out;
  if (suite == "lemmas") {
    out.push_back(check_taylor_remainder(opt));
    out.push_back(check_subproblem_solver(opt));
    out.push_back(check_exact_run_classes(opt));
    out.push_back(check_event_implications(opt));
    out.push_back(check_monotone_stream(opt));
    out.push_back(check_run_determinism(opt));
  } else if (suite == "concentration") {
    out.push_back(check_tail_integral_constants(opt));
    out.push_back(check_sign_statistic_tails(opt));
  } else if (suite == "regions") {
    out.push_back(check_acceptance_regions(opt));
  } else if (suite == "scaling-q1") {
    out.push_back(check_scaling_first_order(opt));
  } else if (suite == "scaling-q2") {
    out.push_back(check_scaling_second_order(opt));
  } else if (suite == "degraded") {
    out.push_back(check_degraded_thresholds(opt));
  } else {
    throw std::invalid_argument("unknown suite: " + suite);
  }
  return out;
}

}  // namespace ntrust
