#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "ntrust/verify.hpp"

// Acceptance gate: one line per criterion, nonzero exit if any fails.
// Criteria with a wall-time budget fail when the budget is exceeded even if
// every assertion inside holds.

namespace {

struct Criterion {
  int number;
  std::string title;
  bool pass;
  double seconds;
  double budget_seconds;  // 0 means untimed
  std::string detail;
};

void report(std::vector<Criterion>& all, int number, const std::string& title, const ntrust::CheckResult& r,
            double budget_seconds) {
  Criterion c{number, title, r.pass, r.seconds, budget_seconds, r.detail};
  if (budget_seconds > 0.0 && r.seconds > budget_seconds) {
    c.pass = false;
    c.detail += ntrust::verifydetail::fmt(" [exceeded %.0fs budget]", budget_seconds);
  }
  all.push_back(c);
}

}  // namespace

int main() {
  ntrust::VerifyOptions opt;
  opt.out_root = "acceptance_runs";
  opt.seed = 20260817;
  if (const char* cli = std::getenv("NTRUST_CLI_PATH")) opt.cli_path = cli;

  std::vector<Criterion> all;

  report(all, 1, "Taylor remainder envelopes", ntrust::check_taylor_remainder(opt), 5.0);
  report(all, 2, "Ball maximizer vs sampling search", ntrust::check_subproblem_solver(opt), 60.0);

  {
    const ntrust::CheckResult q1 = ntrust::check_scaling_first_order(opt);
    const ntrust::CheckResult q2 = ntrust::check_scaling_second_order(opt);
    ntrust::CheckResult joint;
    joint.pass = q1.pass && q2.pass;
    joint.seconds = q1.seconds + q2.seconds;
    joint.detail = "q1: " + q1.detail + " | q2: " + q2.detail;
    report(all, 3, "Noise-free hitting-time scaling", joint, 300.0);
  }

  report(all, 4, "Small-radius iterations succeed before the hit", ntrust::check_exact_run_classes(opt), 0.0);
  report(all, 5, "Accuracy-event implications", ntrust::check_event_implications(opt), 30.0);
  report(all, 6, "Error-tail integral constants", ntrust::check_tail_integral_constants(opt), 1.0);
  report(all, 7, "Sign-statistic tail bounds", ntrust::check_sign_statistic_tails(opt), 60.0);
  report(all, 8, "Acceptance-region thresholds", ntrust::check_acceptance_regions(opt), 0.0);
  report(all, 9, "Degraded-accuracy frequencies", ntrust::check_degraded_thresholds(opt), 300.0);
  report(all, 10, "Monotone estimate stream and radius law", ntrust::check_monotone_stream(opt), 0.0);
  report(all, 11, "Bitwise run determinism", ntrust::check_run_determinism(opt), 0.0);

  bool ok = true;
  for (const Criterion& c : all) {
    ok = ok && c.pass;
    std::printf("%s  criterion %2d: %-46s (%.2fs)  %s\n", c.pass ? "PASS" : "FAIL", c.number, c.title.c_str(),
                c.seconds, c.detail.c_str());
  }
  std::printf("%s\n", ok ? "ACCEPTANCE: all criteria passed" : "ACCEPTANCE: failures present");
  return ok ? 0 : 1;
}
