#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace ntrust {

// Run parameters shared by both methods. The first-order method ignores
// theta and uses only epsilon[0].
struct AlgoConfig {
  int q = 1;
  std::vector<double> epsilon{0.01};
  double eta = 0.1;
  double theta = 1.0;
  double varsigma = 1.0;
  double gamma = 2.0;
  double r_max = 100.0;
  double r0 = 1.0;
  std::int64_t budget = 10000;
  double subproblem_tol = 1e-6;

  double nu() const { return std::min(0.5 * eta, 0.25 * (1.0 - eta)); }

  double epsilon_min() const {
    double m = 1.0;
    for (double e : epsilon) m = std::min(m, e);
    return m;
  }

  void validate() const {
    if (q != 1 && q != 2) throw std::invalid_argument("q must be 1 or 2");
    if (static_cast<int>(epsilon.size()) != q) throw std::invalid_argument("epsilon must have exactly q entries");
    for (double e : epsilon)
      if (!(e > 0.0 && e < 1.0)) throw std::invalid_argument("epsilon entries must be in (0,1)");
    if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("eta must be in (0,1)");
    const double em = epsilon_min();
    if (!(theta >= em && theta <= 1.0)) throw std::invalid_argument("theta must be in [epsilon_min, 1]");
    if (!(varsigma > 0.0 && varsigma <= 1.0)) throw std::invalid_argument("varsigma must be in (0,1]");
    if (!(gamma > 1.0)) throw std::invalid_argument("gamma must be greater than 1");
    if (!(r_max >= 1.0)) throw std::invalid_argument("r_max must be at least 1");
    if (!(r0 > em && r0 <= r_max)) throw std::invalid_argument("r0 must be in (epsilon_min, r_max]");
    if (budget < 1) throw std::invalid_argument("budget must be at least 1");
    if (!(subproblem_tol > 0.0 && subproblem_tol < 1.0)) throw std::invalid_argument("subproblem_tol must be in (0,1)");
  }
};

}  // namespace ntrust
