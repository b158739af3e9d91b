#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "ntrust/core.hpp"
#include "ntrust/rng.hpp"

namespace ntrust {

// Finite-sum structure f = (1/|Z|) sum_i f_i. The index universe is either
// {1..m} or the signed set {-m..m}\{0}; the signed form carries the +/- label
// used by the sign statistic.
struct FiniteSumProblem {
  std::int64_t m = 0;
  bool signed_universe = false;
  std::function<double(std::int64_t, const Vector&)> component_value;
  std::function<Vector(std::int64_t, const Vector&)> component_gradient;

  std::int64_t universe_size() const { return signed_universe ? 2 * m : m; }

  // Maps a sampler ordinal in [0, universe_size) to a component id.
  std::int64_t index_at(std::int64_t ordinal) const {
    if (!signed_universe) return ordinal + 1;
    return ordinal < m ? -(ordinal + 1) : ordinal - m + 1;
  }
};

// One without-replacement batch plus where it was drawn.
struct BatchDraw {
  std::vector<std::int64_t> indices;
  std::int64_t iteration = 0;
  bool signed_universe = false;
  Vector drawn_at;

  std::int64_t size() const { return static_cast<std::int64_t>(indices.size()); }
};

// Mean component sign over a batch from a signed universe.
inline double psi_statistic(const BatchDraw& batch) {
  if (!batch.signed_universe) throw std::invalid_argument("sign statistic requires a signed component universe");
  if (batch.indices.empty()) throw std::invalid_argument("sign statistic of an empty batch");
  double s = 0.0;
  for (std::int64_t i : batch.indices) s += i < 0 ? -1.0 : 1.0;
  return s / static_cast<double>(batch.indices.size());
}

// Hypergeometric upper tail: Pr[psi > t] <= exp(-t^2 n / 2) for batches of
// size n from a balanced signed universe.
inline double psi_tail_bound(double t, std::int64_t batch_size) {
  return std::exp(-0.5 * t * t * static_cast<double>(batch_size));
}

// Lower bound on Pr[|psi| <= t]: (1 - exp(-t^2 n / 2))^2.
inline double psi_two_sided_bound(double t, std::int64_t batch_size) {
  const double e = psi_tail_bound(t, batch_size);
  const double b = 1.0 - e;
  return b > 0.0 ? b * b : 0.0;
}

// Smallest batch size whose two-sided bound exceeds `target`.
inline std::int64_t minimal_batch_for_psi(double t, double target = 0.5) {
  if (!(t > 0.0) || !(target > 0.0) || !(target < 1.0)) throw std::invalid_argument("bad sign-statistic bound query");
  const double c = 2.0 * std::abs(std::log(1.0 - std::sqrt(target)));
  auto n = static_cast<std::int64_t>(std::ceil(c / (t * t)));
  while (n > 1 && psi_two_sided_bound(t, n - 1) > target) --n;
  while (!(psi_two_sided_bound(t, n) > target)) ++n;
  return n;
}

// Bernstein exponent W(tau) = tau^2 |B| / (4 kappa (2 kappa + tau/3)).
inline double bernstein_w(double tau, std::int64_t batch_size, double kappa) {
  if (!(kappa > 0.0)) throw std::invalid_argument("kappa must be positive");
  return tau * tau * static_cast<double>(batch_size) / (4.0 * kappa * (2.0 * kappa + tau / 3.0));
}

// Tail bounds the exponent yields: exp(-W) for the value estimate, and the
// dimension-corrected min(1, (n+1) exp(-W)) for the gradient estimate.
inline double bernstein_value_tail(double tau, std::int64_t batch_size, double kappa) {
  return std::exp(-bernstein_w(tau, batch_size, kappa));
}

inline double bernstein_gradient_tail(double tau, std::int64_t batch_size, double kappa, int dim) {
  return std::min(1.0, static_cast<double>(dim + 1) * std::exp(-bernstein_w(tau, batch_size, kappa)));
}

// Quantile inversion: the B with W(B) = c, i.e. the positive root of
// |B| B^2 - (4 c kappa / 3) B - 8 c kappa^2 = 0.
inline double bernstein_quantile(double c, std::int64_t batch_size, double kappa) {
  if (!(c > 0.0)) throw std::invalid_argument("quantile level must be positive");
  const double nb = static_cast<double>(batch_size);
  const double b1 = 4.0 * c * kappa / 3.0;
  return (b1 + std::sqrt(b1 * b1 + 32.0 * nb * c * kappa * kappa)) / (2.0 * nb);
}

// Integral of the value tail, int_0^inf exp(-W(tau)) dtau, by composite
// Simpson quadrature on an interval cut where the integrand underflows.
inline double bernstein_integral(std::int64_t batch_size, double kappa) {
  double hi = 1.0;
  while (bernstein_value_tail(hi, batch_size, kappa) > 1e-30) hi *= 2.0;
  const int segments = 200000;
  const double h = hi / segments;
  double acc = bernstein_value_tail(0.0, batch_size, kappa) + bernstein_value_tail(hi, batch_size, kappa);
  for (int i = 1; i < segments; ++i)
    acc += bernstein_value_tail(h * i, batch_size, kappa) * (i % 2 == 1 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

// Closed-form upper bound on the same integral: tau* + exp(-sqrt(|B|) tau*) / sqrt(|B|)
// with tau* = 8 kappa^2 / (sqrt(|B|) - 4 kappa / 3). Requires sqrt(|B|)/kappa > 4/3.
inline double bernstein_integral_bound(std::int64_t batch_size, double kappa) {
  const double rt = std::sqrt(static_cast<double>(batch_size));
  if (!(rt / kappa > 4.0 / 3.0)) throw std::invalid_argument("batch too small for the closed-form tail bound");
  const double tau_star = 8.0 * kappa * kappa / (rt - 4.0 * kappa / 3.0);
  return tau_star + std::exp(-rt * tau_star) / rt;
}

// Threshold (1/eta) sqrt(pi / (2 |B|)) for the expected-decrement condition
// under a centered Gaussian value-noise model.
inline double expectation_threshold(double eta, std::int64_t batch_size) {
  if (!(eta > 0.0)) throw std::invalid_argument("eta must be positive");
  return std::sqrt(M_PI / (2.0 * static_cast<double>(batch_size))) / eta;
}

enum class NoiseKind { None, AdditiveBounded, AdditiveGaussian, Subsampled };

inline std::string to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::None: return "none";
    case NoiseKind::AdditiveBounded: return "additive_bounded";
    case NoiseKind::AdditiveGaussian: return "additive_gaussian";
    case NoiseKind::Subsampled: return "subsampled";
  }
  return "none";
}

inline NoiseKind noise_kind_from_string(const std::string& s) {
  if (s == "none") return NoiseKind::None;
  if (s == "additive_bounded") return NoiseKind::AdditiveBounded;
  if (s == "additive_gaussian") return NoiseKind::AdditiveGaussian;
  if (s == "subsampled") return NoiseKind::Subsampled;
  throw std::invalid_argument("unknown noise kind: " + s);
}

// Noise configuration. Amplitudes are uniform half-widths for the bounded
// mode and standard deviations for the Gaussian mode, per derivative order.
struct NoiseModel {
  NoiseKind kind = NoiseKind::None;
  double amp_value = 0.0;
  double amp_gradient = 0.0;
  double amp_hessian = 0.0;
  std::int64_t batch_value = 0;
  std::int64_t batch_gradient = 0;
};

// Query roles. Every stochastic draw is a pure function of
// (stream, iteration, role), so identical queries within an iteration agree
// without any cache, and replications with different streams are independent.
enum class QueryRole : std::uint64_t {
  ValueAtCenter = 1,
  GradientAtCenter = 2,
  HessianAtCenter = 3,
  ValueAtTrial = 4,
};

// Inexact oracle over an exact problem. The subsampled mode requires the
// finite-sum structure and supports derivatives up to order 1; one value
// batch per iteration serves both the center bundle and the decrease, and
// one gradient batch serves every derivative query of that iteration.
class NoisyOracle {
 public:
  NoisyOracle(ExactOracle exact, NoiseModel noise, std::uint64_t stream,
              std::shared_ptr<const FiniteSumProblem> sum = nullptr)
      : exact_(std::move(exact)), noise_(noise), stream_(stream), sum_(std::move(sum)) {
    if (noise_.kind == NoiseKind::Subsampled) {
      if (!sum_) throw std::invalid_argument("subsampled noise requires a finite-sum problem");
      if (noise_.batch_value < 1 || noise_.batch_gradient < 1) throw std::invalid_argument("batch sizes must be positive");
      if (noise_.batch_value > sum_->universe_size() || noise_.batch_gradient > sum_->universe_size())
        throw std::invalid_argument("batch size exceeds the component universe");
      sampler_ = std::make_unique<WithoutReplacementSampler>(sum_->universe_size());
    }
  }

  const ExactOracle& exact() const { return exact_; }
  const NoiseModel& noise() const { return noise_; }
  std::uint64_t stream() const { return stream_; }

  DerivativeBundle eval(const Vector& x, int order, std::int64_t iteration) const {
    switch (noise_.kind) {
      case NoiseKind::None:
        return exact_.bundle(x, order);
      case NoiseKind::AdditiveBounded:
      case NoiseKind::AdditiveGaussian:
        return additive_bundle(x, order, iteration);
      case NoiseKind::Subsampled:
        return subsampled_bundle(x, order, iteration);
    }
    throw std::logic_error("unreachable");
  }

  // Noisy decrease fbar(x) - fbar(x + s) for the step acceptance test.
  double decrease(const Vector& x, const Vector& s, std::int64_t iteration) const {
    switch (noise_.kind) {
      case NoiseKind::None:
        return exact_.value(x) - exact_.value(x + s);
      case NoiseKind::AdditiveBounded:
      case NoiseKind::AdditiveGaussian: {
        const double before = exact_.value(x) + value_error(iteration, QueryRole::ValueAtCenter);
        const double after = exact_.value(x + s) + value_error(iteration, QueryRole::ValueAtTrial);
        return before - after;
      }
      case NoiseKind::Subsampled: {
        const BatchDraw b = value_batch(iteration);
        double acc = 0.0;
        const Vector y = x + s;
        for (std::int64_t i : b.indices) acc += sum_->component_value(i, x) - sum_->component_value(i, y);
        return acc / static_cast<double>(b.size());
      }
    }
    throw std::logic_error("unreachable");
  }

  // Per-iteration batches (subsampled mode). Regenerated deterministically.
  BatchDraw value_batch(std::int64_t iteration) const { return make_batch(iteration, QueryRole::ValueAtCenter, noise_.batch_value); }
  BatchDraw gradient_batch(std::int64_t iteration) const {
    return make_batch(iteration, QueryRole::GradientAtCenter, noise_.batch_gradient);
  }

 private:
  double value_error(std::int64_t iteration, QueryRole role) const {
    Rng rng(derive_seed(stream_, static_cast<std::uint64_t>(iteration), static_cast<std::uint64_t>(role)));
    if (noise_.kind == NoiseKind::AdditiveBounded) return noise_.amp_value * rng.next_uniform(-1.0, 1.0);
    return noise_.amp_value * rng.next_normal();
  }

  DerivativeBundle additive_bundle(const Vector& x, int order, std::int64_t iteration) const {
    DerivativeBundle b = exact_.bundle(x, order);
    b.value += value_error(iteration, QueryRole::ValueAtCenter);
    {
      Rng rng(derive_seed(stream_, static_cast<std::uint64_t>(iteration),
                          static_cast<std::uint64_t>(QueryRole::GradientAtCenter)));
      for (int i = 0; i < b.gradient.size(); ++i)
        b.gradient[i] += noise_.amp_gradient *
                         (noise_.kind == NoiseKind::AdditiveBounded ? rng.next_uniform(-1.0, 1.0) : rng.next_normal());
    }
    if (order >= 2) {
      Rng rng(derive_seed(stream_, static_cast<std::uint64_t>(iteration),
                          static_cast<std::uint64_t>(QueryRole::HessianAtCenter)));
      const int n = b.dimension();
      for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
          const double e = noise_.amp_hessian *
                           (noise_.kind == NoiseKind::AdditiveBounded ? rng.next_uniform(-1.0, 1.0) : rng.next_normal());
          b.hessian(i, j) += e;
          if (j != i) b.hessian(j, i) += e;
        }
    }
    return b;
  }

  DerivativeBundle subsampled_bundle(const Vector& x, int order, std::int64_t iteration) const {
    if (order > 1) throw std::runtime_error("subsampled oracle provides derivatives up to order 1");
    DerivativeBundle b;
    b.order = order;
    const BatchDraw bv = value_batch(iteration);
    double acc = 0.0;
    for (std::int64_t i : bv.indices) acc += sum_->component_value(i, x);
    b.value = acc / static_cast<double>(bv.size());
    const BatchDraw bg = gradient_batch(iteration);
    Vector g = Vector::Zero(exact_.dimension);
    for (std::int64_t i : bg.indices) g += sum_->component_gradient(i, x);
    b.gradient = g / static_cast<double>(bg.size());
    return b;
  }

  BatchDraw make_batch(std::int64_t iteration, QueryRole role, std::int64_t count) const {
    Rng rng(derive_seed(stream_, static_cast<std::uint64_t>(iteration), static_cast<std::uint64_t>(role)));
    BatchDraw out;
    out.iteration = iteration;
    out.signed_universe = sum_->signed_universe;
    const std::vector<std::int64_t> ords = sampler_->draw(count, rng);
    out.indices.resize(ords.size());
    for (std::size_t i = 0; i < ords.size(); ++i) out.indices[i] = sum_->index_at(ords[i]);
    return out;
  }

  ExactOracle exact_;
  NoiseModel noise_;
  std::uint64_t stream_;
  std::shared_ptr<const FiniteSumProblem> sum_;
  mutable std::unique_ptr<WithoutReplacementSampler> sampler_;
};

}  // namespace ntrust
