#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include <Eigen/Core>

namespace ntrust {

// Deterministic 64-bit generator (splitmix64). Hand-rolled because the
// standard <random> distributions are not bit-stable across platforms and
// every run artifact here must be byte-reproducible from its seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform on [0, 1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n), n > 0. Rejection keeps it unbiased.
  std::uint64_t next_below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

  // Standard normal via Box-Muller (deterministic, platform independent).
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1;
    do {
      u1 = next_double();
    } while (u1 <= 0.0);
    const double u2 = next_double();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    spare_ = mag * std::sin(2.0 * M_PI * u2);
    have_spare_ = true;
    return mag * std::cos(2.0 * M_PI * u2);
  }

  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  Eigen::VectorXd next_gaussian_vector(int n) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = next_normal();
    return v;
  }

  // Uniform on the sphere of radius `radius`.
  Eigen::VectorXd next_on_sphere(int n, double radius) {
    Eigen::VectorXd v = next_gaussian_vector(n);
    double nrm = v.norm();
    while (nrm == 0.0) {
      v = next_gaussian_vector(n);
      nrm = v.norm();
    }
    return v * (radius / nrm);
  }

  // Uniform in the closed ball of radius `radius`.
  Eigen::VectorXd next_in_ball(int n, double radius) {
    const double shell = std::pow(next_double(), 1.0 / static_cast<double>(n));
    return next_on_sphere(n, radius * shell);
  }

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Mixes one word into a stream id. Used to derive independent substreams
// (per replication, per iteration, per role) from one root seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t word) {
  Rng r(seed ^ (word + 0x9e3779b97f4a7c15ULL));
  return r.next_u64();
}

template <typename... Words>
std::uint64_t derive_seed(std::uint64_t root, Words... words) {
  std::uint64_t s = root;
  ((s = mix_seed(s, static_cast<std::uint64_t>(words))), ...);
  return s;
}

// Sample `count` distinct ordinals from [0, universe) without replacement.
// Partial Fisher-Yates against a persistent identity pool; touched slots are
// restored afterwards so the pool stays the identity permutation. O(count)
// per draw, no per-draw allocation once the pool exists.
class WithoutReplacementSampler {
 public:
  explicit WithoutReplacementSampler(std::int64_t universe) : pool_(universe) {
    std::iota(pool_.begin(), pool_.end(), std::int64_t{0});
  }

  std::int64_t universe() const { return static_cast<std::int64_t>(pool_.size()); }

  std::vector<std::int64_t> draw(std::int64_t count, Rng& rng) {
    const std::int64_t n = universe();
    if (count > n) count = n;
    swaps_.resize(static_cast<std::size_t>(count));
    std::vector<std::int64_t> out(static_cast<std::size_t>(count));
    for (std::int64_t i = 0; i < count; ++i) {
      const std::int64_t j = i + static_cast<std::int64_t>(rng.next_below(static_cast<std::uint64_t>(n - i)));
      std::swap(pool_[static_cast<std::size_t>(i)], pool_[static_cast<std::size_t>(j)]);
      swaps_[static_cast<std::size_t>(i)] = j;
      out[static_cast<std::size_t>(i)] = pool_[static_cast<std::size_t>(i)];
    }
    for (std::int64_t i = count - 1; i >= 0; --i) {
      // Undo swaps in reverse so the pool is identity again.
      std::swap(pool_[static_cast<std::size_t>(i)], pool_[static_cast<std::size_t>(swaps_[static_cast<std::size_t>(i)])]);
    }
    return out;
  }

 private:
  std::vector<std::int64_t> pool_;
  std::vector<std::int64_t> swaps_;
};

}  // namespace ntrust
