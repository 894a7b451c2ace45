#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>

namespace gmcop {

/// Seeded generator with explicit uniform/normal draws. Distributions are
/// hand-rolled from the raw stream so that identical seeds give identical
/// samples independent of the standard library's implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform on (0, 1).
  double uniform() {
    // 53 random bits; shift keeps the result strictly inside (0,1).
    const double u = ((gen_() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    return u;
  }

  /// Standard normal via Box-Muller.
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  Eigen::VectorXd normal_vector(int n) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  /// Index draw from an unnormalized non-negative weight vector.
  int categorical(const Eigen::VectorXd& weights) {
    const double total = weights.sum();
    double target = uniform() * total;
    for (int j = 0; j < weights.size() - 1; ++j) {
      target -= weights[j];
      if (target <= 0.0) return j;
    }
    return static_cast<int>(weights.size()) - 1;
  }

  std::uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
};

}  // namespace gmcop
