#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace armgrad::harness {

struct PropertyResult {
  std::string name;
  std::size_t checks = 0;
  std::size_t failures = 0;
  bool passed = false;
  std::string detail;  // human readable, never contains commas
};

/// Random tables in [0, 1] over V <= 6 variables with logits in [-3, 3]:
/// REINFORCE, AR and ARM means within 4 SE of the exact gradient in at
/// least 95% of coordinate checks, per estimator.
PropertyResult check_unbiasedness(std::uint64_t seed, std::size_t instances, std::size_t n);

/// Empirical variances of ARM, AR and REINFORCE on the toy problem
/// (p0 = 0.49) within 5% of the closed forms at phi in {-2, -1, -0.5, 0,
/// 0.5, 1, 2}.
PropertyResult check_analytic_variance(std::uint64_t seed, std::size_t n);

/// Maximum of the ARM variance at t = (sqrt 5 - 1) / 2 equals 0.039788
/// (f1 - f0)^2, and the sup-ratio bound holds for random sign-definite
/// (f0, f1) pairs.
PropertyResult check_variance_bound_constants(std::uint64_t seed, std::size_t pairs);

/// ARM(u) = (AR(u) + AR(1 - u)) / 2 on random draws, and
/// var(ARM_K) <= var(AR_2K) + 3 SE for nonnegative f, K in {1, 4}.
PropertyResult check_antithetic_merge(std::uint64_t seed, std::size_t draws, std::size_t instances,
                                      std::size_t repetitions);

/// AR - antisym_baseline = ARM on random draws, and no constant baseline
/// on a 21-point grid beats ARM's variance on the toy problem.
PropertyResult check_optimal_baseline(std::uint64_t seed, std::size_t draws, std::size_t n);

/// Two stochastic layers of three units: arm_backprop ELBO and MLE
/// gradient means within 4 SE of the enumerated exact gradient for every
/// parameter.
PropertyResult check_multilayer_unbiasedness(std::uint64_t seed, std::size_t n);

}  // namespace armgrad::harness
