#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "armgrad/core.hpp"
#include "armgrad/oracle.hpp"

namespace armgrad {

enum class Estimator { Reinforce, AR, ARM, ArConstBaseline };

std::string_view to_string(Estimator e);
/// Accepts "reinforce", "ar", "arm", "ar_const_baseline" (case-insensitive).
Estimator parse_estimator(std::string_view name);

struct GradEstimate {
  std::vector<double> values;
  Estimator estimator = Estimator::ARM;
  std::size_t n_samples = 1;
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
  // Pathwise gradient for the oracle's side parameters; empty if it has none.
  std::vector<double> psi_grad;
};

// Single-sample estimators evaluated at a given uniform vector u. These are
// the deterministic cores; the RngStream overloads below draw u and wrap
// the result.

/// f(z) (z_v - sigmoid(phi_v)) with z = threshold_sample(u, phi).
std::vector<double> reinforce_at(const FunctionOracle& f, const LogitVector& phi,
                                 std::span<const double> u);

/// f(threshold_sample(u, phi)) (1 - 2 u_v).
std::vector<double> ar_at(const FunctionOracle& f, const LogitVector& phi,
                          std::span<const double> u);

/// (f(z1) - f(z2)) (u_v - 1/2), z1 antithetic and z2 threshold sample of the
/// same u. Returns zeros without calling f when z1 == z2.
std::vector<double> arm_at(const FunctionOracle& f, const LogitVector& phi,
                           std::span<const double> u);

/// (f(threshold(u)) + f(antithetic(u))) (1/2 - u_v). Zero-mean and
/// anti-symmetric in u; ar_at - antisym_baseline == arm_at.
std::vector<double> antisym_baseline(const FunctionOracle& f, const LogitVector& phi,
                                     std::span<const double> u);

/// (f(threshold(u)) - c_v) (1 - 2 u_v).
std::vector<double> ar_const_baseline_at(const FunctionOracle& f, const LogitVector& phi,
                                         std::span<const double> c,
                                         std::span<const double> u);

GradEstimate reinforce_grad(const FunctionOracle& f, const LogitVector& phi, RngStream& rng);
GradEstimate ar_grad(const FunctionOracle& f, const LogitVector& phi, RngStream& rng);
GradEstimate arm_grad(const FunctionOracle& f, const LogitVector& phi, RngStream& rng);
GradEstimate ar_const_baseline_grad(const FunctionOracle& f, const LogitVector& phi,
                                    std::span<const double> c, RngStream& rng);

struct SampleOptions {
  /// Constant baseline c, required for Estimator::ArConstBaseline.
  std::vector<double> baseline;
  /// For AR in k_sample: average 2K draws (equal f-evaluation budget with
  /// ARM_K) instead of K.
  bool ar_matched_budget = true;
};

/// One single-sample estimate of the requested kind.
GradEstimate single_sample(Estimator est, const FunctionOracle& f, const LogitVector& phi,
                           RngStream& rng, const SampleOptions& options = {});

/// K-sample estimate. ARM averages K antithetic pairs; AR averages 2K (or K)
/// independent draws; the others average K draws.
GradEstimate k_sample(Estimator est, const FunctionOracle& f, const LogitVector& phi,
                      std::size_t k, RngStream& rng, const SampleOptions& options = {});

struct CorrelationReport {
  std::vector<double> rho;              // Corr(-g_v(u), g_v(1-u)); NaN when degenerate
  std::vector<double> variance_ratio;   // 1 - rho_v
  std::vector<std::uint8_t> degenerate; // 1 if either stream has zero variance
  std::size_t n = 0;
};

/// Empirical correlation between the AR estimate at u (negated) and at 1-u,
/// which fixes var(ARM_K) / var(AR_2K) = 1 - rho.
CorrelationReport correlation_report(const FunctionOracle& f, const LogitVector& phi,
                                     std::size_t n, RngStream& rng);

}  // namespace armgrad
