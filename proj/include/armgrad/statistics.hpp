#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "armgrad/core.hpp"
#include "armgrad/estimators.hpp"
#include "armgrad/oracle.hpp"

namespace armgrad {

/// Streaming central moments up to order four (Welford / Terriberry update).
class RunningMoments {
 public:
  void add(double x);

  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  /// Unbiased sample variance; 0 for fewer than two samples.
  double variance() const;
  double stddev() const;
  double standard_error() const;
  /// Standard error of variance(), from the fourth central moment.
  double variance_standard_error() const;
  /// |mean| / stddev; 0 when stddev is 0.
  double snr() const;
  /// Delta-method standard error of snr(), using sample skewness and kurtosis.
  double snr_standard_error() const;

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
  double m3_ = 0.0;
  double m4_ = 0.0;
};

/// Per-coordinate moments over n independent single-sample estimates.
struct EstimatorReport {
  Estimator estimator = Estimator::ARM;
  std::size_t n_samples = 0;
  std::vector<double> mean;
  std::vector<double> variance;
  std::vector<double> standard_error;
  std::vector<double> variance_standard_error;
  std::vector<double> snr;
};

/// Draws n_samples single-sample estimates sequentially from rng and
/// summarizes them per coordinate.
EstimatorReport estimator_moments(Estimator est, const FunctionOracle& f, const LogitVector& phi,
                                  std::size_t n_samples, RngStream& rng,
                                  const SampleOptions& options = {});

/// Same summary over K-sample estimates (each repetition averages K draws).
EstimatorReport k_sample_moments(Estimator est, const FunctionOracle& f, const LogitVector& phi,
                                 std::size_t k, std::size_t repetitions, RngStream& rng,
                                 const SampleOptions& options = {});

}  // namespace armgrad
