#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "armgrad/harness/config.hpp"
#include "armgrad/harness/dataset.hpp"
#include "armgrad/harness/properties.hpp"
#include "armgrad/harness/report.hpp"
#include "armgrad/sbn.hpp"

namespace armgrad::harness {

// CSV schemas (one row per entry, header always present):
//   toy:             p0,estimator,iteration,phi,sigma_phi,grad,grad_variance,analytic_variance
//   variance_report: p0,phi,estimator,n,mean,stddev,snr,snr_se,true_grad,analytic_stddev,analytic_snr
//   train_vae:       step,epoch,train_neg_elbo,train_neg_elbo_smoothed,valid_neg_elbo,test_neg_elbo
//   train_mle:       step,epoch,train_neg_loglik,valid_nll,test_nll
//   property_suite:  property,checks,failures,passed,detail

struct ToyTrace {
  double p0 = 0.0;
  std::string estimator;
  std::vector<double> phi;  // phi_0 .. phi_iterations
  double final_sigma() const;
};

struct ToyResult : RunArtifacts {
  std::vector<ToyTrace> traces;
};

/// Gradient ascent on E[(z - p0)^2] from phi0 for every requested p0 and
/// estimator ("true" uses the exact gradient). Row i holds phi_i and the
/// gradient estimated there; the update uses that same estimate. Every
/// variance_every iterations the empirical variance of variance_samples
/// fresh single-sample estimates at phi_i is logged.
ToyResult run_toy(const ExperimentConfig& config);

struct VariancePoint {
  double p0 = 0.0;
  double phi = 0.0;
  std::string estimator;
  std::size_t n = 0;
  double mean = 0.0;
  double stddev = 0.0;
  double snr = 0.0;
  double snr_se = 0.0;
  double true_grad = 0.0;
  double analytic_stddev = 0.0;
  double analytic_snr = 0.0;
};

struct VarianceReportResult : RunArtifacts {
  std::vector<VariancePoint> points;
};

/// Points of the phi grid: grid_min + i * grid_step up to grid_max.
std::vector<double> phi_grid(const ExperimentConfig& config);

/// K single-sample estimates per (p0, phi, estimator), each cell on its own
/// independent stream.
VarianceReportResult run_variance_report(const ExperimentConfig& config);

/// Mean of values[step - window .. step - 1] (steps are 1-based; the
/// window is clipped at the first step).
double trailing_mean(const std::vector<double>& values, std::size_t step, std::size_t window);

struct TrainVaeResult : RunArtifacts {
  std::vector<double> step_neg_elbo;  // batch mean of the single-sample -ELBO, per step
  std::size_t best_step = 0;
  double best_valid_neg_elbo = 0.0;
  double test_neg_elbo_at_best = 0.0;
  sbn::LayerStack model;
};

/// Adam ascent on the single-sample ELBO with arm_backprop_elbo gradients.
TrainVaeResult run_train_vae(const ExperimentConfig& config);
TrainVaeResult run_train_vae(const ExperimentConfig& config, const Dataset& data);

struct TrainMleResult : RunArtifacts {
  std::vector<double> step_neg_loglik;
  double test_nll_init = 0.0;
  double test_nll_final = 0.0;
  sbn::ConditionalStack model;
};

/// Predicts the lower half of each image from the upper half with a
/// stochastic binary network trained by arm_backprop_mle; NLL from
/// iwae_style_loglik with eval_k samples.
TrainMleResult run_train_mle(const ExperimentConfig& config);
TrainMleResult run_train_mle(const ExperimentConfig& config, const Dataset& data);

/// Mean of -iwae_style_loglik over images split into (upper, lower) halves.
double mean_test_nll(const sbn::ConditionalStack& model, const std::vector<Image>& images,
                     std::size_t k, RngStream& rng);

struct PropertySuiteResult : RunArtifacts {
  std::vector<PropertyResult> properties;
};

/// Runs every property check. iterations is the base Monte Carlo sample
/// count n: unbiasedness checks use n, analytic variance 5n, antithetic
/// merge n / 10 repetitions, baseline grid n / 2.
PropertySuiteResult run_property_suite(const ExperimentConfig& config);

/// Dispatches on config.experiment.
RunArtifacts run_experiment(const ExperimentConfig& config);

}  // namespace armgrad::harness
