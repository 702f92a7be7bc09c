#pragma once

#include <cmath>

namespace armgrad::analytic {

/// Objective (z - p0)^2 with z ~ Bernoulli(sigmoid(phi)); maximized by
/// sigmoid(phi) = 1 when p0 < 1/2 and 0 when p0 > 1/2.
class ToyProblem {
 public:
  explicit ToyProblem(double p0);

  double p0() const { return p0_; }
  double f0() const { return p0_ * p0_; }
  double f1() const { return (1.0 - p0_) * (1.0 - p0_); }
  double operator()(int z) const { return z ? f1() : f0(); }

 private:
  double p0_;
};

/// t = sigmoid(|phi|) - sigmoid(-|phi|): probability that the two
/// antithetic samples agree.
struct AnalyticPoint {
  double phi = 0.0;
  double t = 0.0;
  static AnalyticPoint at(double phi);
};

double true_grad_univariate(double f1, double f0, double phi);

/// (1/16)(1 - t)(t^3 + 7/3 t^2 + 1/3 t + 1/3)(f1 - f0)^2
double arm_variance_univariate(double f1, double f0, double phi);

/// The same polynomial evaluated directly at t (phi-free form).
double arm_variance_at_t(double t, double f1, double f0);

/// sigmoid(phi)(1 - sigmoid(phi)) [(1 - sigmoid(phi)) f1 + sigmoid(phi) f0]^2
double reinforce_variance_univariate(double f1, double f0, double phi);

/// (1/6)(f0^2 + f1^2) + (1/6)(1 - 2 s)^3 (f0^2 - f1^2) - s^2 (1 - s)^2 (f1 - f0)^2
double ar_variance_univariate(double f1, double f0, double phi);

/// |true gradient| / ARM standard deviation. f cancels, so this depends on
/// phi alone.
double arm_snr_univariate(double phi);

/// Location of the ARM variance maximum in t, (sqrt(5) - 1) / 2.
inline double arm_variance_argmax_t() { return (std::sqrt(5.0) - 1.0) / 2.0; }

/// Sixteen twenty-fifths of the squared relative spread, the bound on
/// sup var(ARM) / sup var(REINFORCE) for sign-definite f.
double prop1_ratio_bound(double f1, double f0);

}  // namespace armgrad::analytic
