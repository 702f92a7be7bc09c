#include "armgrad/analytic.hpp"

#include "armgrad/core.hpp"

namespace armgrad::analytic {

ToyProblem::ToyProblem(double p0) : p0_(p0) {
  if (!(p0 > 0.0 && p0 < 1.0)) throw InvalidArgument("toy problem needs 0 < p0 < 1");
}

AnalyticPoint AnalyticPoint::at(double phi) {
  const double a = std::abs(phi);
  return {phi, sigmoid(a) - sigmoid(-a)};
}

double true_grad_univariate(double f1, double f0, double phi) {
  return sigmoid(phi) * sigmoid(-phi) * (f1 - f0);
}

double arm_variance_at_t(double t, double f1, double f0) {
  const double d = f1 - f0;
  return (1.0 / 16.0) * (1.0 - t) * (t * t * t + 7.0 / 3.0 * t * t + t / 3.0 + 1.0 / 3.0) * d * d;
}

double arm_variance_univariate(double f1, double f0, double phi) {
  return arm_variance_at_t(AnalyticPoint::at(phi).t, f1, f0);
}

double reinforce_variance_univariate(double f1, double f0, double phi) {
  const double s = sigmoid(phi);
  const double c = sigmoid(-phi);
  const double m = c * f1 + s * f0;
  return s * c * m * m;
}

double ar_variance_univariate(double f1, double f0, double phi) {
  const double s = sigmoid(phi);
  const double c = sigmoid(-phi);
  const double w = 1.0 - 2.0 * s;
  const double d = f1 - f0;
  return (f0 * f0 + f1 * f1) / 6.0 + w * w * w * (f0 * f0 - f1 * f1) / 6.0 - s * s * c * c * d * d;
}

double arm_snr_univariate(double phi) {
  const double t = AnalyticPoint::at(phi).t;
  const double spread = (1.0 / 16.0) * (1.0 - t) * (t * t * t + 7.0 / 3.0 * t * t + t / 3.0 + 1.0 / 3.0);
  return sigmoid(phi) * sigmoid(-phi) / std::sqrt(spread);
}

double prop1_ratio_bound(double f1, double f0) {
  const double r = 1.0 - 2.0 * f0 / (f0 + f1);
  return 16.0 / 25.0 * r * r;
}

}  // namespace armgrad::analytic
