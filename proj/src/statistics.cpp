#include "armgrad/statistics.hpp"

#include <cmath>

namespace armgrad {

void RunningMoments::add(double x) {
  const double n1 = static_cast<double>(n_);
  ++n_;
  const double n = static_cast<double>(n_);
  const double delta = x - mean_;
  const double delta_n = delta / n;
  const double delta_n2 = delta_n * delta_n;
  const double term1 = delta * delta_n * n1;
  mean_ += delta_n;
  m4_ += term1 * delta_n2 * (n * n - 3 * n + 3) + 6 * delta_n2 * m2_ - 4 * delta_n * m3_;
  m3_ += term1 * delta_n * (n - 2) - 3 * delta_n * m2_;
  m2_ += term1;
}

double RunningMoments::variance() const {
  return n_ < 2 ? 0.0 : m2_ / static_cast<double>(n_ - 1);
}

double RunningMoments::stddev() const { return std::sqrt(variance()); }

double RunningMoments::standard_error() const {
  return n_ == 0 ? 0.0 : stddev() / std::sqrt(static_cast<double>(n_));
}

double RunningMoments::variance_standard_error() const {
  if (n_ < 2) return 0.0;
  const double n = static_cast<double>(n_);
  const double mu2 = m2_ / n;
  const double mu4 = m4_ / n;
  const double spread = mu4 - mu2 * mu2;
  return spread > 0.0 ? std::sqrt(spread / n) : 0.0;
}

double RunningMoments::snr() const {
  const double s = stddev();
  return s > 0.0 ? std::abs(mean_) / s : 0.0;
}

double RunningMoments::snr_standard_error() const {
  if (n_ < 2 || m2_ <= 0.0) return 0.0;
  const double n = static_cast<double>(n_);
  const double mu2 = m2_ / n;
  const double skew = (m3_ / n) / std::pow(mu2, 1.5);
  const double kurt = (m4_ / n) / (mu2 * mu2);
  const double r = snr();
  // var(|m|/s) ~ (1 - sign(m) skew r + r^2 (kurt - 1) / 4) / n
  const double sign = mean_ >= 0.0 ? 1.0 : -1.0;
  const double v = 1.0 - sign * skew * r + r * r * (kurt - 1.0) / 4.0;
  return v > 0.0 ? std::sqrt(v / n) : 0.0;
}

namespace {

template <typename Draw>
EstimatorReport summarize(Estimator est, std::size_t dim, std::size_t n, Draw&& draw) {
  std::vector<RunningMoments> moments(dim);
  for (std::size_t i = 0; i < n; ++i) {
    const GradEstimate g = draw();
    for (std::size_t v = 0; v < dim; ++v) moments[v].add(g.values[v]);
  }
  EstimatorReport report;
  report.estimator = est;
  report.n_samples = n;
  for (const auto& m : moments) {
    report.mean.push_back(m.mean());
    report.variance.push_back(m.variance());
    report.standard_error.push_back(m.standard_error());
    report.variance_standard_error.push_back(m.variance_standard_error());
    report.snr.push_back(m.snr());
  }
  return report;
}

}  // namespace

EstimatorReport estimator_moments(Estimator est, const FunctionOracle& f, const LogitVector& phi,
                                  std::size_t n_samples, RngStream& rng,
                                  const SampleOptions& options) {
  if (n_samples < 2) throw InvalidArgument("estimator_moments needs n_samples >= 2");
  return summarize(est, phi.size(), n_samples,
                   [&] { return single_sample(est, f, phi, rng, options); });
}

EstimatorReport k_sample_moments(Estimator est, const FunctionOracle& f, const LogitVector& phi,
                                 std::size_t k, std::size_t repetitions, RngStream& rng,
                                 const SampleOptions& options) {
  if (repetitions < 2) throw InvalidArgument("k_sample_moments needs repetitions >= 2");
  return summarize(est, phi.size(), repetitions,
                   [&] { return k_sample(est, f, phi, k, rng, options); });
}

}  // namespace armgrad
