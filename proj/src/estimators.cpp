#include "armgrad/estimators.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <string>

namespace armgrad {

namespace {

void check_shapes(const FunctionOracle& f, const LogitVector& phi, std::size_t u) {
  if (f.arity() != phi.size() || u != phi.size()) {
    throw DimensionError("estimator inputs disagree on dimension: f " +
                         std::to_string(f.arity()) + ", phi " + std::to_string(phi.size()) +
                         ", u " + std::to_string(u));
  }
}

GradEstimate wrap(Estimator est, std::vector<double> values, const FunctionOracle& f,
                  const LogitVector& phi, std::span<const double> u, const RngStream& rng) {
  GradEstimate g;
  g.values = std::move(values);
  g.estimator = est;
  g.n_samples = 1;
  g.seed = rng.seed();
  g.stream_id = rng.stream_id();
  if (f.has_psi()) g.psi_grad = f.psi_gradient(threshold_sample(u, phi));
  return g;
}

}  // namespace

std::string_view to_string(Estimator e) {
  switch (e) {
    case Estimator::Reinforce: return "reinforce";
    case Estimator::AR: return "ar";
    case Estimator::ARM: return "arm";
    case Estimator::ArConstBaseline: return "ar_const_baseline";
  }
  return "unknown";
}

Estimator parse_estimator(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "reinforce") return Estimator::Reinforce;
  if (lower == "ar") return Estimator::AR;
  if (lower == "arm") return Estimator::ARM;
  if (lower == "ar_const_baseline") return Estimator::ArConstBaseline;
  throw InvalidArgument("unknown estimator '" + std::string(name) + "'");
}

std::vector<double> reinforce_at(const FunctionOracle& f, const LogitVector& phi,
                                 std::span<const double> u) {
  check_shapes(f, phi, u.size());
  const BinarySample z = threshold_sample(u, phi);
  const double value = f(z);
  std::vector<double> g(z.size());
  for (std::size_t v = 0; v < z.size(); ++v) g[v] = value * (z[v] - sigmoid(phi[v]));
  return g;
}

std::vector<double> ar_at(const FunctionOracle& f, const LogitVector& phi,
                          std::span<const double> u) {
  check_shapes(f, phi, u.size());
  const double value = f(threshold_sample(u, phi));
  std::vector<double> g(u.size());
  for (std::size_t v = 0; v < u.size(); ++v) g[v] = value * (1.0 - 2.0 * u[v]);
  return g;
}

std::vector<double> arm_at(const FunctionOracle& f, const LogitVector& phi,
                           std::span<const double> u) {
  check_shapes(f, phi, u.size());
  const BinarySample z1 = antithetic_sample(u, phi);
  const BinarySample z2 = threshold_sample(u, phi);
  std::vector<double> g(u.size(), 0.0);
  if (z1 == z2) return g;
  const double delta = f(z1) - f(z2);
  for (std::size_t v = 0; v < u.size(); ++v) g[v] = delta * (u[v] - 0.5);
  return g;
}

std::vector<double> antisym_baseline(const FunctionOracle& f, const LogitVector& phi,
                                     std::span<const double> u) {
  check_shapes(f, phi, u.size());
  const double sum = f(threshold_sample(u, phi)) + f(antithetic_sample(u, phi));
  std::vector<double> b(u.size());
  for (std::size_t v = 0; v < u.size(); ++v) b[v] = sum * (0.5 - u[v]);
  return b;
}

std::vector<double> ar_const_baseline_at(const FunctionOracle& f, const LogitVector& phi,
                                         std::span<const double> c,
                                         std::span<const double> u) {
  check_shapes(f, phi, u.size());
  if (c.size() != phi.size()) throw DimensionError("baseline length does not match logits");
  for (double cv : c) {
    if (!std::isfinite(cv)) throw InvalidArgument("baseline entries must be finite");
  }
  const double value = f(threshold_sample(u, phi));
  std::vector<double> g(u.size());
  for (std::size_t v = 0; v < u.size(); ++v) g[v] = (value - c[v]) * (1.0 - 2.0 * u[v]);
  return g;
}

GradEstimate reinforce_grad(const FunctionOracle& f, const LogitVector& phi, RngStream& rng) {
  const auto u = rng.uniform_draw(phi.size());
  return wrap(Estimator::Reinforce, reinforce_at(f, phi, u.values), f, phi, u.values, rng);
}

GradEstimate ar_grad(const FunctionOracle& f, const LogitVector& phi, RngStream& rng) {
  const auto u = rng.uniform_draw(phi.size());
  return wrap(Estimator::AR, ar_at(f, phi, u.values), f, phi, u.values, rng);
}

GradEstimate arm_grad(const FunctionOracle& f, const LogitVector& phi, RngStream& rng) {
  const auto u = rng.uniform_draw(phi.size());
  return wrap(Estimator::ARM, arm_at(f, phi, u.values), f, phi, u.values, rng);
}

GradEstimate ar_const_baseline_grad(const FunctionOracle& f, const LogitVector& phi,
                                    std::span<const double> c, RngStream& rng) {
  const auto u = rng.uniform_draw(phi.size());
  return wrap(Estimator::ArConstBaseline, ar_const_baseline_at(f, phi, c, u.values), f, phi,
              u.values, rng);
}

GradEstimate single_sample(Estimator est, const FunctionOracle& f, const LogitVector& phi,
                           RngStream& rng, const SampleOptions& options) {
  switch (est) {
    case Estimator::Reinforce: return reinforce_grad(f, phi, rng);
    case Estimator::AR: return ar_grad(f, phi, rng);
    case Estimator::ARM: return arm_grad(f, phi, rng);
    case Estimator::ArConstBaseline: return ar_const_baseline_grad(f, phi, options.baseline, rng);
  }
  throw InvalidArgument("unknown estimator id");
}

GradEstimate k_sample(Estimator est, const FunctionOracle& f, const LogitVector& phi,
                      std::size_t k, RngStream& rng, const SampleOptions& options) {
  if (k < 1) throw InvalidArgument("k_sample requires K >= 1");
  const std::size_t draws = (est == Estimator::AR && options.ar_matched_budget) ? 2 * k : k;
  GradEstimate total;
  total.values.assign(phi.size(), 0.0);
  if (f.has_psi()) total.psi_grad.assign(f.psi_size(), 0.0);
  total.estimator = est;
  total.n_samples = draws;
  total.seed = rng.seed();
  total.stream_id = rng.stream_id();
  for (std::size_t i = 0; i < draws; ++i) {
    const GradEstimate one = single_sample(est, f, phi, rng, options);
    for (std::size_t v = 0; v < one.values.size(); ++v) total.values[v] += one.values[v];
    for (std::size_t j = 0; j < one.psi_grad.size(); ++j) total.psi_grad[j] += one.psi_grad[j];
  }
  const double scale = 1.0 / static_cast<double>(draws);
  for (auto& v : total.values) v *= scale;
  for (auto& v : total.psi_grad) v *= scale;
  return total;
}

CorrelationReport correlation_report(const FunctionOracle& f, const LogitVector& phi,
                                     std::size_t n, RngStream& rng) {
  if (n < 100) throw InvalidArgument("correlation_report needs n >= 100");
  const std::size_t dim = phi.size();
  // Welford co-moments for the pair (a, b) = (-g(u), g(1-u)).
  std::vector<double> mean_a(dim, 0.0), mean_b(dim, 0.0), m2a(dim, 0.0), m2b(dim, 0.0),
      cab(dim, 0.0);
  std::vector<double> flipped(dim);
  for (std::size_t i = 0; i < n; ++i) {
    const auto u = rng.uniform_draw(dim);
    for (std::size_t v = 0; v < dim; ++v) flipped[v] = 1.0 - u.values[v];
    const auto g_u = ar_at(f, phi, u.values);
    const auto g_flip = ar_at(f, phi, flipped);
    const double count = static_cast<double>(i + 1);
    for (std::size_t v = 0; v < dim; ++v) {
      const double a = -g_u[v];
      const double b = g_flip[v];
      const double da = a - mean_a[v];
      mean_a[v] += da / count;
      const double db = b - mean_b[v];
      mean_b[v] += db / count;
      m2a[v] += da * (a - mean_a[v]);
      m2b[v] += db * (b - mean_b[v]);
      cab[v] += da * (b - mean_b[v]);
    }
  }
  CorrelationReport report;
  report.n = n;
  report.rho.resize(dim);
  report.variance_ratio.resize(dim);
  report.degenerate.resize(dim);
  for (std::size_t v = 0; v < dim; ++v) {
    const double tiny = std::numeric_limits<double>::min();
    if (m2a[v] <= tiny || m2b[v] <= tiny) {
      report.degenerate[v] = 1;
      report.rho[v] = std::numeric_limits<double>::quiet_NaN();
      report.variance_ratio[v] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    const double rho = std::clamp(cab[v] / std::sqrt(m2a[v] * m2b[v]), -1.0, 1.0);
    report.rho[v] = rho;
    report.variance_ratio[v] = 1.0 - rho;
  }
  return report;
}

}  // namespace armgrad
