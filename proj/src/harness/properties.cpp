#include "armgrad/harness/properties.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <vector>

#include "armgrad/analytic.hpp"
#include "armgrad/estimators.hpp"
#include "armgrad/oracle.hpp"
#include "armgrad/sbn.hpp"
#include "armgrad/sbn_exact.hpp"
#include "armgrad/statistics.hpp"
#include "armgrad/toy.hpp"

namespace armgrad::harness {

namespace {

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, format, a, b, c);
  return buf;
}

void append(std::string& detail, const std::string& piece) {
  if (!detail.empty()) detail += "; ";
  detail += piece;
}

struct Instance {
  FunctionOracle f;
  LogitVector phi;
};

Instance random_instance(RngStream& rng, std::size_t max_dim, double lo, double hi) {
  const std::size_t dim = 1 + static_cast<std::size_t>(rng.next_u64() % max_dim);
  std::vector<double> table(std::size_t{1} << dim);
  for (auto& v : table) v = lo + (hi - lo) * rng.next_uniform();
  std::vector<double> phi(dim);
  for (auto& p : phi) p = -3.0 + 6.0 * rng.next_uniform();
  return {FunctionOracle::from_table(std::move(table)), LogitVector(std::move(phi))};
}

bool within(double mean, double exact, double se, double k) {
  return std::abs(mean - exact) <= std::max(k * se, 1e-9);
}

}  // namespace

PropertyResult check_unbiasedness(std::uint64_t seed, std::size_t instances, std::size_t n) {
  PropertyResult r;
  r.name = "unbiasedness";
  const Estimator kinds[] = {Estimator::Reinforce, Estimator::AR, Estimator::ARM};
  std::size_t checks[3] = {0, 0, 0}, hits[3] = {0, 0, 0};
  RngStream setup(seed, 1);
  for (std::size_t i = 0; i < instances; ++i) {
    const auto inst = random_instance(setup, 6, 0.0, 1.0);
    const auto exact = exact_gradient(inst.f, inst.phi).values;
    for (int e = 0; e < 3; ++e) {
      RngStream rng = RngStream(seed, 2 + e).substream(i);
      const auto rep = estimator_moments(kinds[e], inst.f, inst.phi, n, rng);
      for (std::size_t v = 0; v < exact.size(); ++v) {
        ++checks[e];
        if (within(rep.mean[v], exact[v], rep.standard_error[v], 4.0)) ++hits[e];
      }
    }
  }
  r.passed = true;
  for (int e = 0; e < 3; ++e) {
    r.checks += checks[e];
    r.failures += checks[e] - hits[e];
    const double frac = double(hits[e]) / double(checks[e]);
    r.passed = r.passed && frac >= 0.95;
    append(r.detail, std::string(to_string(kinds[e])) + fmt(" %.4f of %.0f coordinates within 4 SE", frac, double(checks[e])));
  }
  return r;
}

PropertyResult check_analytic_variance(std::uint64_t seed, std::size_t n) {
  PropertyResult r;
  r.name = "analytic_variance";
  const analytic::ToyProblem toy(0.49);
  const auto f = make_toy_oracle(toy);
  const double phis[] = {-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0};
  struct Kind {
    Estimator est;
    std::function<double(double)> exact;
  };
  const Kind kinds[] = {
      {Estimator::ARM, [&](double p) { return analytic::arm_variance_univariate(toy.f1(), toy.f0(), p); }},
      {Estimator::AR, [&](double p) { return analytic::ar_variance_univariate(toy.f1(), toy.f0(), p); }},
      {Estimator::Reinforce, [&](double p) { return analytic::reinforce_variance_univariate(toy.f1(), toy.f0(), p); }},
  };
  double worst = 0.0;
  std::string worst_at;
  std::uint64_t cell = 0;
  for (const auto& kind : kinds) {
    for (double phi : phis) {
      RngStream rng = RngStream(seed, 10).substream(cell++);
      const auto rep = estimator_moments(kind.est, f, LogitVector{phi}, n, rng);
      const double rel = std::abs(rep.variance[0] / kind.exact(phi) - 1.0);
      ++r.checks;
      if (!(rel <= 0.05)) ++r.failures;
      if (!(rel <= worst)) {
        worst = rel;
        worst_at = std::string(to_string(kind.est)) + fmt(" at phi %g", phi);
      }
    }
  }
  r.passed = r.failures == 0;
  r.detail = fmt("worst relative error %.4f", worst) + " (" + worst_at + ")";
  return r;
}

PropertyResult check_variance_bound_constants(std::uint64_t seed, std::size_t pairs) {
  PropertyResult r;
  r.name = "variance_bound_constants";
  const double t_star = analytic::arm_variance_argmax_t();
  const double peak = analytic::arm_variance_at_t(t_star, 1.0, 0.0);
  const double peak_rel = std::abs(peak / 0.039788 - 1.0);
  ++r.checks;
  if (!(peak_rel <= 1e-5)) ++r.failures;
  // No t on a fine grid exceeds the value at t*.
  ++r.checks;
  double grid_max = 0.0;
  for (int i = 0; i <= 100000; ++i) grid_max = std::max(grid_max, analytic::arm_variance_at_t(i * 1e-5, 1.0, 0.0));
  if (grid_max > peak) ++r.failures;

  RngStream rng(seed, 20);
  double worst_margin = -1.0;
  for (std::size_t i = 0; i < pairs; ++i) {
    const double sign = rng.next_uniform() < 0.5 ? -1.0 : 1.0;
    const double f0 = sign * (0.01 + rng.next_uniform());
    const double f1 = sign * (0.01 + rng.next_uniform());
    double sup_arm = 0.0, sup_reinforce = 0.0;
    for (int k = -10000; k <= 10000; ++k) {
      const double phi = k * 1e-3;
      sup_arm = std::max(sup_arm, analytic::arm_variance_univariate(f1, f0, phi));
      sup_reinforce = std::max(sup_reinforce, analytic::reinforce_variance_univariate(f1, f0, phi));
    }
    const double ratio = sup_arm / sup_reinforce;
    const double bound = analytic::prop1_ratio_bound(f1, f0);
    ++r.checks;
    if (!(ratio <= bound)) ++r.failures;
    worst_margin = std::max(worst_margin, ratio - bound);
  }
  r.passed = r.failures == 0;
  r.detail = fmt("peak %.17g at t %.17g", peak, t_star) + fmt(" relative to 0.039788: %.3g", peak_rel) +
             fmt("; largest sup-ratio minus bound %.4g", worst_margin);
  return r;
}

PropertyResult check_antithetic_merge(std::uint64_t seed, std::size_t draws, std::size_t instances,
                                      std::size_t repetitions) {
  PropertyResult r;
  r.name = "antithetic_merge";
  RngStream rng(seed, 30);
  double worst = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    const auto inst = random_instance(rng, 6, 0.0, 1.0);
    const auto u = rng.uniform_draw(inst.phi.size()).values;
    std::vector<double> mirrored(u.size());
    for (std::size_t v = 0; v < u.size(); ++v) mirrored[v] = 1.0 - u[v];
    const auto arm = arm_at(inst.f, inst.phi, u);
    const auto a = ar_at(inst.f, inst.phi, u);
    const auto b = ar_at(inst.f, inst.phi, mirrored);
    for (std::size_t v = 0; v < u.size(); ++v) {
      const double gap = std::abs(arm[v] - 0.5 * (a[v] + b[v]));
      worst = std::max(worst, gap);
      ++r.checks;
      if (!(gap <= 1e-15)) ++r.failures;
    }
  }
  std::size_t var_checks = 0, var_failures = 0;
  double worst_z = -1e300;
  for (std::size_t i = 0; i < instances; ++i) {
    const auto inst = random_instance(rng, 6, 0.0, 1.0);
    for (std::size_t k : {std::size_t{1}, std::size_t{4}}) {
      RngStream s1 = RngStream(seed, 31).substream(i * 8 + k);
      RngStream s2 = RngStream(seed, 32).substream(i * 8 + k);
      const auto arm = k_sample_moments(Estimator::ARM, inst.f, inst.phi, k, repetitions, s1);
      const auto ar = k_sample_moments(Estimator::AR, inst.f, inst.phi, k, repetitions, s2);
      for (std::size_t v = 0; v < inst.phi.size(); ++v) {
        const double se = std::hypot(arm.variance_standard_error[v], ar.variance_standard_error[v]);
        ++var_checks;
        if (!(arm.variance[v] <= ar.variance[v] + 3.0 * se)) ++var_failures;
        if (se > 0) worst_z = std::max(worst_z, (arm.variance[v] - ar.variance[v]) / se);
      }
    }
  }
  r.checks += var_checks;
  r.failures += var_failures;
  r.passed = r.failures == 0;
  r.detail = fmt("largest identity gap %.3g", worst) +
             fmt("; %.0f of %.0f variance checks failed", double(var_failures), double(var_checks)) +
             fmt("; largest (var ARM_K - var AR_2K) / SE %.3f", worst_z);
  return r;
}

PropertyResult check_optimal_baseline(std::uint64_t seed, std::size_t draws, std::size_t n) {
  PropertyResult r;
  r.name = "optimal_baseline";
  RngStream rng(seed, 40);
  double worst = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    const auto inst = random_instance(rng, 6, -2.0, 2.0);
    const auto u = rng.uniform_draw(inst.phi.size()).values;
    const auto arm = arm_at(inst.f, inst.phi, u);
    const auto ar = ar_at(inst.f, inst.phi, u);
    const auto base = antisym_baseline(inst.f, inst.phi, u);
    for (std::size_t v = 0; v < u.size(); ++v) {
      const double gap = std::abs(ar[v] - base[v] - arm[v]);
      worst = std::max(worst, gap);
      ++r.checks;
      if (!(gap <= 1e-12)) ++r.failures;
    }
  }
  const analytic::ToyProblem toy(0.49);
  const auto f = make_toy_oracle(toy);
  const double f_max = std::max(toy.f0(), toy.f1());
  std::size_t grid_failures = 0;
  double closest = 1e300;
  std::uint64_t cell = 0;
  for (double phi : {0.0, 1.0}) {
    RngStream arm_rng = RngStream(seed, 41).substream(cell++);
    const auto arm = estimator_moments(Estimator::ARM, f, LogitVector{phi}, n, arm_rng);
    for (int j = 0; j <= 20; ++j) {
      const double c = -2.0 * f_max + j * (4.0 * f_max / 20.0);
      SampleOptions opts;
      opts.baseline = {c};
      RngStream rng_c = RngStream(seed, 42).substream(cell++);
      const auto rep = estimator_moments(Estimator::ArConstBaseline, f, LogitVector{phi}, n, rng_c, opts);
      const double se = std::hypot(arm.variance_standard_error[0], rep.variance_standard_error[0]);
      ++r.checks;
      if (!(rep.variance[0] >= arm.variance[0] - 3.0 * se)) {
        ++r.failures;
        ++grid_failures;
      }
      closest = std::min(closest, rep.variance[0] / arm.variance[0]);
    }
  }
  r.passed = r.failures == 0;
  r.detail = fmt("largest identity gap %.3g", worst) + fmt("; %.0f of 42 baseline cells failed", double(grid_failures)) +
             fmt("; smallest var(AR_c) / var(ARM) %.4f", closest);
  return r;
}

PropertyResult check_multilayer_unbiasedness(std::uint64_t seed, std::size_t n) {
  PropertyResult r;
  r.name = "multilayer_unbiasedness";
  std::string detail;

  auto compare = [&](const std::vector<double>& exact, const std::vector<RunningMoments>& m, const char* what) {
    std::size_t bad = 0;
    double worst = 0.0;
    for (std::size_t k = 0; k < exact.size(); ++k) {
      const double se = m[k].standard_error();
      ++r.checks;
      if (!within(m[k].mean(), exact[k], se, 4.0)) ++bad;
      if (se > 0) worst = std::max(worst, std::abs(m[k].mean() - exact[k]) / se);
    }
    r.failures += bad;
    append(detail, std::string(what) + fmt(": %.0f of %.0f parameters outside 4 SE; largest |z| %.3f",
                                           double(bad), double(exact.size()), worst));
  };

  {
    RngStream init(seed, 50);
    const auto stack = sbn::make_vae(sbn::Architecture::Linear2, 4, 3, init);
    sbn::Vector x(4);
    x << 1, 0, 1, 1;
    const auto exact = sbn::finite_difference_gradient<sbn::LayerStack>(
        stack, [&](const sbn::LayerStack& m) { return sbn::exact_elbo(m, x); });
    std::vector<RunningMoments> moments(exact.size());
    RngStream rng(seed, 51);
    for (std::size_t i = 0; i < n; ++i) {
      auto g = sbn::arm_backprop_elbo(stack, x, rng);
      const auto flat = sbn::flatten_parameters(g.grad);
      for (std::size_t k = 0; k < flat.size(); ++k) moments[k].add(flat[k]);
    }
    compare(exact, moments, "ELBO");
  }
  {
    RngStream init(seed, 52);
    const std::size_t sizes[] = {4, 3, 3, 4};
    const auto stack = sbn::make_conditional(sizes, init);
    sbn::Vector x_cond(4), x_target(4);
    x_cond << 1, 0, 1, 0;
    x_target << 0, 1, 1, 0;
    const auto exact = sbn::finite_difference_gradient<sbn::ConditionalStack>(
        stack, [&](const sbn::ConditionalStack& m) { return sbn::exact_conditional_objective(m, x_target, x_cond); });
    std::vector<RunningMoments> moments(exact.size());
    RngStream rng(seed, 53);
    for (std::size_t i = 0; i < n; ++i) {
      auto g = sbn::arm_backprop_mle(stack, x_target, x_cond, rng);
      const auto flat = sbn::flatten_parameters(g.grad);
      for (std::size_t k = 0; k < flat.size(); ++k) moments[k].add(flat[k]);
    }
    compare(exact, moments, "MLE");
  }
  r.passed = r.failures == 0;
  r.detail = detail;
  return r;
}

}  // namespace armgrad::harness
