#pragma once

// Exact references for small stochastic binary networks: every latent
// configuration is enumerated, and gradients come from central differences
// of the exact objective. Exponential in the total number of latent units.

#include <cstddef>
#include <functional>
#include <vector>

#include "armgrad/sbn.hpp"

namespace armgrad::sbn {

/// Largest total latent width accepted by the enumeration helpers.
inline constexpr std::size_t kMaxEnumeratedUnits = 20;

/// Calls visit(samples) once for every binary configuration of a chain with
/// the given layer widths. Throws BudgetError past kMaxEnumeratedUnits.
void enumerate_chain(const std::vector<std::size_t>& widths,
                     const std::function<void(const std::vector<Vector>&)>& visit);

std::vector<std::size_t> chain_widths(const std::vector<Mlp>& chain);

/// log prob of a full chain sample given its input.
double chain_log_prob(const std::vector<Mlp>& chain, const Vector& input,
                      const std::vector<Vector>& samples);

/// E_q[ELBO integrand], exactly.
double exact_elbo(const LayerStack& stack, const Vector& x);

/// log sum_b p(x, b), exactly.
double exact_log_marginal(const LayerStack& stack, const Vector& x);

/// E_{p(b | x_cond)}[log p(x_target | b)], exactly.
double exact_conditional_objective(const ConditionalStack& stack, const Vector& x_target,
                                   const Vector& x_cond);

/// log sum_b p(b | x_cond) p(x_target | b), exactly.
double exact_conditional_log_marginal(const ConditionalStack& stack, const Vector& x_target,
                                      const Vector& x_cond);

template <typename Model>
std::vector<double> flatten_parameters(Model& model) {
  std::vector<double> out;
  for (const auto& p : parameters(model)) out.insert(out.end(), p.data.begin(), p.data.end());
  return out;
}

/// Central-difference gradient of objective(model) over every parameter,
/// flattened in parameters() order.
template <typename Model>
std::vector<double> finite_difference_gradient(Model model,
                                               const std::function<double(const Model&)>& objective,
                                               double h = 1e-5) {
  std::vector<double> grad;
  for (auto& p : parameters(model)) {
    for (auto& value : p.data) {
      const double saved = value;
      value = saved + h;
      const double up = objective(model);
      value = saved - h;
      const double down = objective(model);
      value = saved;
      grad.push_back((up - down) / (2 * h));
    }
  }
  return grad;
}

}  // namespace armgrad::sbn
