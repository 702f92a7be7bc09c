#include "armgrad/sbn_exact.hpp"

#include <cmath>
#include <cstdint>

namespace armgrad::sbn {

void enumerate_chain(const std::vector<std::size_t>& widths,
                     const std::function<void(const std::vector<Vector>&)>& visit) {
  std::size_t total_bits = 0;
  for (auto w : widths) total_bits += w;
  if (total_bits > kMaxEnumeratedUnits) {
    throw BudgetError("enumerate_chain: " + std::to_string(total_bits) + " latent units exceed the enumeration budget");
  }
  std::vector<Vector> samples;
  for (auto w : widths) samples.emplace_back(static_cast<Eigen::Index>(w));
  for (std::uint64_t code = 0; code < (std::uint64_t{1} << total_bits); ++code) {
    std::size_t bit = 0;
    for (auto& b : samples) {
      for (Eigen::Index i = 0; i < b.size(); ++i, ++bit) b[i] = double((code >> bit) & 1u);
    }
    visit(samples);
  }
}

std::vector<std::size_t> chain_widths(const std::vector<Mlp>& chain) {
  std::vector<std::size_t> widths;
  for (const auto& m : chain) widths.push_back(m.output_size());
  return widths;
}

double chain_log_prob(const std::vector<Mlp>& chain, const Vector& input,
                      const std::vector<Vector>& samples) {
  double lp = 0.0;
  const Vector* prev = &input;
  for (std::size_t t = 0; t < chain.size(); ++t) {
    lp += bernoulli_log_mass(samples[t], chain[t].forward(*prev));
    prev = &samples[t];
  }
  return lp;
}

double exact_elbo(const LayerStack& stack, const Vector& x) {
  double total = 0.0;
  enumerate_chain(chain_widths(stack.encoder), [&](const std::vector<Vector>& b) {
    total += std::exp(chain_log_prob(stack.encoder, x, b)) * elbo(stack, x, b).elbo;
  });
  return total;
}

double exact_log_marginal(const LayerStack& stack, const Vector& x) {
  double total = 0.0;
  enumerate_chain(chain_widths(stack.encoder), [&](const std::vector<Vector>& b) {
    const auto parts = elbo(stack, x, b);
    total += std::exp(parts.log_lik + parts.log_prior);
  });
  return std::log(total);
}

double exact_conditional_objective(const ConditionalStack& stack, const Vector& x_target,
                                   const Vector& x_cond) {
  double total = 0.0;
  enumerate_chain(chain_widths(stack.latent), [&](const std::vector<Vector>& b) {
    total += std::exp(chain_log_prob(stack.latent, x_cond, b)) *
             bernoulli_log_mass(x_target, stack.output.forward(b.back()));
  });
  return total;
}

double exact_conditional_log_marginal(const ConditionalStack& stack, const Vector& x_target,
                                      const Vector& x_cond) {
  double total = 0.0;
  enumerate_chain(chain_widths(stack.latent), [&](const std::vector<Vector>& b) {
    total += std::exp(chain_log_prob(stack.latent, x_cond, b) +
                      bernoulli_log_mass(x_target, stack.output.forward(b.back())));
  });
  return std::log(total);
}

}  // namespace armgrad::sbn
