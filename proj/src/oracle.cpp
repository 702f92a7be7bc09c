#include "armgrad/oracle.hpp"

#include <cmath>
#include <string>

namespace armgrad {

namespace {

void check_budget(const FunctionOracle& f, const LogitVector& phi) {
  if (f.arity() != phi.size()) {
    throw DimensionError("oracle arity " + std::to_string(f.arity()) +
                         " does not match logit length " + std::to_string(phi.size()));
  }
  if (phi.size() > kMaxEnumerationArity) {
    throw BudgetError("enumeration over 2^" + std::to_string(phi.size()) +
                      " outcomes exceeds the 2^20 budget");
  }
}

void decode(std::uint64_t index, BinarySample& z) {
  for (std::size_t v = 0; v < z.size(); ++v) z[v] = (index >> v) & 1u;
}

// Neumaier-compensated accumulator; summation order is the fixed outcome
// order, so results are reproducible.
struct CompensatedSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double x) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      carry += (sum - t) + x;
    } else {
      carry += (x - t) + sum;
    }
    sum = t;
  }
  double value() const { return sum + carry; }
};

}  // namespace

FunctionOracle::FunctionOracle(std::size_t arity, Eval eval)
    : arity_(arity), eval_(std::move(eval)) {
  if (arity_ == 0) throw InvalidArgument("FunctionOracle arity must be >= 1");
  if (!eval_) throw InvalidArgument("FunctionOracle requires a callable");
}

FunctionOracle FunctionOracle::from_table(std::vector<double> table) {
  std::size_t arity = 0;
  while ((std::size_t{1} << arity) < table.size()) ++arity;
  if (arity == 0 || (std::size_t{1} << arity) != table.size()) {
    throw InvalidArgument("function table size must be 2^V with V >= 1, got " +
                          std::to_string(table.size()));
  }
  for (double value : table) {
    if (!std::isfinite(value)) throw InvalidArgument("function table has a non-finite entry");
  }
  return FunctionOracle(arity, [table = std::move(table)](std::span<const std::uint8_t> z) {
    std::size_t index = 0;
    for (std::size_t v = 0; v < z.size(); ++v) index |= std::size_t{z[v]} << v;
    return table[index];
  });
}

FunctionOracle FunctionOracle::with_psi(std::size_t psi_size, PsiGradient gradient) const {
  FunctionOracle copy = *this;
  copy.psi_size_ = psi_size;
  copy.psi_gradient_ = std::move(gradient);
  return copy;
}

double FunctionOracle::operator()(std::span<const std::uint8_t> z) const {
  if (z.size() != arity_) {
    throw DimensionError("FunctionOracle called with length " + std::to_string(z.size()) +
                         ", expected " + std::to_string(arity_));
  }
  return eval_(z);
}

std::vector<double> FunctionOracle::psi_gradient(std::span<const std::uint8_t> z) const {
  if (!psi_gradient_) throw InvalidArgument("FunctionOracle has no side parameters");
  auto g = psi_gradient_(z);
  if (g.size() != psi_size_) throw DimensionError("psi gradient has wrong length");
  return g;
}

double exact_expectation(const FunctionOracle& f, const LogitVector& phi) {
  check_budget(f, phi);
  const std::size_t n = phi.size();
  std::vector<double> p1(n), p0(n);
  for (std::size_t v = 0; v < n; ++v) {
    p1[v] = sigmoid(phi[v]);
    p0[v] = sigmoid(-phi[v]);
  }
  BinarySample z(n);
  CompensatedSum total;
  for (std::uint64_t index = 0; index < (std::uint64_t{1} << n); ++index) {
    decode(index, z);
    double weight = 1.0;
    for (std::size_t v = 0; v < n; ++v) weight *= z[v] ? p1[v] : p0[v];
    total.add(weight * f(z));
  }
  return total.value();
}

ExactGradient exact_gradient(const FunctionOracle& f, const LogitVector& phi) {
  check_budget(f, phi);
  const std::size_t n = phi.size();
  std::vector<double> p1(n), p0(n);
  for (std::size_t v = 0; v < n; ++v) {
    p1[v] = sigmoid(phi[v]);
    p0[v] = sigmoid(-phi[v]);
  }
  // diff[v] accumulates E[f | z_v=1] - E[f | z_v=0] using leave-one-out
  // weights built from prefix/suffix products (no division by q_v).
  std::vector<CompensatedSum> diff(n);
  std::vector<double> prefix(n + 1), suffix(n + 1);
  BinarySample z(n);
  for (std::uint64_t index = 0; index < (std::uint64_t{1} << n); ++index) {
    decode(index, z);
    prefix[0] = 1.0;
    for (std::size_t v = 0; v < n; ++v) prefix[v + 1] = prefix[v] * (z[v] ? p1[v] : p0[v]);
    suffix[n] = 1.0;
    for (std::size_t v = n; v-- > 0;) suffix[v] = suffix[v + 1] * (z[v] ? p1[v] : p0[v]);
    const double value = f(z);
    for (std::size_t v = 0; v < n; ++v) {
      const double others = prefix[v] * suffix[v + 1];
      diff[v].add(z[v] ? value * others : -value * others);
    }
  }
  ExactGradient grad{std::vector<double>(n)};
  for (std::size_t v = 0; v < n; ++v) grad.values[v] = p1[v] * p0[v] * diff[v].value();
  return grad;
}

std::vector<double> exact_psi_gradient(const FunctionOracle& f, const LogitVector& phi) {
  check_budget(f, phi);
  if (!f.has_psi()) throw InvalidArgument("FunctionOracle has no side parameters");
  const std::size_t n = phi.size();
  std::vector<CompensatedSum> acc(f.psi_size());
  BinarySample z(n);
  for (std::uint64_t index = 0; index < (std::uint64_t{1} << n); ++index) {
    decode(index, z);
    double weight = 1.0;
    for (std::size_t v = 0; v < n; ++v) weight *= z[v] ? sigmoid(phi[v]) : sigmoid(-phi[v]);
    const auto g = f.psi_gradient(z);
    for (std::size_t k = 0; k < g.size(); ++k) acc[k].add(weight * g[k]);
  }
  std::vector<double> out(acc.size());
  for (std::size_t k = 0; k < acc.size(); ++k) out[k] = acc[k].value();
  return out;
}

}  // namespace armgrad
