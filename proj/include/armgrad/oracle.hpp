#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "armgrad/core.hpp"

namespace armgrad {

/// Black-box objective over {0,1}^V, optionally carrying side parameters
/// psi whose gradient is available pathwise.
class FunctionOracle {
 public:
  using Eval = std::function<double(std::span<const std::uint8_t>)>;
  using PsiGradient = std::function<std::vector<double>(std::span<const std::uint8_t>)>;

  FunctionOracle(std::size_t arity, Eval eval);

  /// Objective stored as a table of 2^V values. Entry index has bit v set
  /// iff z_v = 1.
  static FunctionOracle from_table(std::vector<double> table);

  /// Attach side parameters: psi_size entries, gradient of f with respect
  /// to them at a given z.
  FunctionOracle with_psi(std::size_t psi_size, PsiGradient gradient) const;

  std::size_t arity() const { return arity_; }
  double operator()(std::span<const std::uint8_t> z) const;

  bool has_psi() const { return static_cast<bool>(psi_gradient_); }
  std::size_t psi_size() const { return psi_size_; }
  std::vector<double> psi_gradient(std::span<const std::uint8_t> z) const;

 private:
  std::size_t arity_;
  Eval eval_;
  std::size_t psi_size_ = 0;
  PsiGradient psi_gradient_;
};

struct ExactGradient {
  std::vector<double> values;
};

/// Enumeration ceiling: 2^20 evaluations.
inline constexpr std::size_t kMaxEnumerationArity = 20;

/// Sum over all 2^V outcomes of f(z) q(z).
double exact_expectation(const FunctionOracle& f, const LogitVector& phi);

/// d/dphi_v E[f] = sigmoid(phi_v) sigmoid(-phi_v) (E[f | z_v=1] - E[f | z_v=0]),
/// conditional expectations enumerated over the remaining coordinates.
ExactGradient exact_gradient(const FunctionOracle& f, const LogitVector& phi);

/// E[grad_psi f(z)] by enumeration.
std::vector<double> exact_psi_gradient(const FunctionOracle& f, const LogitVector& phi);

}  // namespace armgrad
