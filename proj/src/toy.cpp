#include "armgrad/toy.hpp"

namespace armgrad {

FunctionOracle make_toy_oracle(const analytic::ToyProblem& toy) {
  return FunctionOracle(1, [toy](std::span<const std::uint8_t> z) { return toy(z[0]); });
}

}  // namespace armgrad
