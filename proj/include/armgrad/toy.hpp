#pragma once

#include "armgrad/analytic.hpp"
#include "armgrad/oracle.hpp"

namespace armgrad {

/// Univariate oracle for f(z) = (z - p0)^2.
FunctionOracle make_toy_oracle(const analytic::ToyProblem& toy);

}  // namespace armgrad
