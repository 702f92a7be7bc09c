#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"

#include "armgrad/analytic.hpp"
#include "armgrad/oracle.hpp"
#include "armgrad/statistics.hpp"
#include "armgrad/toy.hpp"
#include "test_support.hpp"

using namespace armgrad;
using armgrad::testing::random_logits;
using armgrad::testing::random_table;

TEST_CASE("exact_expectation examples") {
  const FunctionOracle identity(1, [](std::span<const std::uint8_t> z) { return double(z[0]); });
  CHECK(exact_expectation(identity, LogitVector{0.0}) == 0.5);

  const auto toy = make_toy_oracle(analytic::ToyProblem(0.49));
  // 0.5 * 0.51^2 + 0.5 * 0.49^2
  CHECK(exact_expectation(toy, LogitVector{0.0}) == doctest::Approx(0.2501).epsilon(1e-14));

  const FunctionOracle constant(3, [](std::span<const std::uint8_t>) { return 2.5; });
  CHECK(exact_expectation(constant, LogitVector{1.0, -2.0, 0.3}) == doctest::Approx(2.5).epsilon(1e-15));
}

TEST_CASE("exact_gradient examples") {
  const auto toy = make_toy_oracle(analytic::ToyProblem(0.49));
  CHECK(exact_gradient(toy, LogitVector{0.0}).values[0] == doctest::Approx(0.005).epsilon(1e-12));

  const FunctionOracle constant(3, [](std::span<const std::uint8_t>) { return -4.0; });
  for (double g : exact_gradient(constant, LogitVector{1.0, -2.0, 0.3}).values) CHECK(std::abs(g) < 1e-15);

  const FunctionOracle product(2, [](std::span<const std::uint8_t> z) { return double(z[0] * z[1]); });
  const auto g = exact_gradient(product, LogitVector{0.0, 0.0}).values;
  CHECK(g[0] == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(g[1] == doctest::Approx(0.125).epsilon(1e-15));
}

TEST_CASE("enumeration budget and shape errors") {
  const FunctionOracle wide(21, [](std::span<const std::uint8_t>) { return 0.0; });
  CHECK_THROWS_AS(exact_expectation(wide, LogitVector(std::vector<double>(21, 0.0))), BudgetError);
  CHECK_THROWS_AS(exact_gradient(wide, LogitVector(std::vector<double>(21, 0.0))), BudgetError);
  const FunctionOracle two(2, [](std::span<const std::uint8_t>) { return 0.0; });
  CHECK_THROWS_AS(exact_expectation(two, LogitVector{0.0}), DimensionError);
  CHECK_THROWS_AS(FunctionOracle::from_table({1.0, 2.0, 3.0}), InvalidArgument);
  CHECK_THROWS_AS(FunctionOracle::from_table({1.0, NAN}), InvalidArgument);
}

TEST_CASE("table oracle indexing puts z_v at bit v") {
  const auto f = FunctionOracle::from_table({0.0, 1.0, 2.0, 3.0});
  const BinarySample z10{1, 0}, z01{0, 1};
  CHECK(f(z10) == 1.0);
  CHECK(f(z01) == 2.0);
}

TEST_CASE("exact_gradient agrees with central differences") {
  RngStream rng(314, 0);
  const double h = 1e-5;
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t dim = 1 + trial % 6;
    const auto f = FunctionOracle::from_table(random_table(dim, rng, -2.0, 2.0));
    const LogitVector phi = random_logits(dim, rng);
    const auto grad = exact_gradient(f, phi).values;
    for (std::size_t v = 0; v < dim; ++v) {
      LogitVector up = phi, down = phi;
      up.set(v, phi[v] + h);
      down.set(v, phi[v] - h);
      const double fd = (exact_expectation(f, up) - exact_expectation(f, down)) / (2 * h);
      CHECK(std::abs(fd - grad[v]) <= 1e-7);
    }
  }
}

TEST_CASE("exact_expectation is invariant to joint coordinate permutation") {
  RngStream rng(99, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t dim = 2 + trial % 5;
    const auto table = random_table(dim, rng);
    const auto f = FunctionOracle::from_table(table);
    const LogitVector phi = random_logits(dim, rng);
    std::vector<std::size_t> perm(dim);
    std::iota(perm.begin(), perm.end(), 0);
    std::rotate(perm.begin(), perm.begin() + 1, perm.end());
    std::swap(perm.front(), perm.back());
    // g(y) = f(z) with z_{perm[v]} = y_v; logits permuted the same way.
    const FunctionOracle g(dim, [&](std::span<const std::uint8_t> y) {
      BinarySample z(dim);
      for (std::size_t v = 0; v < dim; ++v) z[perm[v]] = y[v];
      return f(z);
    });
    std::vector<double> permuted(dim);
    for (std::size_t v = 0; v < dim; ++v) permuted[v] = phi[perm[v]];
    CHECK(exact_expectation(g, LogitVector(permuted)) ==
          doctest::Approx(exact_expectation(f, phi)).epsilon(1e-13));
  }
}

TEST_CASE("exact psi gradient") {
  // f(z; psi) = psi_0 z_0 + psi_1 z_1, so E[grad_psi f] = (sigmoid(phi_0), sigmoid(phi_1)).
  const FunctionOracle base(2, [](std::span<const std::uint8_t> z) { return double(z[0] + z[1]); });
  const auto f = base.with_psi(2, [](std::span<const std::uint8_t> z) {
    return std::vector<double>{double(z[0]), double(z[1])};
  });
  const LogitVector phi{0.4, -1.1};
  const auto g = exact_psi_gradient(f, phi);
  CHECK(g[0] == doctest::Approx(sigmoid(0.4)).epsilon(1e-14));
  CHECK(g[1] == doctest::Approx(sigmoid(-1.1)).epsilon(1e-14));
  CHECK_THROWS_AS(exact_psi_gradient(base, phi), InvalidArgument);
}

TEST_CASE("estimator_moments") {
  const auto toy = make_toy_oracle(analytic::ToyProblem(0.49));

  SUBCASE("ARM mean matches the oracle within 4 SE") {
    RngStream rng(1, 0);
    for (double phi_value : {-1.5, 0.0, 0.7}) {
      const LogitVector phi{phi_value};
      const auto report = estimator_moments(Estimator::ARM, toy, phi, 200000, rng);
      const double exact = exact_gradient(toy, phi).values[0];
      CHECK(std::abs(report.mean[0] - exact) <= 4.0 * report.standard_error[0]);
    }
  }
  SUBCASE("ARM far from zero is almost always the zero branch") {
    RngStream rng(2, 0);
    const auto report = estimator_moments(Estimator::ARM, toy, LogitVector{10.0}, 1000, rng);
    CHECK(report.variance[0] < 1e-8);
    CHECK(std::abs(report.mean[0]) < 1e-4);
  }
  SUBCASE("protocol sample count and errors") {
    RngStream rng(3, 0);
    const auto report = estimator_moments(Estimator::AR, toy, LogitVector{0.3}, 5000, rng);
    CHECK(report.n_samples == 5000);
    CHECK(report.estimator == Estimator::AR);
    CHECK_THROWS_AS(estimator_moments(Estimator::AR, toy, LogitVector{0.3}, 1, rng), InvalidArgument);
    CHECK_THROWS_AS(parse_estimator("rebar"), InvalidArgument);
  }
}

TEST_CASE("RunningMoments matches two-pass formulas") {
  RunningMoments m;
  const std::vector<double> xs{1.0, 4.0, -2.0, 0.5, 7.0, 3.0};
  for (double x : xs) m.add(x);
  const double n = xs.size();
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double m2 = 0, m4 = 0;
  for (double x : xs) {
    m2 += (x - mean) * (x - mean);
    m4 += std::pow(x - mean, 4);
  }
  CHECK(m.mean() == doctest::Approx(mean));
  CHECK(m.variance() == doctest::Approx(m2 / (n - 1)));
  CHECK(m.variance_standard_error() ==
        doctest::Approx(std::sqrt((m4 / n - (m2 / n) * (m2 / n)) / n)));
}
