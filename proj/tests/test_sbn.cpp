#include <cmath>
#include <cstring>

#include "doctest.h"

#include "armgrad/checkpoint.hpp"
#include "armgrad/sbn.hpp"
#include "armgrad/statistics.hpp"
#include "armgrad/sbn_exact.hpp"

using namespace armgrad;
using namespace armgrad::sbn;

namespace {

Vector bits(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

LayerStack tiny_vae(std::uint64_t seed) {
  RngStream rng(seed, 0);
  return make_vae(Architecture::Linear2, 4, 3, rng);
}

ConditionalStack tiny_conditional(std::uint64_t seed) {
  RngStream rng(seed, 0);
  const std::size_t sizes[] = {4, 3, 3, 4};
  return make_conditional(sizes, rng);
}

void saturate(Mlp& m, double value) {
  for (auto& layer : m.layers) {
    layer.weights.setZero();
    layer.bias.setConstant(value);
  }
}

}  // namespace

TEST_CASE("mlp backward matches finite differences") {
  RngStream rng(1, 0);
  const std::size_t sizes[] = {3, 5, 4, 2};
  Mlp m = make_mlp(sizes, rng);
  const Vector x = bits({1.0, -0.5, 2.0});
  const Vector w = bits({0.7, -1.3});
  Mlp::Trace trace;
  m.forward(x, trace);
  Mlp grad = zeros_like(m);
  Vector grad_x;
  m.backward(trace, w, grad, &grad_x);
  const double h = 1e-6;
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    for (Eigen::Index k = 0; k < m.layers[l].weights.size(); ++k) {
      Mlp p = m;
      p.layers[l].weights.data()[k] += h;
      Mlp q = m;
      q.layers[l].weights.data()[k] -= h;
      const double fd = (w.dot(p.forward(x)) - w.dot(q.forward(x))) / (2 * h);
      CHECK(grad.layers[l].weights.data()[k] == doctest::Approx(fd).epsilon(1e-6));
    }
  }
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector xp = x, xq = x;
    xp[i] += h;
    xq[i] -= h;
    CHECK(grad_x[i] == doctest::Approx((w.dot(m.forward(xp)) - w.dot(m.forward(xq))) / (2 * h)).epsilon(1e-6));
  }
}

TEST_CASE("initialization follows the Glorot range with zero biases") {
  RngStream rng(2, 0);
  const auto stack = make_vae(Architecture::Nonlinear, 36, 16, rng);
  CHECK(stack.encoder[0].layers.size() == 3);
  CHECK(stack.decoder[0].layers.size() == 3);
  for (const auto& layer : stack.encoder[0].layers) {
    const double a = std::sqrt(6.0 / double(layer.weights.rows() + layer.weights.cols()));
    CHECK(layer.weights.cwiseAbs().maxCoeff() <= a);
    CHECK(layer.bias.isZero());
  }
  CHECK(stack.prior_logits.isZero());
  CHECK(parse_architecture("Linear2") == Architecture::Linear2);
  CHECK_THROWS_AS(parse_architecture("conv"), InvalidArgument);
}

TEST_CASE("forward_sample") {
  SUBCASE("saturated logits give all ones") {
    LayerStack s = tiny_vae(3);
    for (auto& m : s.encoder) saturate(m, 50.0);
    RngStream rng(4, 0);
    const auto pass = forward_sample(s, bits({1, 0, 1, 0}), rng);
    for (const auto& b : pass.samples) CHECK(b.isOnes());
  }
  SUBCASE("marginals match the sigmoid of the logits") {
    RngStream init(5, 0);
    const std::size_t sizes[] = {4, 3};
    const std::vector<Mlp> chain{make_mlp(sizes, init)};
    const Vector x = bits({1, 1, 0, 1});
    const Vector logits = chain[0].forward(x);
    RngStream rng(6, 0);
    const int n = 100000;
    Vector counts = Vector::Zero(3);
    for (int i = 0; i < n; ++i) counts += forward_sample(chain, x, rng).samples[0];
    for (Eigen::Index i = 0; i < 3; ++i) {
      const double p = sigmoid(logits[i]);
      CHECK(std::abs(counts[i] / n - p) <= 4.0 * std::sqrt(p * (1 - p) / n));
    }
  }
  SUBCASE("replay") {
    const LayerStack s = tiny_vae(7);
    RngStream a(8, 1), b(8, 1);
    const auto pa = forward_sample(s, bits({0, 1, 1, 0}), a);
    const auto pb = forward_sample(s, bits({0, 1, 1, 0}), b);
    for (std::size_t t = 0; t < pa.samples.size(); ++t) {
      CHECK(pa.samples[t] == pb.samples[t]);
      CHECK(pa.uniforms[t] == pb.uniforms[t]);
    }
  }
  SUBCASE("shape mismatch") {
    const LayerStack s = tiny_vae(9);
    RngStream rng(1, 1);
    CHECK_THROWS_AS(forward_sample(s, bits({1, 0}), rng), DimensionError);
  }
}

TEST_CASE("elbo") {
  SUBCASE("all-uniform network") {
    const LayerStack s = zeros_like(tiny_vae(10));
    const Vector x = bits({1, 0, 0, 1});
    const std::vector<Vector> b{bits({1, 0, 1}), bits({0, 0, 1})};
    const auto parts = elbo(s, x, b);
    CHECK(parts.log_lik == doctest::Approx(4 * std::log(0.5)));
    CHECK(parts.log_prior - parts.log_q == doctest::Approx(0.0));
    CHECK(parts.elbo == doctest::Approx(4 * std::log(0.5)));
  }
  SUBCASE("decomposition and log_q by direct summation") {
    const LayerStack s = tiny_vae(11);
    const Vector x = bits({1, 1, 0, 1});
    const std::vector<Vector> b{bits({0, 1, 1}), bits({1, 0, 0})};
    const auto parts = elbo(s, x, b);
    CHECK(parts.elbo == parts.log_lik + parts.log_prior - parts.log_q);
    double direct = 0.0;
    const Vector l1 = s.encoder[0].forward(x);
    const Vector l2 = s.encoder[1].forward(b[0]);
    for (int i = 0; i < 3; ++i) {
      direct += std::log(b[0][i] ? sigmoid(l1[i]) : 1 - sigmoid(l1[i]));
      direct += std::log(b[1][i] ? sigmoid(l2[i]) : 1 - sigmoid(l2[i]));
    }
    CHECK(std::abs(parts.log_q - direct) <= 1e-10);
  }
  SUBCASE("expected elbo lower-bounds the log marginal likelihood") {
    for (std::uint64_t seed = 20; seed < 25; ++seed) {
      const LayerStack s = tiny_vae(seed);
      const Vector x = bits({1, 0, 1, 1});
      CHECK(exact_elbo(s, x) <= exact_log_marginal(s, x));
    }
  }
  SUBCASE("log masses stay finite for extreme logits") {
    CHECK(std::isfinite(bernoulli_log_mass(bits({1, 0}), bits({-800, 800}))));
  }
}

TEST_CASE("enumeration budget") {
  CHECK_THROWS_AS(enumerate_chain({10, 11}, [](const std::vector<Vector>&) {}), BudgetError);
  std::size_t visits = 0;
  enumerate_chain({2, 3}, [&](const std::vector<Vector>& b) {
    CHECK(b.size() == 2);
    ++visits;
  });
  CHECK(visits == 32);
}

TEST_CASE("arm_backprop_elbo is unbiased against enumeration") {
  const LayerStack s = tiny_vae(30);
  const Vector x = bits({1, 0, 1, 1});
  const auto exact = finite_difference_gradient<LayerStack>(
      s, [&](const LayerStack& m) { return exact_elbo(m, x); });
  RngStream rng(31, 0);
  const int n = 40000;
  std::vector<RunningMoments> moments(exact.size());
  for (int i = 0; i < n; ++i) {
    auto g = arm_backprop_elbo(s, x, rng);
    const auto flat = flatten_parameters(g.grad);
    for (std::size_t k = 0; k < flat.size(); ++k) moments[k].add(flat[k]);
  }
  for (std::size_t k = 0; k < exact.size(); ++k) {
    const double tol = std::max(4.0 * moments[k].standard_error(), 1e-9);
    CHECK(std::abs(moments[k].mean() - exact[k]) <= tol);
  }
}

TEST_CASE("arm_backprop_elbo zero branch") {
  LayerStack s = tiny_vae(32);
  for (auto& m : s.encoder) saturate(m, 50.0);
  RngStream rng(33, 0);
  for (int i = 0; i < 200; ++i) {
    auto g = arm_backprop_elbo(s, bits({1, 0, 0, 1}), rng);
    CHECK(g.stats.f_evaluations == 0);
    for (auto a : g.stats.agreed) CHECK(a == 1);
    for (auto& m : g.grad.encoder) {
      for (auto& layer : m.layers) {
        CHECK(layer.weights.isZero());
        CHECK(layer.bias.isZero());
      }
    }
  }
}

TEST_CASE("single stochastic layer reduces to arm_at with the chain rule") {
  RngStream init(34, 0);
  const LayerStack s = make_vae(Architecture::Linear, 4, 3, init);
  const Vector x = bits({0, 1, 1, 1});
  for (std::uint64_t trial = 0; trial < 50; ++trial) {
    RngStream rng(35, trial);
    RngStream replay = rng;
    const auto g = arm_backprop_elbo(s, x, rng);
    // The forward pass consumes 3 uniforms; the ARM draw is the next 3.
    replay.seek(3);
    const auto u = replay.uniform_draw(3).values;
    const Vector logits = s.encoder[0].forward(x);
    const LogitVector phi(std::vector<double>(logits.data(), logits.data() + 3));
    const FunctionOracle f(3, [&](std::span<const std::uint8_t> z) {
      return elbo(s, x, {bits({double(z[0]), double(z[1]), double(z[2])})}).elbo;
    });
    const auto logit_grad = arm_at(f, phi, u);
    for (int i = 0; i < 3; ++i) {
      CHECK(g.grad.encoder[0].layers[0].bias[i] == doctest::Approx(logit_grad[i]).epsilon(1e-12));
      for (int j = 0; j < 4; ++j) {
        CHECK(g.grad.encoder[0].layers[0].weights(i, j) == doctest::Approx(logit_grad[i] * x[j]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("zero-branch frequency follows the agreement probability") {
  const LayerStack s = tiny_vae(36);
  const Vector x = bits({1, 1, 0, 0});
  const Vector l1 = s.encoder[0].forward(x);
  double p = 1.0;
  for (Eigen::Index i = 0; i < l1.size(); ++i) p *= sigmoid(std::abs(l1[i])) - sigmoid(-std::abs(l1[i]));
  RngStream rng(37, 0);
  const int n = 50000;
  int agreed = 0;
  for (int i = 0; i < n; ++i) {
    auto g = arm_backprop_elbo(s, x, rng);
    agreed += g.stats.agreed[0];
  }
  CHECK(std::abs(double(agreed) / n - p) <= 4.0 * std::sqrt(p * (1 - p) / n));
}

TEST_CASE("arm_backprop_mle is unbiased against enumeration") {
  const ConditionalStack s = tiny_conditional(40);
  const Vector x_cond = bits({1, 0, 1, 0});
  const Vector x_target = bits({0, 1, 1, 0});
  const auto exact = finite_difference_gradient<ConditionalStack>(
      s, [&](const ConditionalStack& m) { return exact_conditional_objective(m, x_target, x_cond); });
  RngStream rng(41, 0);
  const int n = 40000;
  std::vector<RunningMoments> moments(exact.size());
  for (int i = 0; i < n; ++i) {
    auto g = arm_backprop_mle(s, x_target, x_cond, rng);
    const auto flat = flatten_parameters(g.grad);
    for (std::size_t k = 0; k < flat.size(); ++k) moments[k].add(flat[k]);
  }
  for (std::size_t k = 0; k < exact.size(); ++k) {
    const double tol = std::max(4.0 * moments[k].standard_error(), 1e-9);
    CHECK(std::abs(moments[k].mean() - exact[k]) <= tol);
  }
}

TEST_CASE("deterministic latent collapses mle to logistic regression") {
  ConditionalStack s = tiny_conditional(42);
  for (auto& m : s.latent) saturate(m, 50.0);
  const Vector x_cond = bits({1, 0, 1, 0});
  const Vector x_target = bits({0, 1, 1, 0});
  RngStream rng(43, 0);
  const auto g = arm_backprop_mle(s, x_target, x_cond, rng);
  const Vector h = Vector::Ones(3);
  const auto& out = s.output.layers[0];
  Vector residual = x_target;
  for (Eigen::Index i = 0; i < residual.size(); ++i) {
    residual[i] -= sigmoid((out.weights * h + out.bias)[i]);
  }
  CHECK((g.grad.output.layers[0].weights - residual * h.transpose()).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((g.grad.output.layers[0].bias - residual).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(g.stats.f_evaluations == 0);
}

TEST_CASE("iwae_style_loglik") {
  const ConditionalStack s = tiny_conditional(44);
  const Vector x_cond = bits({0, 1, 1, 0});
  const Vector x_target = bits({1, 1, 0, 0});
  SUBCASE("K = 1 is a single-sample log-likelihood") {
    RngStream a(45, 0), b(45, 0);
    const double single = iwae_style_loglik(s, x_target, x_cond, 1, a);
    const auto pass = forward_sample(s.latent, x_cond, b);
    CHECK(single == doctest::Approx(bernoulli_log_mass(x_target, s.output.forward(pass.samples.back()))).epsilon(1e-14));
  }
  SUBCASE("more samples tighten the bound") {
    RngStream rng(46, 0);
    RunningMoments k1, k100;
    for (int i = 0; i < 10000; ++i) {
      k1.add(iwae_style_loglik(s, x_target, x_cond, 1, rng));
      k100.add(iwae_style_loglik(s, x_target, x_cond, 100, rng));
    }
    CHECK(k100.mean() >= k1.mean() - 3.0 * std::hypot(k1.standard_error(), k100.standard_error()));
    CHECK(k1.mean() == doctest::Approx(exact_conditional_objective(s, x_target, x_cond)).epsilon(0.02));
    CHECK(k100.mean() <= exact_conditional_log_marginal(s, x_target, x_cond) + 3.0 * k100.standard_error());
  }
  RngStream rng(47, 0);
  CHECK_THROWS_AS(iwae_style_loglik(s, x_target, x_cond, 0, rng), InvalidArgument);
}

TEST_CASE("adam") {
  LayerStack s = tiny_vae(50);
  LayerStack g = zeros_like(s);
  auto params = parameters(s);
  auto grads = parameters(g);
  SUBCASE("zero gradient leaves parameters unchanged") {
    auto state = make_adam(params, 1e-3, true);
    const auto before = flatten_parameters(s);
    for (int i = 0; i < 5; ++i) adam_step(params, grads, state);
    CHECK(flatten_parameters(s) == before);
  }
  SUBCASE("first step from zero state") {
    auto state = make_adam(params, 0.01, true);
    grads[0].data[0] = 0.5;
    const double before = params[0].data[0];
    adam_step(params, grads, state);
    // m_hat = 0.5, v_hat = 0.25: 0.01 * 0.5 / (0.5 + 1e-8)
    CHECK(params[0].data[0] - before == doctest::Approx(0.0099999998).epsilon(1e-9));
  }
  SUBCASE("constant gradient gives steps of size lr") {
    auto state = make_adam(params, 0.01, false);
    grads[1].data[0] = -3.0;
    double last = params[1].data[0];
    double step = 0.0;
    for (int i = 0; i < 2000; ++i) {
      adam_step(params, grads, state);
      step = params[1].data[0] - last;
      last = params[1].data[0];
    }
    CHECK(step == doctest::Approx(0.01).epsilon(1e-6));
  }
  SUBCASE("shape mismatch") {
    auto state = make_adam(params, 0.01, true);
    auto short_grads = grads;
    short_grads.pop_back();
    CHECK_THROWS_AS(adam_step(params, short_grads, state), DimensionError);
    CHECK_THROWS_AS(make_adam(params, -1.0, true), InvalidArgument);
  }
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  LayerStack s = tiny_vae(60);
  auto params = parameters(s);
  LayerStack g = zeros_like(s);
  auto grads = parameters(g);
  auto state = make_adam(params, 3e-4, true);
  RngStream rng(61, 5);
  for (int i = 0; i < 3; ++i) {
    g = arm_backprop_elbo(s, bits({1, 0, 1, 0}), rng).grad;
    grads = parameters(g);
    adam_step(params, grads, state);
  }
  Checkpoint ckpt{s, state, rng.seed(), rng.stream_id(), rng.cursor()};
  const auto text = checkpoint_to_string(ckpt);
  Checkpoint back = checkpoint_from_string(text);
  auto& restored = std::get<LayerStack>(back.model);
  const auto a = flatten_parameters(s), b = flatten_parameters(restored);
  REQUIRE(a.size() == b.size());
  CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
  CHECK(back.optimizer.first_moment == state.first_moment);
  CHECK(back.optimizer.second_moment == state.second_moment);
  CHECK(back.optimizer.step == 3);
  CHECK(back.rng_cursor == rng.cursor());
  CHECK(checkpoint_to_string(back) == text);

  ConditionalStack c = tiny_conditional(62);
  Checkpoint cc{c, make_adam(parameters(c), 1e-4, true), 1, 2, 3};
  auto cback = checkpoint_from_string(checkpoint_to_string(cc));
  CHECK(flatten_parameters(std::get<ConditionalStack>(cback.model)) == flatten_parameters(c));

  CHECK_THROWS_AS(checkpoint_from_string("{not json"), DataError);
  CHECK_THROWS_AS(checkpoint_from_string(R"({"format":"armgrad-checkpoint","version":99})"), DataError);
}
