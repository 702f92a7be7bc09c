#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "armgrad/core.hpp"

namespace armgrad::sbn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kDefaultLeakySlope = 0.3;

struct AffineLayer {
  Matrix weights;  // out x in
  Vector bias;     // out
};

/// Deterministic transform from a layer's input to the next stochastic
/// layer's logits: affine layers with LeakyReLU between them and nothing
/// after the last one.
struct Mlp {
  std::vector<AffineLayer> layers;
  double leaky_slope = kDefaultLeakySlope;

  struct Trace {
    std::vector<Vector> inputs;       // input to each affine layer
    std::vector<Vector> activations;  // pre-activation output of each layer
  };

  std::size_t input_size() const;
  std::size_t output_size() const;

  Vector forward(const Vector& x) const;
  Vector forward(const Vector& x, Trace& trace) const;

  /// Reverse-mode pass: adds d(objective)/d(params) to grad given
  /// d(objective)/d(output). Writes d/d(input) when grad_input is non-null.
  void backward(const Trace& trace, const Vector& grad_output, Mlp& grad,
                Vector* grad_input = nullptr) const;
};

/// Glorot-uniform weights, zero biases. sizes = {in, hidden..., out}.
Mlp make_mlp(std::span<const std::size_t> sizes, RngStream& rng,
             double leaky_slope = kDefaultLeakySlope);
Mlp zeros_like(const Mlp& m);

/// Nonlinear: one stochastic layer behind two LeakyReLU hidden layers each
/// way. Linear: one stochastic layer, affine maps. Linear2: two stochastic
/// layers, affine maps.
enum class Architecture { Nonlinear, Linear, Linear2 };
std::string to_string(Architecture a);
Architecture parse_architecture(std::string_view name);

/// Variational auto-encoder over T stochastic binary layers.
///   encoder[t]: b_t -> logits of b_{t+1}  (b_0 = x)
///   decoder[0]: b_1 -> logits of x
///   decoder[t]: b_{t+1} -> logits of b_t  (t >= 1)
///   prior_logits: factorized Bernoulli prior on b_T
struct LayerStack {
  std::vector<Mlp> encoder;
  std::vector<Mlp> decoder;
  Vector prior_logits;

  std::size_t stochastic_layers() const { return encoder.size(); }
  void validate() const;
};

LayerStack make_vae(Architecture arch, std::size_t input_size, std::size_t latent_size,
                    RngStream& rng, double leaky_slope = kDefaultLeakySlope);
LayerStack zeros_like(const LayerStack& s);

/// Conditional stochastic binary network for p(x_target | x_cond).
///   latent[0]: x_cond -> logits of the first stochastic layer
///   latent[k]: layer k -> logits of layer k+1
///   output: last stochastic layer -> logits of x_target
/// In generative notation the top layer b_T is latent[0]'s output and the
/// observation layer theta_0 is `output`.
struct ConditionalStack {
  std::vector<Mlp> latent;
  Mlp output;

  std::size_t stochastic_layers() const { return latent.size(); }
  void validate() const;
};

/// sizes = {cond, h_1, ..., h_T, target}; all transforms linear.
ConditionalStack make_conditional(std::span<const std::size_t> sizes, RngStream& rng);
ConditionalStack zeros_like(const ConditionalStack& s);

/// Ancestral sample through a chain of stochastic layers, with everything
/// the backward pass needs.
struct ForwardPass {
  std::vector<Vector> samples;   // b_1 .. b_T
  std::vector<Vector> uniforms;  // u_1 .. u_T
  std::vector<Vector> logits;    // pre-sigmoid logits of each layer
  std::vector<Mlp::Trace> traces;
};

ForwardPass forward_sample(const std::vector<Mlp>& chain, const Vector& input, RngStream& rng);
ForwardPass forward_sample(const LayerStack& stack, const Vector& x, RngStream& rng);

/// sum_i log Bernoulli(x_i; sigmoid(logits_i)), in logit form.
double bernoulli_log_mass(const Vector& x, const Vector& logits);

struct ElboParts {
  double log_lik = 0.0;    // log p(x | b_1)
  double log_prior = 0.0;  // log p(b_{1:T})
  double log_q = 0.0;      // log q(b_{1:T} | x)
  double elbo = 0.0;       // log_lik + log_prior - log_q
};

ElboParts elbo(const LayerStack& stack, const Vector& x, const std::vector<Vector>& samples);

/// Counters from one ARM backward pass over a chain.
struct ArmChainStats {
  std::vector<std::uint8_t> agreed;  // per layer: 1 if b^(1) == b^(2)
  std::size_t f_evaluations = 0;     // objective calls made by the ARM branches
};

using ChainObjective = std::function<double(const std::vector<Vector>& samples)>;

/// ARM backpropagation through a chain of stochastic layers. `main` is an
/// ancestral sample that provides every layer's prefix. For each layer t a
/// fresh u_t is drawn; if the antithetic pair agrees the layer contributes
/// nothing, otherwise both suffixes are resampled independently and the
/// logit gradient (f(branch 1) - f(branch 2)) (u_t - 1/2) is pushed through
/// chain[t] into grads[t].
ArmChainStats arm_chain_backprop(const std::vector<Mlp>& chain, const ForwardPass& main,
                                 const ChainObjective& objective, RngStream& rng,
                                 std::vector<Mlp>& grads);

struct ElboGradient {
  LayerStack grad;  // d ELBO / d params: ARM for the encoder, pathwise for the rest
  ElboParts parts;  // at the main sample
  ArmChainStats stats;
};

ElboGradient arm_backprop_elbo(const LayerStack& stack, const Vector& x, RngStream& rng);

struct MleGradient {
  ConditionalStack grad;  // ARM for latent layers, pathwise for the output layer
  double log_lik = 0.0;   // log p(x_target | b) at the main sample
  ArmChainStats stats;
};

MleGradient arm_backprop_mle(const ConditionalStack& stack, const Vector& x_target,
                             const Vector& x_cond, RngStream& rng);

/// log (1/K) sum_k p(x_target | b^(k)), b^(k) drawn ancestrally from x_cond.
double iwae_style_loglik(const ConditionalStack& stack, const Vector& x_target,
                         const Vector& x_cond, std::size_t k, RngStream& rng);

// Flat views of every parameter tensor, in a fixed order. Names are stable
// and used by checkpoints.
struct ParameterRef {
  std::string name;
  std::span<double> data;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
};

std::vector<ParameterRef> parameters(LayerStack& s);
std::vector<ParameterRef> parameters(ConditionalStack& s);

struct OptimizerState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step = 0;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool ascent = true;
};

OptimizerState make_adam(const std::vector<ParameterRef>& params, double learning_rate,
                         bool ascent);

/// Bias-corrected Adam update. grads must match params tensor by tensor.
void adam_step(const std::vector<ParameterRef>& params, const std::vector<ParameterRef>& grads,
               OptimizerState& state);

}  // namespace armgrad::sbn
