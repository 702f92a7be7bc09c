#include "armgrad/sbn.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

namespace armgrad::sbn {

namespace {

Vector sigmoid_of(const Vector& logits) {
  Vector out(logits.size());
  for (Eigen::Index i = 0; i < logits.size(); ++i) out[i] = sigmoid(logits[i]);
  return out;
}

Vector sample_layer(const Vector& logits, RngStream& rng, Vector* uniforms) {
  Vector b(logits.size());
  Vector u(logits.size());
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    u[i] = rng.next_uniform();
    b[i] = u[i] < sigmoid(logits[i]) ? 1.0 : 0.0;
  }
  if (uniforms) *uniforms = std::move(u);
  return b;
}

void check_chain(const std::vector<Mlp>& chain, std::size_t input, const char* what) {
  if (chain.empty()) throw InvalidArgument(std::string(what) + ": needs at least one stochastic layer");
  std::size_t expected = input;
  for (std::size_t t = 0; t < chain.size(); ++t) {
    if (chain[t].input_size() != expected) {
      throw DimensionError(std::string(what) + ": layer " + std::to_string(t) + " expects input " +
                           std::to_string(chain[t].input_size()) + ", got " +
                           std::to_string(expected));
    }
    expected = chain[t].output_size();
  }
}

void add_parameters(Mlp& m, const std::string& prefix, std::vector<ParameterRef>& out) {
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    auto& layer = m.layers[l];
    const std::string base = prefix + ".layer" + std::to_string(l);
    out.push_back({base + ".weights",
                   std::span<double>(layer.weights.data(), static_cast<std::size_t>(layer.weights.size())),
                   layer.weights.rows(), layer.weights.cols()});
    out.push_back({base + ".bias",
                   std::span<double>(layer.bias.data(), static_cast<std::size_t>(layer.bias.size())),
                   layer.bias.size(), 1});
  }
}

// Objective gradient with respect to the logits of a Bernoulli observation.
Vector bernoulli_logit_grad(const Vector& target, const Vector& logits) {
  return target - sigmoid_of(logits);
}

}  // namespace

std::size_t Mlp::input_size() const {
  return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().weights.cols());
}

std::size_t Mlp::output_size() const {
  return layers.empty() ? 0 : static_cast<std::size_t>(layers.back().weights.rows());
}

Vector Mlp::forward(const Vector& x) const {
  Trace scratch;
  return forward(x, scratch);
}

Vector Mlp::forward(const Vector& x, Trace& trace) const {
  if (static_cast<std::size_t>(x.size()) != input_size()) {
    throw DimensionError("Mlp input has size " + std::to_string(x.size()) + ", expected " +
                         std::to_string(input_size()));
  }
  trace.inputs.clear();
  trace.activations.clear();
  Vector h = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    trace.inputs.push_back(h);
    Vector a = layers[l].weights * h + layers[l].bias;
    trace.activations.push_back(a);
    if (l + 1 < layers.size()) {
      h = a.unaryExpr([slope = leaky_slope](double v) { return v > 0.0 ? v : slope * v; });
    } else {
      h = std::move(a);
    }
  }
  return h;
}

void Mlp::backward(const Trace& trace, const Vector& grad_output, Mlp& grad,
                   Vector* grad_input) const {
  Vector delta = grad_output;
  for (std::size_t l = layers.size(); l-- > 0;) {
    if (l + 1 < layers.size()) {
      const Vector& a = trace.activations[l];
      for (Eigen::Index i = 0; i < delta.size(); ++i) {
        if (a[i] <= 0.0) delta[i] *= leaky_slope;
      }
    }
    grad.layers[l].weights.noalias() += delta * trace.inputs[l].transpose();
    grad.layers[l].bias += delta;
    if (l > 0 || grad_input) {
      Vector next = layers[l].weights.transpose() * delta;
      delta = std::move(next);
    }
  }
  if (grad_input) *grad_input = std::move(delta);
}

Mlp make_mlp(std::span<const std::size_t> sizes, RngStream& rng, double leaky_slope) {
  if (sizes.size() < 2) throw InvalidArgument("make_mlp needs at least input and output sizes");
  Mlp m;
  m.leaky_slope = leaky_slope;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const auto in = static_cast<Eigen::Index>(sizes[l]);
    const auto out = static_cast<Eigen::Index>(sizes[l + 1]);
    if (in == 0 || out == 0) throw InvalidArgument("layer sizes must be positive");
    const double a = std::sqrt(6.0 / static_cast<double>(in + out));
    AffineLayer layer{Matrix(out, in), Vector::Zero(out)};
    // Column-major fill order keeps initialization reproducible.
    for (Eigen::Index j = 0; j < in; ++j) {
      for (Eigen::Index i = 0; i < out; ++i) layer.weights(i, j) = a * (2.0 * rng.next_uniform() - 1.0);
    }
    m.layers.push_back(std::move(layer));
  }
  return m;
}

Mlp zeros_like(const Mlp& m) {
  Mlp z;
  z.leaky_slope = m.leaky_slope;
  for (const auto& layer : m.layers) {
    z.layers.push_back({Matrix::Zero(layer.weights.rows(), layer.weights.cols()),
                        Vector::Zero(layer.bias.size())});
  }
  return z;
}

std::string to_string(Architecture a) {
  switch (a) {
    case Architecture::Nonlinear: return "nonlinear";
    case Architecture::Linear: return "linear";
    case Architecture::Linear2: return "linear2";
  }
  return "unknown";
}

Architecture parse_architecture(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "nonlinear") return Architecture::Nonlinear;
  if (lower == "linear") return Architecture::Linear;
  if (lower == "linear2") return Architecture::Linear2;
  throw InvalidArgument("unknown architecture '" + std::string(name) + "'");
}

void LayerStack::validate() const {
  if (encoder.empty()) throw InvalidArgument("LayerStack needs T >= 1 stochastic layers");
  if (decoder.size() != encoder.size()) {
    throw DimensionError("LayerStack needs one decoder transform per stochastic layer");
  }
  check_chain(encoder, encoder.front().input_size(), "encoder");
  const std::size_t t_max = encoder.size();
  if (decoder[0].input_size() != encoder[0].output_size() ||
      decoder[0].output_size() != encoder[0].input_size()) {
    throw DimensionError("decoder[0] must map b_1 back to the data dimension");
  }
  for (std::size_t t = 1; t < t_max; ++t) {
    if (decoder[t].input_size() != encoder[t].output_size() ||
        decoder[t].output_size() != encoder[t - 1].output_size()) {
      throw DimensionError("decoder[" + std::to_string(t) + "] must map b_" +
                           std::to_string(t + 1) + " to the logits of b_" + std::to_string(t));
    }
  }
  if (static_cast<std::size_t>(prior_logits.size()) != encoder.back().output_size()) {
    throw DimensionError("prior logits must match the top stochastic layer");
  }
}

LayerStack make_vae(Architecture arch, std::size_t input_size, std::size_t latent_size,
                    RngStream& rng, double leaky_slope) {
  LayerStack s;
  const std::size_t in = input_size;
  const std::size_t h = latent_size;
  switch (arch) {
    case Architecture::Nonlinear: {
      const std::size_t enc[] = {in, h, h, h};
      const std::size_t dec[] = {h, h, h, in};
      s.encoder.push_back(make_mlp(enc, rng, leaky_slope));
      s.decoder.push_back(make_mlp(dec, rng, leaky_slope));
      break;
    }
    case Architecture::Linear: {
      const std::size_t enc[] = {in, h};
      const std::size_t dec[] = {h, in};
      s.encoder.push_back(make_mlp(enc, rng, leaky_slope));
      s.decoder.push_back(make_mlp(dec, rng, leaky_slope));
      break;
    }
    case Architecture::Linear2: {
      const std::size_t enc1[] = {in, h};
      const std::size_t enc2[] = {h, h};
      const std::size_t dec1[] = {h, in};
      const std::size_t dec2[] = {h, h};
      s.encoder.push_back(make_mlp(enc1, rng, leaky_slope));
      s.encoder.push_back(make_mlp(enc2, rng, leaky_slope));
      s.decoder.push_back(make_mlp(dec1, rng, leaky_slope));
      s.decoder.push_back(make_mlp(dec2, rng, leaky_slope));
      break;
    }
  }
  s.prior_logits = Vector::Zero(static_cast<Eigen::Index>(h));
  s.validate();
  return s;
}

LayerStack zeros_like(const LayerStack& s) {
  LayerStack z;
  for (const auto& m : s.encoder) z.encoder.push_back(zeros_like(m));
  for (const auto& m : s.decoder) z.decoder.push_back(zeros_like(m));
  z.prior_logits = Vector::Zero(s.prior_logits.size());
  return z;
}

void ConditionalStack::validate() const {
  check_chain(latent, latent.empty() ? 0 : latent.front().input_size(), "conditional latent chain");
  if (output.input_size() != latent.back().output_size()) {
    throw DimensionError("output layer must read the last stochastic layer");
  }
}

ConditionalStack make_conditional(std::span<const std::size_t> sizes, RngStream& rng) {
  if (sizes.size() < 3) throw InvalidArgument("conditional network needs cond, >=1 hidden, target sizes");
  ConditionalStack s;
  for (std::size_t k = 0; k + 2 < sizes.size(); ++k) {
    const std::size_t shape[] = {sizes[k], sizes[k + 1]};
    s.latent.push_back(make_mlp(shape, rng));
  }
  const std::size_t out_shape[] = {sizes[sizes.size() - 2], sizes.back()};
  s.output = make_mlp(out_shape, rng);
  s.validate();
  return s;
}

ConditionalStack zeros_like(const ConditionalStack& s) {
  ConditionalStack z;
  for (const auto& m : s.latent) z.latent.push_back(zeros_like(m));
  z.output = zeros_like(s.output);
  return z;
}

ForwardPass forward_sample(const std::vector<Mlp>& chain, const Vector& input, RngStream& rng) {
  check_chain(chain, static_cast<std::size_t>(input.size()), "forward_sample");
  ForwardPass pass;
  const Vector* prev = &input;
  for (const auto& layer : chain) {
    Mlp::Trace trace;
    Vector logits = layer.forward(*prev, trace);
    Vector u;
    pass.samples.push_back(sample_layer(logits, rng, &u));
    pass.uniforms.push_back(std::move(u));
    pass.logits.push_back(std::move(logits));
    pass.traces.push_back(std::move(trace));
    prev = &pass.samples.back();
  }
  return pass;
}

ForwardPass forward_sample(const LayerStack& stack, const Vector& x, RngStream& rng) {
  return forward_sample(stack.encoder, x, rng);
}

double bernoulli_log_mass(const Vector& x, const Vector& logits) {
  if (x.size() != logits.size()) throw DimensionError("bernoulli_log_mass: size mismatch");
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    total += x[i] * log_sigmoid(logits[i]) + (1.0 - x[i]) * log_sigmoid(-logits[i]);
  }
  return total;
}

ElboParts elbo(const LayerStack& stack, const Vector& x, const std::vector<Vector>& samples) {
  const std::size_t t_max = stack.stochastic_layers();
  if (samples.size() != t_max) throw DimensionError("elbo: wrong number of sample layers");
  ElboParts parts;
  parts.log_lik = bernoulli_log_mass(x, stack.decoder[0].forward(samples[0]));
  for (std::size_t t = 1; t < t_max; ++t) {
    parts.log_prior += bernoulli_log_mass(samples[t - 1], stack.decoder[t].forward(samples[t]));
  }
  parts.log_prior += bernoulli_log_mass(samples.back(), stack.prior_logits);
  const Vector* prev = &x;
  for (std::size_t t = 0; t < t_max; ++t) {
    parts.log_q += bernoulli_log_mass(samples[t], stack.encoder[t].forward(*prev));
    prev = &samples[t];
  }
  parts.elbo = parts.log_lik + parts.log_prior - parts.log_q;
  return parts;
}

ArmChainStats arm_chain_backprop(const std::vector<Mlp>& chain, const ForwardPass& main,
                                 const ChainObjective& objective, RngStream& rng,
                                 std::vector<Mlp>& grads) {
  const std::size_t t_max = chain.size();
  if (main.samples.size() != t_max || grads.size() != t_max) {
    throw DimensionError("arm_chain_backprop: chain, sample and gradient depths differ");
  }
  ArmChainStats stats;
  stats.agreed.assign(t_max, 0);
  for (std::size_t t = 0; t < t_max; ++t) {
    const Vector& logits = main.logits[t];
    const Eigen::Index width = logits.size();
    Vector u(width);
    for (Eigen::Index i = 0; i < width; ++i) u[i] = rng.next_uniform();
    Vector b1(width), b2(width);
    for (Eigen::Index i = 0; i < width; ++i) {
      b1[i] = u[i] > sigmoid(-logits[i]) ? 1.0 : 0.0;
      b2[i] = u[i] < sigmoid(logits[i]) ? 1.0 : 0.0;
    }
    if (b1 == b2) {
      stats.agreed[t] = 1;
      continue;
    }
    // Shared prefix b_{1:t-1}; each branch gets its own suffix draw.
    auto branch = [&](const Vector& bt) {
      std::vector<Vector> samples(main.samples.begin(), main.samples.begin() + static_cast<std::ptrdiff_t>(t));
      samples.push_back(bt);
      for (std::size_t s = t + 1; s < t_max; ++s) {
        samples.push_back(sample_layer(chain[s].forward(samples.back()), rng, nullptr));
      }
      ++stats.f_evaluations;
      return objective(samples);
    };
    const double f1 = branch(b1);
    const double f2 = branch(b2);
    const Vector grad_logits = (f1 - f2) * (u.array() - 0.5).matrix();
    chain[t].backward(main.traces[t], grad_logits, grads[t]);
  }
  return stats;
}

ElboGradient arm_backprop_elbo(const LayerStack& stack, const Vector& x, RngStream& rng) {
  ElboGradient out{zeros_like(stack), {}, {}};
  const ForwardPass main = forward_sample(stack, x, rng);
  out.parts = elbo(stack, x, main.samples);
  out.stats = arm_chain_backprop(
      stack.encoder, main,
      [&](const std::vector<Vector>& samples) { return elbo(stack, x, samples).elbo; }, rng,
      out.grad.encoder);

  // Decoder and prior: exact pathwise gradients at the main sample.
  const std::size_t t_max = stack.stochastic_layers();
  {
    Mlp::Trace trace;
    const Vector logits = stack.decoder[0].forward(main.samples[0], trace);
    stack.decoder[0].backward(trace, bernoulli_logit_grad(x, logits), out.grad.decoder[0]);
  }
  for (std::size_t t = 1; t < t_max; ++t) {
    Mlp::Trace trace;
    const Vector logits = stack.decoder[t].forward(main.samples[t], trace);
    stack.decoder[t].backward(trace, bernoulli_logit_grad(main.samples[t - 1], logits),
                              out.grad.decoder[t]);
  }
  out.grad.prior_logits = bernoulli_logit_grad(main.samples.back(), stack.prior_logits);
  return out;
}

MleGradient arm_backprop_mle(const ConditionalStack& stack, const Vector& x_target,
                             const Vector& x_cond, RngStream& rng) {
  if (static_cast<std::size_t>(x_target.size()) != stack.output.output_size()) {
    throw DimensionError("arm_backprop_mle: target size does not match output layer");
  }
  MleGradient out{zeros_like(stack), 0.0, {}};
  const ForwardPass main = forward_sample(stack.latent, x_cond, rng);
  auto log_lik = [&](const std::vector<Vector>& samples) {
    return bernoulli_log_mass(x_target, stack.output.forward(samples.back()));
  };
  out.log_lik = log_lik(main.samples);
  out.stats = arm_chain_backprop(stack.latent, main, log_lik, rng, out.grad.latent);

  Mlp::Trace trace;
  const Vector logits = stack.output.forward(main.samples.back(), trace);
  stack.output.backward(trace, bernoulli_logit_grad(x_target, logits), out.grad.output);
  return out;
}

double iwae_style_loglik(const ConditionalStack& stack, const Vector& x_target,
                         const Vector& x_cond, std::size_t k, RngStream& rng) {
  if (k < 1) throw InvalidArgument("iwae_style_loglik needs K >= 1");
  std::vector<double> terms(k);
  for (std::size_t i = 0; i < k; ++i) {
    const ForwardPass pass = forward_sample(stack.latent, x_cond, rng);
    terms[i] = bernoulli_log_mass(x_target, stack.output.forward(pass.samples.back()));
  }
  const double top = *std::max_element(terms.begin(), terms.end());
  double sum = 0.0;
  for (double v : terms) sum += std::exp(v - top);
  return top + std::log(sum / static_cast<double>(k));
}

std::vector<ParameterRef> parameters(LayerStack& s) {
  std::vector<ParameterRef> out;
  for (std::size_t t = 0; t < s.encoder.size(); ++t) add_parameters(s.encoder[t], "encoder" + std::to_string(t), out);
  for (std::size_t t = 0; t < s.decoder.size(); ++t) add_parameters(s.decoder[t], "decoder" + std::to_string(t), out);
  out.push_back({"prior_logits",
                 std::span<double>(s.prior_logits.data(), static_cast<std::size_t>(s.prior_logits.size())),
                 s.prior_logits.size(), 1});
  return out;
}

std::vector<ParameterRef> parameters(ConditionalStack& s) {
  std::vector<ParameterRef> out;
  for (std::size_t t = 0; t < s.latent.size(); ++t) add_parameters(s.latent[t], "latent" + std::to_string(t), out);
  add_parameters(s.output, "output", out);
  return out;
}

OptimizerState make_adam(const std::vector<ParameterRef>& params, double learning_rate,
                         bool ascent) {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidArgument("learning rate must be positive and finite");
  }
  OptimizerState state;
  state.learning_rate = learning_rate;
  state.ascent = ascent;
  for (const auto& p : params) {
    state.first_moment.emplace_back(p.data.size(), 0.0);
    state.second_moment.emplace_back(p.data.size(), 0.0);
  }
  return state;
}

void adam_step(const std::vector<ParameterRef>& params, const std::vector<ParameterRef>& grads,
               OptimizerState& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size() ||
      params.size() != state.second_moment.size()) {
    throw DimensionError("adam_step: parameter, gradient and state tensor counts differ");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k].data.size() != grads[k].data.size() ||
        params[k].data.size() != state.first_moment[k].size()) {
      throw DimensionError("adam_step: shape mismatch for " + params[k].name);
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  const double direction = state.ascent ? 1.0 : -1.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    for (std::size_t i = 0; i < params[k].data.size(); ++i) {
      const double g = grads[k].data[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      params[k].data[i] += direction * state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

}  // namespace armgrad::sbn
