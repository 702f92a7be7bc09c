#include "armgrad/harness/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "armgrad/analytic.hpp"
#include "armgrad/estimators.hpp"
#include "armgrad/oracle.hpp"
#include "armgrad/statistics.hpp"
#include "armgrad/toy.hpp"

namespace armgrad::harness {

namespace {

class Stopwatch {
 public:
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// Fixed stream ids per estimator kind, so a run's numbers do not depend on
// which other estimators were requested alongside it.
std::uint64_t estimator_slot(const std::string& name) {
  if (name == "true") return 0;
  if (name == "reinforce") return 1;
  if (name == "ar") return 2;
  if (name == "arm") return 3;
  return 4;
}

double analytic_variance(const std::string& name, const analytic::ToyProblem& toy, double phi) {
  if (name == "reinforce") return analytic::reinforce_variance_univariate(toy.f1(), toy.f0(), phi);
  if (name == "ar") return analytic::ar_variance_univariate(toy.f1(), toy.f0(), phi);
  if (name == "arm") return analytic::arm_variance_univariate(toy.f1(), toy.f0(), phi);
  return 0.0;
}

void check_finite(double x, const std::string& what) {
  if (!std::isfinite(x)) throw NumericError(what + " became non-finite");
}

std::string short_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

void check_parameters(const std::vector<sbn::ParameterRef>& params) {
  for (const auto& p : params) {
    for (double v : p.data) {
      if (!std::isfinite(v)) throw NumericError("parameter " + p.name + " became non-finite");
    }
  }
}

// Configs are validated before training starts, so a domain error raised
// inside the model means its numbers blew up.
template <typename Body>
void numeric_guard(Body&& body) {
  try {
    body();
  } catch (const InvalidArgument& e) {
    throw NumericError(std::string("non-finite value during training: ") + e.what());
  }
}

Cell opt(bool present, double value) { return present ? Cell{value} : Cell{}; }

}  // namespace

double ToyTrace::final_sigma() const { return sigmoid(phi.back()); }

ToyResult run_toy(const ExperimentConfig& config) {
  config.validate();
  Stopwatch clock;
  ToyResult result;
  result.table = CsvTable({"p0", "estimator", "iteration", "phi", "sigma_phi", "grad", "grad_variance",
                           "analytic_variance"});
  for (std::size_t pi = 0; pi < config.p0.size(); ++pi) {
    const analytic::ToyProblem toy(config.p0[pi]);
    const auto f = make_toy_oracle(toy);
    for (const auto& name : config.estimators) {
      const bool exact = name == "true";
      const Estimator est = exact ? Estimator::ARM : parse_estimator(name);
      RngStream rng = RngStream(config.seed, 10 + estimator_slot(name)).substream(pi);
      RngStream var_rng = RngStream(config.seed, 20 + estimator_slot(name)).substream(pi);
      ToyTrace trace{config.p0[pi], name, {config.phi0}};
      double phi = config.phi0;
      for (std::size_t it = 0; it <= config.iterations; ++it) {
        const LogitVector logit{phi};
        const double grad = exact ? analytic::true_grad_univariate(toy.f1(), toy.f0(), phi)
                                  : single_sample(est, f, logit, rng).values[0];
        const bool log_var = it % config.variance_every == 0;
        double variance = 0.0;
        if (log_var && !exact) {
          variance = estimator_moments(est, f, logit, config.variance_samples, var_rng).variance[0];
        }
        result.table.add_row({config.p0[pi], name, static_cast<long long>(it), phi, sigmoid(phi), grad,
                              opt(log_var, variance), opt(log_var, analytic_variance(name, toy, phi))});
        result.wall_time_ms.push_back(clock.ms());
        if (it == config.iterations) break;
        phi += config.learning_rate * grad;
        check_finite(phi, "phi");
        trace.phi.push_back(phi);
      }
      result.summary["final_sigma"][name][short_number(config.p0[pi])] = trace.final_sigma();
      result.traces.push_back(std::move(trace));
    }
  }
  result.summary["p0"] = config.p0;
  return result;
}

std::vector<double> phi_grid(const ExperimentConfig& config) {
  const auto count = static_cast<std::size_t>(std::floor((config.grid_max - config.grid_min) / config.grid_step + 1e-9)) + 1;
  std::vector<double> grid(count);
  for (std::size_t i = 0; i < count; ++i) grid[i] = config.grid_min + double(i) * config.grid_step;
  return grid;
}

VarianceReportResult run_variance_report(const ExperimentConfig& config) {
  config.validate();
  Stopwatch clock;
  VarianceReportResult result;
  result.table = CsvTable({"p0", "phi", "estimator", "n", "mean", "stddev", "snr", "snr_se", "true_grad",
                           "analytic_stddev", "analytic_snr"});
  const auto grid = phi_grid(config);
  for (std::size_t pi = 0; pi < config.p0.size(); ++pi) {
    const analytic::ToyProblem toy(config.p0[pi]);
    const auto f = make_toy_oracle(toy);
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
      const double phi = grid[gi];
      for (const auto& name : config.estimators) {
        const Estimator est = parse_estimator(name);
        RngStream rng = RngStream(config.seed, 30 + estimator_slot(name)).substream(pi * 1000000 + gi);
        RunningMoments m;
        for (std::size_t i = 0; i < config.k; ++i) m.add(single_sample(est, f, LogitVector{phi}, rng).values[0]);
        VariancePoint p;
        p.p0 = config.p0[pi];
        p.phi = phi;
        p.estimator = name;
        p.n = config.k;
        p.mean = m.mean();
        p.stddev = m.stddev();
        p.snr = m.snr();
        p.snr_se = m.snr_standard_error();
        p.true_grad = analytic::true_grad_univariate(toy.f1(), toy.f0(), phi);
        p.analytic_stddev = std::sqrt(analytic_variance(name, toy, phi));
        p.analytic_snr = name == "arm" ? analytic::arm_snr_univariate(phi) : std::abs(p.true_grad) / p.analytic_stddev;
        result.table.add_row({p.p0, p.phi, p.estimator, static_cast<long long>(p.n), p.mean, p.stddev, p.snr,
                              p.snr_se, p.true_grad, p.analytic_stddev, p.analytic_snr});
        result.wall_time_ms.push_back(clock.ms());
        result.points.push_back(std::move(p));
      }
    }
  }
  result.summary["grid_points"] = grid.size();
  return result;
}

double trailing_mean(const std::vector<double>& values, std::size_t step, std::size_t window) {
  if (step == 0 || step > values.size()) throw InvalidArgument("trailing_mean: step out of range");
  const std::size_t begin = step > window ? step - window : 0;
  return std::accumulate(values.begin() + static_cast<std::ptrdiff_t>(begin),
                         values.begin() + static_cast<std::ptrdiff_t>(step), 0.0) /
         double(step - begin);
}

namespace {

// Minibatch schedule shared by both training loops: reshuffle the training
// indices at the start of every epoch, batches taken in order, the last one
// possibly short.
class BatchSchedule {
 public:
  BatchSchedule(std::size_t n, std::size_t batch, RngStream rng) : order_(n), batch_(std::min(batch, n)), rng_(rng) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
  }

  std::vector<std::size_t> next() {
    if (pos_ == 0) {
      std::shuffle(order_.begin(), order_.end(), rng_);
      ++epoch_;
    }
    const std::size_t end = std::min(pos_ + batch_, order_.size());
    std::vector<std::size_t> out(order_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                 order_.begin() + static_cast<std::ptrdiff_t>(end));
    pos_ = end == order_.size() ? 0 : end;
    return out;
  }

  std::size_t epoch() const { return epoch_; }
  bool epoch_done() const { return pos_ == 0; }

 private:
  std::vector<std::size_t> order_;
  std::size_t batch_;
  RngStream rng_;
  std::size_t pos_ = 0;
  std::size_t epoch_ = 0;
};

void accumulate(const std::vector<sbn::ParameterRef>& into, const std::vector<sbn::ParameterRef>& from, double scale) {
  for (std::size_t p = 0; p < into.size(); ++p) {
    for (std::size_t k = 0; k < into[p].data.size(); ++k) into[p].data[k] += scale * from[p].data[k];
  }
}

void zero(const std::vector<sbn::ParameterRef>& params) {
  for (const auto& p : params) std::fill(p.data.begin(), p.data.end(), 0.0);
}

bool eval_due(const ExperimentConfig& config, std::size_t step, bool epoch_done) {
  if (step == config.iterations) return true;
  return config.eval_every == 0 ? epoch_done : step % config.eval_every == 0;
}

double mean_neg_elbo(const sbn::LayerStack& model, const std::vector<Image>& images, std::size_t samples,
                     RngStream& rng) {
  if (images.empty()) return std::nan("");
  double total = 0.0;
  for (const auto& x : images) {
    for (std::size_t s = 0; s < samples; ++s) {
      const auto pass = sbn::forward_sample(model, x, rng);
      total -= sbn::elbo(model, x, pass.samples).elbo;
    }
  }
  return total / double(images.size() * samples);
}

std::pair<sbn::Vector, sbn::Vector> halves(const Image& x) {
  const Eigen::Index h = x.size() / 2;
  return {x.head(h), x.tail(x.size() - h)};
}

}  // namespace

TrainVaeResult run_train_vae(const ExperimentConfig& config) {
  config.validate();
  return run_train_vae(config, load_dataset(config.dataset, config.seed));
}

TrainVaeResult run_train_vae(const ExperimentConfig& config, const Dataset& data) {
  config.validate();
  if (data.train.empty()) throw DataError("training split is empty");
  Stopwatch clock;
  TrainVaeResult result;
  result.table = CsvTable({"step", "epoch", "train_neg_elbo", "train_neg_elbo_smoothed", "valid_neg_elbo",
                           "test_neg_elbo"});
  RngStream init(config.seed, 100);
  result.model = sbn::make_vae(config.architecture, data.width, config.latent_size, init);
  auto params = sbn::parameters(result.model);
  sbn::LayerStack grad_sum = sbn::zeros_like(result.model);
  const auto grad_params = sbn::parameters(grad_sum);
  auto adam = sbn::make_adam(params, config.learning_rate, /*ascent=*/true);
  BatchSchedule schedule(data.train.size(), config.batch_size, RngStream(config.seed, 101));
  RngStream rng(config.seed, 102);
  std::uint64_t eval_index = 0;
  double since_eval = 0.0;
  std::size_t steps_since_eval = 0;
  result.best_valid_neg_elbo = INFINITY;

  auto evaluate = [&](std::size_t step) {
    RngStream eval_rng = RngStream(config.seed, 103).substream(eval_index++);
    const double valid = mean_neg_elbo(result.model, data.valid, config.eval_samples, eval_rng);
    const double test = mean_neg_elbo(result.model, data.test, config.eval_samples, eval_rng);
    const bool trained = step > 0;
    result.table.add_row({static_cast<long long>(step), static_cast<long long>(schedule.epoch()),
                          opt(trained, since_eval / double(std::max<std::size_t>(steps_since_eval, 1))),
                          opt(trained, trained ? trailing_mean(result.step_neg_elbo, step, config.smoothing_window) : 0.0),
                          valid, test});
    result.wall_time_ms.push_back(clock.ms());
    if (valid < result.best_valid_neg_elbo) {
      result.best_valid_neg_elbo = valid;
      result.best_step = step;
      result.test_neg_elbo_at_best = test;
    }
    since_eval = 0.0;
    steps_since_eval = 0;
  };

  numeric_guard([&] {
    evaluate(0);
    for (std::size_t step = 1; step <= config.iterations; ++step) {
      const auto batch = schedule.next();
      zero(grad_params);
      double loss = 0.0;
      const double scale = 1.0 / double(batch.size());
      for (std::size_t idx : batch) {
        auto g = sbn::arm_backprop_elbo(result.model, data.train[idx], rng);
        accumulate(grad_params, sbn::parameters(g.grad), scale);
        loss -= scale * g.parts.elbo;
      }
      check_finite(loss, "training -ELBO");
      sbn::adam_step(params, grad_params, adam);
      check_parameters(params);
      result.step_neg_elbo.push_back(loss);
      since_eval += loss;
      ++steps_since_eval;
      if (eval_due(config, step, schedule.epoch_done())) evaluate(step);
    }
  });

  const std::size_t early = std::min<std::size_t>(100, config.iterations);
  const double start = trailing_mean(result.step_neg_elbo, early, config.smoothing_window);
  const double end = trailing_mean(result.step_neg_elbo, config.iterations, config.smoothing_window);
  result.summary = {{"steps", config.iterations},
                    {"epochs", schedule.epoch()},
                    {"train_size", data.train.size()},
                    {"smoothed_neg_elbo_at_step", early},
                    {"smoothed_neg_elbo_start", start},
                    {"smoothed_neg_elbo_end", end},
                    {"relative_reduction", (start - end) / start},
                    {"best_step", result.best_step},
                    {"best_valid_neg_elbo", result.best_valid_neg_elbo},
                    {"test_neg_elbo_at_best", result.test_neg_elbo_at_best}};
  result.checkpoint = sbn::Checkpoint{result.model, adam, rng.seed(), rng.stream_id(), rng.cursor()};
  return result;
}

double mean_test_nll(const sbn::ConditionalStack& model, const std::vector<Image>& images, std::size_t k,
                     RngStream& rng) {
  if (images.empty()) return std::nan("");
  double total = 0.0;
  for (const auto& x : images) {
    const auto [upper, lower] = halves(x);
    total -= sbn::iwae_style_loglik(model, lower, upper, k, rng);
  }
  return total / double(images.size());
}

TrainMleResult run_train_mle(const ExperimentConfig& config) {
  config.validate();
  return run_train_mle(config, load_dataset(config.dataset, config.seed));
}

TrainMleResult run_train_mle(const ExperimentConfig& config, const Dataset& data) {
  config.validate();
  if (data.train.empty()) throw DataError("training split is empty");
  if (data.width % 2 != 0) throw ConfigError("train-mle needs an even number of pixels per image");
  const std::size_t half = data.width / 2;
  if (config.mle_sizes.front() != half || config.mle_sizes.back() != half) {
    throw ConfigError("train-mle network must start and end with " + std::to_string(half) +
                      " units for images of " + std::to_string(data.width) + " pixels");
  }
  Stopwatch clock;
  TrainMleResult result;
  result.table = CsvTable({"step", "epoch", "train_neg_loglik", "valid_nll", "test_nll"});
  RngStream init(config.seed, 200);
  result.model = sbn::make_conditional(config.mle_sizes, init);
  auto params = sbn::parameters(result.model);
  sbn::ConditionalStack grad_sum = sbn::zeros_like(result.model);
  const auto grad_params = sbn::parameters(grad_sum);
  auto adam = sbn::make_adam(params, config.learning_rate, /*ascent=*/true);
  BatchSchedule schedule(data.train.size(), config.batch_size, RngStream(config.seed, 201));
  RngStream rng(config.seed, 202);
  std::uint64_t eval_index = 0;
  double since_eval = 0.0;
  std::size_t steps_since_eval = 0;

  auto evaluate = [&](std::size_t step) {
    RngStream eval_rng = RngStream(config.seed, 203).substream(eval_index++);
    const double valid = mean_test_nll(result.model, data.valid, config.eval_k, eval_rng);
    const double test = mean_test_nll(result.model, data.test, config.eval_k, eval_rng);
    const bool trained = step > 0;
    result.table.add_row({static_cast<long long>(step), static_cast<long long>(schedule.epoch()),
                          opt(trained, since_eval / double(std::max<std::size_t>(steps_since_eval, 1))), valid,
                          test});
    result.wall_time_ms.push_back(clock.ms());
    if (step == 0) result.test_nll_init = test;
    result.test_nll_final = test;
    since_eval = 0.0;
    steps_since_eval = 0;
  };

  numeric_guard([&] {
    evaluate(0);
    for (std::size_t step = 1; step <= config.iterations; ++step) {
      const auto batch = schedule.next();
      zero(grad_params);
      double loss = 0.0;
      const double scale = 1.0 / double(batch.size());
      for (std::size_t idx : batch) {
        const auto [upper, lower] = halves(data.train[idx]);
        auto g = sbn::arm_backprop_mle(result.model, lower, upper, rng);
        accumulate(grad_params, sbn::parameters(g.grad), scale);
        loss -= scale * g.log_lik;
      }
      check_finite(loss, "training -log-likelihood");
      sbn::adam_step(params, grad_params, adam);
      check_parameters(params);
      result.step_neg_loglik.push_back(loss);
      since_eval += loss;
      ++steps_since_eval;
      if (eval_due(config, step, schedule.epoch_done())) evaluate(step);
    }
  });

  result.summary = {{"steps", config.iterations},
                    {"epochs", schedule.epoch()},
                    {"train_size", data.train.size()},
                    {"eval_k", config.eval_k},
                    {"test_nll_init", result.test_nll_init},
                    {"test_nll_final", result.test_nll_final},
                    {"relative_reduction", (result.test_nll_init - result.test_nll_final) / result.test_nll_init}};
  result.checkpoint = sbn::Checkpoint{result.model, adam, rng.seed(), rng.stream_id(), rng.cursor()};
  return result;
}

PropertySuiteResult run_property_suite(const ExperimentConfig& config) {
  config.validate();
  Stopwatch clock;
  PropertySuiteResult result;
  result.table = CsvTable({"property", "checks", "failures", "passed", "detail"});
  const std::size_t n = config.iterations;
  result.properties.push_back(check_unbiasedness(config.seed, 50, std::max<std::size_t>(n, 2)));
  result.properties.push_back(check_analytic_variance(config.seed, std::max<std::size_t>(5 * n, 2)));
  result.properties.push_back(check_variance_bound_constants(config.seed, 20));
  result.properties.push_back(check_antithetic_merge(config.seed, 10000, 10, std::max<std::size_t>(n / 10, 2)));
  result.properties.push_back(check_optimal_baseline(config.seed, 10000, std::max<std::size_t>(n / 2, 2)));
  result.properties.push_back(check_multilayer_unbiasedness(config.seed, std::max<std::size_t>(n, 2)));
  bool all = true;
  for (const auto& p : result.properties) {
    std::string detail = p.detail;
    std::replace(detail.begin(), detail.end(), ',', ';');
    result.table.add_row({p.name, static_cast<long long>(p.checks), static_cast<long long>(p.failures),
                          static_cast<long long>(p.passed), detail});
    result.wall_time_ms.push_back(clock.ms());
    result.summary["passed"][p.name] = p.passed;
    all = all && p.passed;
  }
  result.summary["all_passed"] = all;
  return result;
}

RunArtifacts run_experiment(const ExperimentConfig& config) {
  switch (config.experiment) {
    case ExperimentKind::Toy: return run_toy(config);
    case ExperimentKind::VarianceReport: return run_variance_report(config);
    case ExperimentKind::TrainVae: return run_train_vae(config);
    case ExperimentKind::TrainMle: return run_train_mle(config);
    case ExperimentKind::PropertySuite: return run_property_suite(config);
  }
  throw ConfigError("unknown experiment");
}

}  // namespace armgrad::harness
