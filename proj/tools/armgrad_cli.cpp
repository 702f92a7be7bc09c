// armgrad: run the toy, variance-report, train-vae, train-mle and
// property-suite experiments. Exit codes: 0 ok, 2 config, 3 data, 4 NaN.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "armgrad/harness/config.hpp"
#include "armgrad/harness/experiments.hpp"
#include "armgrad/harness/report.hpp"

using namespace armgrad;
using namespace armgrad::harness;

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kData = 3, kNumeric = 4 };

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> estimators;
  std::optional<std::string> p0;
  std::optional<std::size_t> iters;
  std::optional<double> lr;
  std::optional<std::size_t> batch;
  std::optional<std::string> arch;
  std::optional<std::string> dataset;
  std::optional<double> phi0;
  std::optional<std::size_t> k;
  std::optional<std::size_t> eval_k;
  bool quiet = false;
};

void add_flags(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config, "JSON config file (flags override it)");
  app->add_option("--seed", f.seed, "Random seed");
  app->add_option("--out", f.out, "Output CSV path");
  app->add_option("--estimators", f.estimators, "Comma separated: true,reinforce,ar,arm");
  app->add_option("--p0", f.p0, "Toy target, or a comma separated list");
  app->add_option("--iters", f.iters, "Iterations / optimizer steps / base sample count");
  app->add_option("--lr", f.lr, "Step size or Adam learning rate");
  app->add_option("--batch", f.batch, "Minibatch size");
  app->add_option("--arch", f.arch, "nonlinear, linear or linear2");
  app->add_option("--dataset", f.dataset, "synthetic or file:PATH");
  app->add_option("--phi0", f.phi0, "Initial logit for the toy problem");
  app->add_option("--K", f.k, "Estimates per grid point (variance-report)");
  app->add_option("--eval-k", f.eval_k, "Importance samples for test NLL (train-mle)");
  app->add_flag("--quiet", f.quiet, "Do not print the summary");
}

ExperimentConfig resolve(ExperimentKind kind, const Flags& f) {
  ExperimentConfig c = f.config.empty() ? default_config(kind) : load_config(kind, f.config);
  if (f.seed) c.seed = *f.seed;
  if (f.out) c.output = *f.out;
  if (f.estimators) apply_json(c, {{"estimators", *f.estimators}});
  if (f.p0) apply_json(c, {{"p0", *f.p0}});
  if (f.iters) c.iterations = *f.iters;
  if (f.lr) c.learning_rate = *f.lr;
  if (f.batch) c.batch_size = *f.batch;
  if (f.arch) apply_json(c, {{"architecture", *f.arch}});
  if (f.dataset) c.dataset = parse_dataset_flag(*f.dataset, c.dataset);
  if (f.phi0) c.phi0 = *f.phi0;
  if (f.k) c.k = *f.k;
  if (f.eval_k) c.eval_k = *f.eval_k;
  c.validate();
  return c;
}

int run(ExperimentKind kind, const Flags& f) {
  try {
    const ExperimentConfig config = resolve(kind, f);
    const RunArtifacts artifacts = run_experiment(config);
    const OutputPaths paths = write_artifacts(config, artifacts);
    if (!f.quiet) {
      std::cout << "wrote " << paths.csv << " (" << artifacts.table.rows() << " rows)\n";
      std::cout << artifacts.summary.dump(2) << "\n";
    }
    if (kind == ExperimentKind::PropertySuite && !artifacts.summary.value("all_passed", false)) return 1;
    return kOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ARM gradient estimator experiments"};
  app.require_subcommand(1);
  Flags flags;
  struct Sub {
    const char* name;
    const char* help;
    ExperimentKind kind;
  };
  const Sub subs[] = {
      {"toy", "Gradient ascent on E[(z - p0)^2]", ExperimentKind::Toy},
      {"variance-report", "Estimator mean, stddev and SNR over a logit grid", ExperimentKind::VarianceReport},
      {"train-vae", "Train a binary latent VAE on the ELBO", ExperimentKind::TrainVae},
      {"train-mle", "Train a stochastic binary network to predict lower halves", ExperimentKind::TrainMle},
      {"property-suite", "Run the estimator property checks", ExperimentKind::PropertySuite},
  };
  std::optional<ExperimentKind> chosen;
  for (const auto& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    add_flags(sub, flags);
    sub->callback([&chosen, kind = s.kind] { chosen = kind; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfig;
  }
  return run(*chosen, flags);
}
