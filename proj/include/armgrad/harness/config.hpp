#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "armgrad/sbn.hpp"

namespace armgrad::harness {

enum class ExperimentKind { Toy, VarianceReport, TrainVae, TrainMle, PropertySuite };

std::string to_string(ExperimentKind kind);
/// Accepts both "variance_report" and "variance-report" spellings.
ExperimentKind parse_experiment(std::string_view name);

struct DatasetSpec {
  std::string source = "synthetic";  // "synthetic" or "file"
  std::string path;                  // for source == "file"
  std::string family = "bars_and_stripes";  // or "mixture"
  std::size_t size = 6;              // images are size x size
  // Split sizes; all zero selects the source default (bars-and-stripes:
  // every pattern, 20 valid and 20 test at n = 6; mixture: 500/100/100;
  // file: 80/10/10 in file order).
  std::size_t n_train = 0;
  std::size_t n_valid = 0;
  std::size_t n_test = 0;
  std::size_t components = 4;        // mixture only
  double noise = 0.05;               // mixture only: per-pixel flip probability
};

/// "synthetic" or "file:PATH", as given to --dataset.
DatasetSpec parse_dataset_flag(std::string_view flag, DatasetSpec base = {});

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::Toy;
  std::uint64_t seed = 1;
  std::vector<double> p0{0.49};
  double phi0 = 0.0;
  double learning_rate = 0.1;
  std::size_t iterations = 2000;
  std::vector<std::string> estimators;
  std::size_t k = 1000;                 // variance report: estimates per grid point
  std::size_t variance_every = 100;     // toy: log empirical variance every N iterations
  std::size_t variance_samples = 5000;  // toy: estimates per variance log
  double grid_min = -2.5;
  double grid_max = 2.5;
  double grid_step = 0.25;
  sbn::Architecture architecture = sbn::Architecture::Linear;
  std::size_t latent_size = 16;
  std::vector<std::size_t> mle_sizes{18, 8, 8, 18};
  std::size_t batch_size = 50;
  std::size_t eval_every = 0;       // training: steps between evaluations, 0 = once per epoch
  std::size_t eval_samples = 10;    // train-vae: ELBO samples per evaluation image
  std::size_t eval_k = 100;         // train-mle: importance samples for test NLL
  std::size_t smoothing_window = 100;
  DatasetSpec dataset;
  std::string output;

  /// Throws ConfigError describing the first violated constraint.
  void validate() const;
};

ExperimentConfig default_config(ExperimentKind kind);

/// Overlays the keys present in j onto config. Unknown keys, wrong types and
/// a conflicting "experiment" value raise ConfigError.
void apply_json(ExperimentConfig& config, const nlohmann::json& j);

nlohmann::json to_json(const ExperimentConfig& config);

/// default_config(kind) overlaid with the JSON file at path.
ExperimentConfig load_config(ExperimentKind kind, const std::string& path);

/// Splits "a,b,c" into trimmed, non-empty pieces.
std::vector<std::string> split_list(std::string_view text);

/// Parses "18-8-8-18" (or comma separated) layer sizes.
std::vector<std::size_t> parse_sizes(std::string_view text);

}  // namespace armgrad::harness
