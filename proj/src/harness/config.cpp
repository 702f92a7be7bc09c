#include "armgrad/harness/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace armgrad::harness {

using nlohmann::json;

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::set<std::string> allowed_estimators(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Toy: return {"true", "reinforce", "ar", "arm"};
    case ExperimentKind::VarianceReport: return {"reinforce", "ar", "arm"};
    case ExperimentKind::TrainVae:
    case ExperimentKind::TrainMle: return {"arm"};
    case ExperimentKind::PropertySuite: return {"reinforce", "ar", "arm"};
  }
  return {};
}

[[noreturn]] void fail(const std::string& what) { throw ConfigError(what); }

template <typename T>
T get_as(const json& j, const char* key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    fail(std::string("config key '") + key + "' has the wrong type");
  }
}

std::vector<double> number_or_list(const json& j, const char* key) {
  if (j.is_number()) return {j.get<double>()};
  if (j.is_string()) {
    std::vector<double> out;
    for (const auto& piece : split_list(j.get<std::string>())) {
      try {
        out.push_back(std::stod(piece));
      } catch (const std::exception&) {
        fail(std::string("config key '") + key + "': '" + piece + "' is not a number");
      }
    }
    return out;
  }
  return get_as<std::vector<double>>(j, key);
}

std::vector<std::string> string_or_list(const json& j, const char* key) {
  if (j.is_string()) return split_list(j.get<std::string>());
  return get_as<std::vector<std::string>>(j, key);
}

void apply_dataset(DatasetSpec& d, const json& j) {
  if (j.is_string()) {
    d = parse_dataset_flag(j.get<std::string>(), d);
    return;
  }
  if (!j.is_object()) fail("config key 'dataset' must be a string or an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "source") {
      d.source = get_as<std::string>(value, "dataset.source");
    } else if (key == "path") {
      d.path = get_as<std::string>(value, "dataset.path");
    } else if (key == "family") {
      d.family = get_as<std::string>(value, "dataset.family");
    } else if (key == "size") {
      d.size = get_as<std::size_t>(value, "dataset.size");
    } else if (key == "n_train") {
      d.n_train = get_as<std::size_t>(value, "dataset.n_train");
    } else if (key == "n_valid") {
      d.n_valid = get_as<std::size_t>(value, "dataset.n_valid");
    } else if (key == "n_test") {
      d.n_test = get_as<std::size_t>(value, "dataset.n_test");
    } else if (key == "components") {
      d.components = get_as<std::size_t>(value, "dataset.components");
    } else if (key == "noise") {
      d.noise = get_as<double>(value, "dataset.noise");
    } else {
      fail("unknown config key 'dataset." + key + "'");
    }
  }
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Toy: return "toy";
    case ExperimentKind::VarianceReport: return "variance_report";
    case ExperimentKind::TrainVae: return "train_vae";
    case ExperimentKind::TrainMle: return "train_mle";
    case ExperimentKind::PropertySuite: return "property_suite";
  }
  return "unknown";
}

ExperimentKind parse_experiment(std::string_view name) {
  std::string n = lower(name);
  std::replace(n.begin(), n.end(), '-', '_');
  for (auto k : {ExperimentKind::Toy, ExperimentKind::VarianceReport, ExperimentKind::TrainVae,
                 ExperimentKind::TrainMle, ExperimentKind::PropertySuite}) {
    if (to_string(k) == n) return k;
  }
  fail("unknown experiment '" + std::string(name) + "'");
}

DatasetSpec parse_dataset_flag(std::string_view flag, DatasetSpec base) {
  if (flag == "synthetic") {
    base.source = "synthetic";
    base.path.clear();
  } else if (flag.substr(0, 5) == "file:" && flag.size() > 5) {
    base.source = "file";
    base.path = std::string(flag.substr(5));
  } else {
    fail("dataset must be 'synthetic' or 'file:PATH', got '" + std::string(flag) + "'");
  }
  return base;
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::string piece;
  std::istringstream in{std::string(text)};
  while (std::getline(in, piece, ',')) {
    const auto b = piece.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    const auto e = piece.find_last_not_of(" \t");
    out.push_back(piece.substr(b, e - b + 1));
  }
  return out;
}

std::vector<std::size_t> parse_sizes(std::string_view text) {
  std::string t(text);
  std::replace(t.begin(), t.end(), '-', ',');
  std::vector<std::size_t> out;
  for (const auto& piece : split_list(t)) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(piece, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != piece.size() || v == 0) fail("bad layer size '" + piece + "' in '" + std::string(text) + "'");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig c;
  c.experiment = kind;
  switch (kind) {
    case ExperimentKind::Toy:
      c.estimators = {"true", "reinforce", "ar", "arm"};
      break;
    case ExperimentKind::VarianceReport:
      c.p0 = {0.49, 0.51};
      c.estimators = {"reinforce", "ar", "arm"};
      break;
    case ExperimentKind::TrainVae:
      c.estimators = {"arm"};
      c.learning_rate = 3e-3;
      c.iterations = 5000;
      c.batch_size = 50;
      break;
    case ExperimentKind::TrainMle:
      c.estimators = {"arm"};
      c.learning_rate = 3e-3;
      c.iterations = 2000;
      c.batch_size = 100;
      c.eval_every = 100;
      c.dataset.family = "mixture";
      break;
    case ExperimentKind::PropertySuite:
      c.estimators = {"reinforce", "ar", "arm"};
      c.iterations = 200000;
      break;
  }
  return c;
}

void ExperimentConfig::validate() const {
  if (iterations < 1) fail("iterations must be at least 1");
  if (p0.empty()) fail("p0 must list at least one value");
  for (double p : p0) {
    if (!(p > 0.0 && p < 1.0)) fail("p0 must lie in (0, 1), got " + std::to_string(p));
  }
  if (!std::isfinite(phi0)) fail("phi0 must be finite");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning rate must be positive");
  if (estimators.empty()) fail("no estimators requested");
  const auto allowed = allowed_estimators(experiment);
  for (const auto& e : estimators) {
    if (!allowed.count(e)) fail("estimator '" + e + "' is not available for " + to_string(experiment));
  }
  if (k < 2) fail("K must be at least 2");
  if (variance_every < 1) fail("variance_every must be at least 1");
  if (variance_samples < 2) fail("variance_samples must be at least 2");
  if (!(grid_step > 0.0) || !(grid_max >= grid_min)) fail("phi grid is empty");
  if (latent_size < 1) fail("latent_size must be at least 1");
  if (mle_sizes.size() < 3) fail("train-mle network needs input, at least one latent layer and output sizes");
  if (batch_size < 1) fail("batch size must be at least 1");
  if (eval_samples < 1 || eval_k < 1) fail("evaluation sample counts must be at least 1");
  if (smoothing_window < 1) fail("smoothing_window must be at least 1");
  if (dataset.source != "synthetic" && dataset.source != "file") fail("dataset source must be synthetic or file");
  if (dataset.source == "file" && dataset.path.empty()) fail("file dataset needs a path");
  if (dataset.family != "bars_and_stripes" && dataset.family != "mixture") {
    fail("unknown dataset family '" + dataset.family + "'");
  }
  if (dataset.size < 2) fail("dataset size must be at least 2");
  if (!(dataset.noise >= 0.0 && dataset.noise <= 0.5)) fail("dataset noise must lie in [0, 0.5]");
  if (dataset.components < 1) fail("dataset components must be at least 1");
}

void apply_json(ExperimentConfig& c, const json& j) {
  if (!j.is_object()) fail("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "experiment") {
      if (parse_experiment(get_as<std::string>(value, "experiment")) != c.experiment) {
        fail("config file is for '" + value.get<std::string>() + "', not " + to_string(c.experiment));
      }
    } else if (key == "seed") {
      c.seed = get_as<std::uint64_t>(value, "seed");
    } else if (key == "p0") {
      c.p0 = number_or_list(value, "p0");
    } else if (key == "phi0") {
      c.phi0 = get_as<double>(value, "phi0");
    } else if (key == "learning_rate") {
      c.learning_rate = get_as<double>(value, "learning_rate");
    } else if (key == "iterations") {
      c.iterations = get_as<std::size_t>(value, "iterations");
    } else if (key == "estimators") {
      c.estimators = string_or_list(value, "estimators");
      for (auto& e : c.estimators) e = lower(e);
    } else if (key == "K") {
      c.k = get_as<std::size_t>(value, "K");
    } else if (key == "variance_every") {
      c.variance_every = get_as<std::size_t>(value, "variance_every");
    } else if (key == "variance_samples") {
      c.variance_samples = get_as<std::size_t>(value, "variance_samples");
    } else if (key == "grid") {
      if (!value.is_object()) fail("config key 'grid' must be an object");
      for (const auto& [gk, gv] : value.items()) {
        if (gk == "min") c.grid_min = get_as<double>(gv, "grid.min");
        else if (gk == "max") c.grid_max = get_as<double>(gv, "grid.max");
        else if (gk == "step") c.grid_step = get_as<double>(gv, "grid.step");
        else fail("unknown config key 'grid." + gk + "'");
      }
    } else if (key == "architecture") {
      try {
        c.architecture = sbn::parse_architecture(get_as<std::string>(value, "architecture"));
      } catch (const InvalidArgument& e) {
        fail(e.what());
      }
    } else if (key == "latent_size") {
      c.latent_size = get_as<std::size_t>(value, "latent_size");
    } else if (key == "mle_sizes") {
      c.mle_sizes = value.is_string() ? parse_sizes(value.get<std::string>())
                                      : get_as<std::vector<std::size_t>>(value, "mle_sizes");
    } else if (key == "batch_size") {
      c.batch_size = get_as<std::size_t>(value, "batch_size");
    } else if (key == "eval_every") {
      c.eval_every = get_as<std::size_t>(value, "eval_every");
    } else if (key == "eval_samples") {
      c.eval_samples = get_as<std::size_t>(value, "eval_samples");
    } else if (key == "eval_k") {
      c.eval_k = get_as<std::size_t>(value, "eval_k");
    } else if (key == "smoothing_window") {
      c.smoothing_window = get_as<std::size_t>(value, "smoothing_window");
    } else if (key == "dataset") {
      apply_dataset(c.dataset, value);
    } else if (key == "output") {
      c.output = get_as<std::string>(value, "output");
    } else {
      fail("unknown config key '" + key + "'");
    }
  }
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["experiment"] = to_string(c.experiment);
  j["seed"] = c.seed;
  j["p0"] = c.p0;
  j["phi0"] = c.phi0;
  j["learning_rate"] = c.learning_rate;
  j["iterations"] = c.iterations;
  j["estimators"] = c.estimators;
  j["K"] = c.k;
  j["variance_every"] = c.variance_every;
  j["variance_samples"] = c.variance_samples;
  j["grid"] = {{"min", c.grid_min}, {"max", c.grid_max}, {"step", c.grid_step}};
  j["architecture"] = sbn::to_string(c.architecture);
  j["latent_size"] = c.latent_size;
  j["mle_sizes"] = c.mle_sizes;
  j["batch_size"] = c.batch_size;
  j["eval_every"] = c.eval_every;
  j["eval_samples"] = c.eval_samples;
  j["eval_k"] = c.eval_k;
  j["smoothing_window"] = c.smoothing_window;
  j["dataset"] = {{"source", c.dataset.source}, {"path", c.dataset.path},
                  {"family", c.dataset.family}, {"size", c.dataset.size},
                  {"n_train", c.dataset.n_train}, {"n_valid", c.dataset.n_valid},
                  {"n_test", c.dataset.n_test}, {"components", c.dataset.components},
                  {"noise", c.dataset.noise}};
  j["output"] = c.output;
  return j;
}

ExperimentConfig load_config(ExperimentKind kind, const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail("config file '" + path + "' is not valid JSON: " + e.what());
  }
  ExperimentConfig c = default_config(kind);
  apply_json(c, j);
  return c;
}

}  // namespace armgrad::harness
