#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"

#include "armgrad/analytic.hpp"
#include "armgrad/harness/config.hpp"
#include "armgrad/harness/dataset.hpp"
#include "armgrad/harness/experiments.hpp"
#include "armgrad/harness/report.hpp"

using namespace armgrad;
using namespace armgrad::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("armgrad_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

double cell(const CsvTable& t, std::size_t row, const std::string& col) {
  return std::get<double>(t.row(row)[t.column(col)]);
}

}  // namespace

TEST_CASE("config defaults and JSON overlay") {
  auto c = default_config(ExperimentKind::Toy);
  CHECK(c.learning_rate == 0.1);
  CHECK(c.iterations == 2000);
  CHECK(c.phi0 == 0.0);
  CHECK(default_config(ExperimentKind::TrainVae).batch_size == 50);
  CHECK(default_config(ExperimentKind::TrainVae).architecture == sbn::Architecture::Linear);

  apply_json(c, nlohmann::json::parse(R"({"seed": 7, "p0": [0.499, 0.501], "estimators": "arm, ar",
                                          "grid": {"step": 0.5}, "dataset": "file:/tmp/x.txt"})"));
  CHECK(c.seed == 7);
  CHECK(c.p0 == std::vector<double>{0.499, 0.501});
  CHECK(c.estimators == std::vector<std::string>{"arm", "ar"});
  CHECK(c.grid_step == 0.5);
  CHECK(c.dataset.source == "file");
  CHECK(c.dataset.path == "/tmp/x.txt");

  // A later overlay (the CLI flags) wins over an earlier one (the file).
  apply_json(c, {{"seed", 9}});
  CHECK(c.seed == 9);

  auto round = default_config(ExperimentKind::Toy);
  apply_json(round, to_json(c));
  CHECK(to_json(round) == to_json(c));
}

TEST_CASE("config errors") {
  auto c = default_config(ExperimentKind::Toy);
  CHECK_THROWS_AS(apply_json(c, {{"stepsize", 0.1}}), ConfigError);
  CHECK_THROWS_AS(apply_json(c, {{"seed", "seven"}}), ConfigError);
  CHECK_THROWS_AS(apply_json(c, {{"experiment", "train_vae"}}), ConfigError);
  CHECK_THROWS_AS(apply_json(c, {{"architecture", "conv"}}), ConfigError);
  CHECK_THROWS_AS(apply_json(c, {{"dataset", {{"colour", 1}}}}), ConfigError);

  auto bad = default_config(ExperimentKind::Toy);
  bad.iterations = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = default_config(ExperimentKind::Toy);
  bad.p0 = {1.0};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = default_config(ExperimentKind::VarianceReport);
  bad.estimators = {"true"};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = default_config(ExperimentKind::Toy);
  bad.estimators = {"rebar"};
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  CHECK_THROWS_AS(load_config(ExperimentKind::Toy, "/nonexistent/config.json"), ConfigError);
  CHECK_THROWS_AS(parse_dataset_flag("mnist"), ConfigError);
  CHECK(parse_experiment("variance-report") == ExperimentKind::VarianceReport);
  CHECK(parse_sizes("18-8-8-18") == std::vector<std::size_t>{18, 8, 8, 18});
  CHECK_THROWS_AS(parse_sizes("18-x-18"), ConfigError);
  CHECK(split_list(" a, b ,,c") == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("plaintext images") {
  SUBCASE("parse") {
    const auto images = parse_plaintext_binary_images("0 1 0 1\n\n1 1 0 0\n");
    REQUIRE(images.size() == 2);
    CHECK(images[0] == (Image(4) << 0, 1, 0, 1).finished());
  }
  SUBCASE("non-binary value names its column") {
    try {
      parse_plaintext_binary_images("0 1 0 1\n0 0.5 1 0\n");
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(e.line() == 2);
      CHECK(e.column() == 2);
      CHECK(std::string(e.what()).find("column 2") != std::string::npos);
    }
  }
  SUBCASE("malformed lines carry their line number") {
    try {
      parse_plaintext_binary_images("0 1 0 1\n0 1\n");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(parse_plaintext_binary_images("0 1 x 1\n"), ParseError);
    CHECK_THROWS_AS(load_plaintext_binary_images("/nonexistent/images.txt"), DataError);
  }
  SUBCASE("round trip") {
    const auto dir = scratch_dir("images");
    const auto images = generate_synthetic(DatasetSpec{}, 3).train;
    write_plaintext_binary_images((dir / "x.txt").string(), images);
    const auto back = load_plaintext_binary_images((dir / "x.txt").string());
    REQUIRE(back.size() == images.size());
    for (std::size_t i = 0; i < images.size(); ++i) CHECK(back[i] == images[i]);
  }
}

TEST_CASE("bars and stripes") {
  for (std::size_t n : {2u, 3u, 6u}) {
    const auto all = bars_and_stripes(n);
    std::set<std::uint64_t> hashes;
    for (const auto& img : all) {
      hashes.insert(image_hash(img));
      bool rows_const = true, cols_const = true;
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
          rows_const = rows_const && img[r * n + c] == img[r * n];
          cols_const = cols_const && img[r * n + c] == img[c];
        }
      }
      CHECK((rows_const || cols_const));
    }
    CHECK(all.size() == 2 * (std::size_t{1} << n) - 2);
    CHECK(hashes.size() == all.size());
  }
}

TEST_CASE("synthetic datasets") {
  SUBCASE("default split of every 6x6 pattern") {
    const auto d = generate_synthetic(DatasetSpec{}, 11);
    CHECK(d.width == 36);
    CHECK(d.train.size() == 86);
    CHECK(d.valid.size() == 20);
    CHECK(d.test.size() == 20);
    std::set<std::uint64_t> seen;
    for (const auto* split : {&d.train, &d.valid, &d.test}) {
      for (const auto& img : *split) CHECK(seen.insert(image_hash(img)).second);
    }
  }
  SUBCASE("seed determinism") {
    DatasetSpec mix;
    mix.family = "mixture";
    const auto a = generate_synthetic(mix, 5), b = generate_synthetic(mix, 5), c = generate_synthetic(mix, 6);
    CHECK(a.train.size() == 500);
    CHECK(a.train == b.train);
    CHECK(a.test == b.test);
    CHECK(a.train != c.train);
    std::set<std::uint64_t> seen;
    for (const auto* split : {&a.train, &a.valid, &a.test}) {
      for (const auto& img : *split) CHECK(seen.insert(image_hash(img)).second);
    }
  }
  SUBCASE("impossible requests") {
    DatasetSpec too_many;
    too_many.n_train = 200;
    CHECK_THROWS_AS(generate_synthetic(too_many, 1), ConfigError);
    DatasetSpec tiny_mix;
    tiny_mix.family = "mixture";
    tiny_mix.size = 2;
    tiny_mix.noise = 0.0;
    CHECK_THROWS_AS(generate_synthetic(tiny_mix, 1), ConfigError);
  }
  SUBCASE("file splits in order") {
    const auto dir = scratch_dir("file_split");
    const auto images = bars_and_stripes(4);  // 30 images
    write_plaintext_binary_images((dir / "d.txt").string(), images);
    const auto d = load_dataset(parse_dataset_flag("file:" + (dir / "d.txt").string()), 1);
    CHECK(d.train.size() == 24);
    CHECK(d.valid.size() == 3);
    CHECK(d.test.size() == 3);
    CHECK(d.train.front() == images.front());
    CHECK(d.test.back() == images.back());
  }
}

TEST_CASE("csv and manifest output") {
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
  CHECK(format_double(NAN) == "nan");

  CsvTable t({"a", "b", "c"});
  t.add_row({1LL, 0.5, std::string("arm")});
  t.add_row({2LL, Cell{}, std::string("ar")});
  CHECK(t.str() == "a,b,c\n1,0.5,arm\n2,,ar\n");
  CHECK_THROWS_AS(t.add_row({1LL}), DimensionError);

  auto config = default_config(ExperimentKind::Toy);
  const auto dir = scratch_dir("artifacts");
  config.output = (dir / "sub" / "run.csv").string();
  RunArtifacts art;
  art.table = t;
  art.wall_time_ms = {1.0, 2.0};
  const auto paths = write_artifacts(config, art);
  CHECK(slurp(paths.csv) == t.str());
  CHECK(paths.manifest == (dir / "sub" / "run.manifest.json").string());
  const auto manifest = nlohmann::json::parse(slurp(paths.manifest));
  CHECK(manifest["seed"] == config.seed);
  CHECK(manifest["config"] == to_json(config));
  CHECK(!manifest["version"].get<std::string>().empty());
  CHECK(fs::exists(paths.timing));
  CHECK(!fs::exists(paths.checkpoint));
}

TEST_CASE("toy runs") {
  auto config = default_config(ExperimentKind::Toy);
  config.p0 = {0.49, 0.51};
  config.iterations = 400;
  config.variance_every = 40;
  const auto result = run_toy(config);
  CHECK(result.table.rows() == 2 * 4 * 401);

  SUBCASE("true gradient trajectories are monotone toward the right limit") {
    for (const auto& tr : result.traces) {
      if (tr.estimator != "true") continue;
      for (std::size_t i = 10; i + 1 < tr.phi.size(); ++i) {
        if (tr.p0 < 0.5) CHECK(tr.phi[i + 1] > tr.phi[i]);
        else CHECK(tr.phi[i + 1] < tr.phi[i]);
      }
    }
  }
  SUBCASE("logged ARM variance matches the closed form") {
    const auto& t = result.table;
    std::size_t logged = 0;
    for (std::size_t r = 0; r < t.rows(); ++r) {
      if (std::get<std::string>(t.row(r)[t.column("estimator")]) != "arm") continue;
      if (std::holds_alternative<std::monostate>(t.row(r)[t.column("grad_variance")])) continue;
      ++logged;
      CHECK(std::abs(cell(t, r, "grad_variance") / cell(t, r, "analytic_variance") - 1.0) <= 0.10);
    }
    CHECK(logged == 2 * 11);
  }
  SUBCASE("reruns are byte-identical") {
    CHECK(run_toy(config).table.str() == result.table.str());
  }
  SUBCASE("invalid p0") {
    auto bad = config;
    bad.p0 = {1.5};
    CHECK_THROWS_AS(run_toy(bad), ConfigError);
  }
}

TEST_CASE("variance report") {
  auto config = default_config(ExperimentKind::VarianceReport);
  const auto result = run_variance_report(config);
  CHECK(phi_grid(config).size() == 21);
  CHECK(result.points.size() == 2 * 21 * 3);
  for (const auto& p : result.points) {
    if (p.estimator == "reinforce" && p.phi == 0.0) {
      const analytic::ToyProblem toy(p.p0);
      CHECK(std::abs(p.stddev / (0.25 * std::abs(toy.f1() + toy.f0())) - 1.0) <= 0.05);
    }
  }
  CHECK(run_variance_report(config).table.str() == result.table.str());
}

TEST_CASE("train-vae") {
  SUBCASE("short run on bars and stripes") {
    auto config = default_config(ExperimentKind::TrainVae);
    config.iterations = 400;
    const auto result = run_train_vae(config);
    CHECK(result.step_neg_elbo.size() == 400);
    CHECK(trailing_mean(result.step_neg_elbo, 400, 100) < trailing_mean(result.step_neg_elbo, 100, 100));
    CHECK(result.table.header().front() == "step");
    REQUIRE(result.checkpoint.has_value());
    const auto back = sbn::checkpoint_from_string(sbn::checkpoint_to_string(*result.checkpoint));
    CHECK(back.optimizer.step == 400);
    CHECK(run_train_vae(config).table.str() == result.table.str());
  }
  SUBCASE("all-zero images are learned") {
    auto config = default_config(ExperimentKind::TrainVae);
    config.iterations = 1000;
    config.latent_size = 4;
    Dataset zeros;
    zeros.width = 16;
    zeros.train.assign(40, Image::Zero(16));
    zeros.valid.assign(5, Image::Zero(16));
    zeros.test.assign(5, Image::Zero(16));
    const auto result = run_train_vae(config, zeros);
    std::vector<double> smoothed;
    for (std::size_t s = 100; s <= 1000; s += 100) smoothed.push_back(trailing_mean(result.step_neg_elbo, s, 100));
    for (std::size_t i = 1; i < smoothed.size(); ++i) CHECK(smoothed[i] < smoothed[i - 1]);
    CHECK(smoothed.back() < 0.2 * smoothed.front());
  }
}

TEST_CASE("train-mle") {
  auto config = default_config(ExperimentKind::TrainMle);
  config.iterations = 300;
  config.eval_k = 20;
  const auto result = run_train_mle(config);
  CHECK(result.test_nll_final < result.test_nll_init);
  CHECK(run_train_mle(config).table.str() == result.table.str());

  SUBCASE("more importance samples give a tighter bound") {
    const auto data = load_dataset(config.dataset, config.seed);
    RngStream a(9, 0), b(9, 1);
    double k1 = 0.0, k100 = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
      k1 += mean_test_nll(result.model, data.test, 1, a);
      k100 += mean_test_nll(result.model, data.test, 100, b);
    }
    CHECK(k100 <= k1);
  }
  SUBCASE("network must match the image halves") {
    auto bad = config;
    bad.mle_sizes = {10, 8, 18};
    CHECK_THROWS_AS(run_train_mle(bad), ConfigError);
  }
  SUBCASE("missing dataset file") {
    auto bad = config;
    bad.dataset = parse_dataset_flag("file:/nonexistent/data.txt");
    CHECK_THROWS_AS(run_train_mle(bad), DataError);
  }
}

TEST_CASE("property suite at reduced size") {
  auto config = default_config(ExperimentKind::PropertySuite);
  config.iterations = 2000;
  const auto result = run_property_suite(config);
  CHECK(result.table.rows() == 6);
  for (const auto& p : result.properties) {
    CHECK(p.checks > 0);
    CHECK(p.detail.find(',') == std::string::npos);
  }
}
