#include "armgrad/harness/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <unordered_set>

namespace armgrad::harness {

ParseError::ParseError(std::size_t line, const std::string& what)
    : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}

ValidationError::ValidationError(std::size_t line, std::size_t column, const std::string& what)
    : DataError("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
      line_(line),
      column_(column) {}

std::vector<Image> parse_plaintext_binary_images(const std::string& text) {
  std::vector<Image> images;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::vector<std::string> tokens;
    for (std::string tok; fields >> tok;) tokens.push_back(tok);
    if (tokens.empty()) continue;
    if (width == 0) width = tokens.size();
    if (tokens.size() != width) {
      throw ParseError(line_no, "expected " + std::to_string(width) + " values, found " +
                                    std::to_string(tokens.size()));
    }
    Image img(static_cast<Eigen::Index>(width));
    for (std::size_t c = 0; c < width; ++c) {
      const std::string& tok = tokens[c];
      double value = 0.0;
      std::size_t used = 0;
      try {
        value = std::stod(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size()) throw ParseError(line_no, "column " + std::to_string(c + 1) + ": '" + tok + "' is not a number");
      if (value != 0.0 && value != 1.0) {
        throw ValidationError(line_no, c + 1, "value '" + tok + "' is not 0 or 1");
      }
      img[static_cast<Eigen::Index>(c)] = value;
    }
    images.push_back(std::move(img));
  }
  return images;
}

std::vector<Image> load_plaintext_binary_images(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  auto images = parse_plaintext_binary_images(buffer.str());
  if (images.empty()) throw DataError("dataset file '" + path + "' holds no images");
  return images;
}

std::string format_plaintext_binary_images(const std::vector<Image>& images) {
  std::string out;
  for (const auto& img : images) {
    for (Eigen::Index i = 0; i < img.size(); ++i) {
      if (i) out += ' ';
      out += img[i] != 0.0 ? '1' : '0';
    }
    out += '\n';
  }
  return out;
}

void write_plaintext_binary_images(const std::string& path, const std::vector<Image>& images) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write dataset file '" + path + "'");
  out << format_plaintext_binary_images(images);
  if (!out) throw DataError("failed writing dataset file '" + path + "'");
}

std::uint64_t image_hash(const Image& image) {
  std::string bits(static_cast<std::size_t>(image.size()), '0');
  for (Eigen::Index i = 0; i < image.size(); ++i) {
    if (image[i] != 0.0) bits[static_cast<std::size_t>(i)] = '1';
  }
  return std::hash<std::string>{}(bits);
}

std::vector<Image> bars_and_stripes(std::size_t n) {
  if (n < 1 || n > 16) throw ConfigError("bars-and-stripes size must lie in [1, 16]");
  const auto side = static_cast<Eigen::Index>(n);
  std::vector<Image> out;
  // Stripes: row r is on iff bit r of the code; then bars, skipping the
  // all-off and all-on patterns already produced as stripes.
  for (std::uint64_t code = 0; code < (std::uint64_t{1} << n); ++code) {
    Image img(side * side);
    for (Eigen::Index r = 0; r < side; ++r) {
      for (Eigen::Index c = 0; c < side; ++c) img[r * side + c] = double((code >> r) & 1u);
    }
    out.push_back(std::move(img));
  }
  for (std::uint64_t code = 1; code + 1 < (std::uint64_t{1} << n); ++code) {
    Image img(side * side);
    for (Eigen::Index r = 0; r < side; ++r) {
      for (Eigen::Index c = 0; c < side; ++c) img[r * side + c] = double((code >> c) & 1u);
    }
    out.push_back(std::move(img));
  }
  return out;
}

namespace {

struct Split {
  std::size_t train, valid, test;
  std::size_t total() const { return train + valid + test; }
};

Split requested_split(const DatasetSpec& spec, Split fallback) {
  if (spec.n_train == 0 && spec.n_valid == 0 && spec.n_test == 0) return fallback;
  return {spec.n_train, spec.n_valid, spec.n_test};
}

Dataset split_in_order(std::vector<Image> images, Split s) {
  Dataset d;
  d.width = static_cast<std::size_t>(images.front().size());
  auto it = images.begin();
  d.train.assign(std::make_move_iterator(it), std::make_move_iterator(it + s.train));
  it += s.train;
  d.valid.assign(std::make_move_iterator(it), std::make_move_iterator(it + s.valid));
  it += s.valid;
  d.test.assign(std::make_move_iterator(it), std::make_move_iterator(it + s.test));
  return d;
}

std::vector<Image> mixture_images(const DatasetSpec& spec, std::size_t count, RngStream& rng) {
  const auto pixels = static_cast<Eigen::Index>(spec.size * spec.size);
  std::vector<Image> prototypes;
  for (std::size_t k = 0; k < spec.components; ++k) {
    Image p(pixels);
    for (Eigen::Index i = 0; i < pixels; ++i) p[i] = rng.next_uniform() < 0.5 ? 1.0 : 0.0;
    prototypes.push_back(std::move(p));
  }
  std::vector<Image> out;
  std::unordered_set<std::uint64_t> seen;
  const std::size_t max_attempts = 1000 * count + 1000;
  for (std::size_t attempt = 0; out.size() < count; ++attempt) {
    if (attempt == max_attempts) {
      throw ConfigError("mixture family cannot produce " + std::to_string(count) +
                        " distinct images; raise noise or size");
    }
    Image img = prototypes[static_cast<std::size_t>(rng.next_u64() % spec.components)];
    for (Eigen::Index i = 0; i < pixels; ++i) {
      if (rng.next_uniform() < spec.noise) img[i] = 1.0 - img[i];
    }
    // 64-bit hashes could in principle collide; compare pixels on a hit.
    if (!seen.insert(image_hash(img)).second &&
        std::any_of(out.begin(), out.end(), [&](const Image& o) { return o == img; })) {
      continue;
    }
    out.push_back(std::move(img));
  }
  return out;
}

}  // namespace

Dataset generate_synthetic(const DatasetSpec& spec, std::uint64_t seed) {
  RngStream rng(seed, 0x5eed0001);
  std::vector<Image> images;
  Split split{};
  if (spec.family == "bars_and_stripes") {
    images = bars_and_stripes(spec.size);
    const std::size_t total = images.size();
    const auto held_out = static_cast<std::size_t>(std::lround(0.16 * double(total)));
    split = requested_split(spec, {total - 2 * held_out, held_out, held_out});
    if (split.total() > total) {
      throw ConfigError("bars-and-stripes of size " + std::to_string(spec.size) + " has only " +
                        std::to_string(total) + " distinct patterns, " + std::to_string(split.total()) +
                        " requested");
    }
    std::shuffle(images.begin(), images.end(), rng);
  } else if (spec.family == "mixture") {
    split = requested_split(spec, {500, 100, 100});
    images = mixture_images(spec, split.total(), rng);
  } else {
    throw ConfigError("unknown dataset family '" + spec.family + "'");
  }
  if (split.train == 0) throw ConfigError("training split is empty");
  return split_in_order(std::move(images), split);
}

Dataset load_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  if (spec.source == "synthetic") return generate_synthetic(spec, seed);
  if (spec.source != "file") throw ConfigError("unknown dataset source '" + spec.source + "'");
  auto images = load_plaintext_binary_images(spec.path);
  const std::size_t n = images.size();
  const std::size_t n_valid = n / 10, n_test = n / 10;
  const Split split = requested_split(spec, {n - n_valid - n_test, n_valid, n_test});
  if (split.total() > n) {
    throw DataError("dataset file '" + spec.path + "' has " + std::to_string(n) + " images, " +
                    std::to_string(split.total()) + " requested");
  }
  if (split.train == 0) throw DataError("training split is empty");
  return split_in_order(std::move(images), split);
}

}  // namespace armgrad::harness
