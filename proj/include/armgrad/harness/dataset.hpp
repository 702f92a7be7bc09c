#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "armgrad/core.hpp"
#include "armgrad/harness/config.hpp"
#include "armgrad/sbn.hpp"

namespace armgrad::harness {

/// Malformed line in a plaintext image file.
class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Well-formed line holding a value other than 0 or 1.
class ValidationError : public DataError {
 public:
  ValidationError(std::size_t line, std::size_t column, const std::string& what);
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

using Image = sbn::Vector;  // entries exactly 0.0 or 1.0

struct Dataset {
  std::size_t width = 0;  // pixels per image
  std::vector<Image> train;
  std::vector<Image> valid;
  std::vector<Image> test;
};

/// Whitespace-separated 0/1 values, one image per line, every line the same
/// width. Blank lines are skipped. Line and column numbers are 1-based.
std::vector<Image> load_plaintext_binary_images(const std::string& path);
std::vector<Image> parse_plaintext_binary_images(const std::string& text);

void write_plaintext_binary_images(const std::string& path, const std::vector<Image>& images);
std::string format_plaintext_binary_images(const std::vector<Image>& images);

/// Every n x n bars-and-stripes pattern (each row constant, or each column
/// constant), without duplicates: 2 * 2^n - 2 images, row-major pixels.
std::vector<Image> bars_and_stripes(std::size_t n);

/// Deterministic synthetic dataset with pairwise distinct images across all
/// splits. Throws ConfigError if the family cannot supply enough images.
Dataset generate_synthetic(const DatasetSpec& spec, std::uint64_t seed);

/// Synthetic generation or file loading with splits taken in file order.
Dataset load_dataset(const DatasetSpec& spec, std::uint64_t seed);

/// 64-bit hash of an image's pixels, for duplicate and disjointness checks.
std::uint64_t image_hash(const Image& image);

}  // namespace armgrad::harness
