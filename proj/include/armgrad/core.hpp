#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace armgrad {

// Error hierarchy. Every error raised by the library derives from Error so
// callers (the CLI in particular) can map categories onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class BudgetError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed or invalid input files (datasets, checkpoints).
class DataError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Logistic function e^x / (1 + e^x). Only e^{-|x|} is ever evaluated, so
/// the result is finite for any finite input.
double sigmoid(double phi);

/// log(1 + e^x), stable for large |x|.
double softplus(double x);

/// log sigmoid(x) = -softplus(-x).
inline double log_sigmoid(double x) { return -softplus(-x); }

/// Bernoulli logits. Always non-empty and finite.
class LogitVector {
 public:
  explicit LogitVector(std::vector<double> values);
  LogitVector(std::initializer_list<double> values);

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }

  // Replaces one entry, re-checking finiteness.
  void set(std::size_t i, double value);

 private:
  std::vector<double> values_;
};

using BinarySample = std::vector<std::uint8_t>;

/// A vector of uniforms on [0, 1) together with the stream that produced it.
struct UniformDraw {
  std::vector<double> values;
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
};

/// Philox4x32-10 block function. Exposed for known-answer tests.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Counter-based random stream keyed by (seed, stream_id). The n-th output
/// depends only on (seed, stream_id, n): no hidden state beyond the cursor,
/// so a copy replays exactly and distinct stream ids never share blocks.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  /// Number of 64-bit words consumed so far.
  std::uint64_t cursor() const { return cursor_; }
  void seek(std::uint64_t cursor) { cursor_ = cursor; }

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double next_uniform();
  /// Exp(1) via inversion of a [0, 1) uniform.
  double next_exponential();
  UniformDraw uniform_draw(std::size_t n);

  // UniformRandomBitGenerator, for std::shuffle and friends.
  using result_type = std::uint64_t;
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()() { return next_u64(); }

  /// Independent child stream: same seed, stream id derived from
  /// (stream_id, index). Does not advance this stream.
  RngStream substream(std::uint64_t index) const;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t cursor_ = 0;
  // Last generated block, so consecutive words share one Philox call.
  std::uint64_t cached_block_ = ~std::uint64_t{0};
  std::array<std::uint64_t, 2> cached_words_{};
};

/// bit_v = 1 iff u_v < sigmoid(phi_v). Ties map to 0.
BinarySample threshold_sample(std::span<const double> u, const LogitVector& phi);

/// bit_v = 1 iff u_v > sigmoid(-phi_v): the sample driven by 1 - u.
BinarySample antithetic_sample(std::span<const double> u, const LogitVector& phi);

/// Bernoulli(sigmoid(phi)) drawn as a race between two unit exponentials,
/// 1[e1 < e2 * exp(phi)].
int exponential_race_sample(RngStream& rng, double phi);

}  // namespace armgrad
