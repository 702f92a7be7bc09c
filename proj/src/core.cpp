#include "armgrad/core.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace armgrad {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

void check_lengths(std::size_t u, std::size_t phi) {
  if (u != phi) {
    throw DimensionError("uniform draw has length " + std::to_string(u) +
                         " but logits have length " + std::to_string(phi));
  }
}

}  // namespace

double sigmoid(double phi) {
  if (!std::isfinite(phi)) {
    throw InvalidArgument("sigmoid: non-finite input");
  }
  const double e = std::exp(-std::abs(phi));
  return phi >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
}

double softplus(double x) {
  // log1p(e^x) for x <= 0; x + log1p(e^-x) otherwise.
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

LogitVector::LogitVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) {
    throw InvalidArgument("LogitVector must have at least one entry");
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw InvalidArgument("LogitVector entry " + std::to_string(i) + " is not finite");
    }
  }
}

LogitVector::LogitVector(std::initializer_list<double> values)
    : LogitVector(std::vector<double>(values)) {}

void LogitVector::set(std::size_t i, double value) {
  if (!std::isfinite(value)) {
    throw InvalidArgument("LogitVector entry " + std::to_string(i) + " is not finite");
  }
  values_.at(i) = value;
}

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t{kPhiloxM0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kPhiloxM1} * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kPhiloxW0;
    key[1] += kPhiloxW1;
  }
  return ctr;
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {}

std::uint64_t RngStream::next_u64() {
  const std::uint64_t block = cursor_ >> 1;
  if (block != cached_block_) {
    const auto out = philox4x32(
        {static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
         static_cast<std::uint32_t>(stream_id_),
         static_cast<std::uint32_t>(stream_id_ >> 32)},
        {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)});
    cached_words_ = {std::uint64_t{out[0]} | (std::uint64_t{out[1]} << 32),
                     std::uint64_t{out[2]} | (std::uint64_t{out[3]} << 32)};
    cached_block_ = block;
  }
  return cached_words_[cursor_++ & 1];
}

double RngStream::next_uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::next_exponential() { return -std::log1p(-next_uniform()); }

UniformDraw RngStream::uniform_draw(std::size_t n) {
  UniformDraw draw{std::vector<double>(n), seed_, stream_id_};
  for (auto& v : draw.values) v = next_uniform();
  return draw;
}

RngStream RngStream::substream(std::uint64_t index) const {
  return RngStream(seed_, splitmix64(stream_id_ ^ splitmix64(index)));
}

BinarySample threshold_sample(std::span<const double> u, const LogitVector& phi) {
  check_lengths(u.size(), phi.size());
  BinarySample z(u.size());
  for (std::size_t v = 0; v < u.size(); ++v) {
    z[v] = u[v] < sigmoid(phi[v]) ? 1 : 0;
  }
  return z;
}

BinarySample antithetic_sample(std::span<const double> u, const LogitVector& phi) {
  check_lengths(u.size(), phi.size());
  BinarySample z(u.size());
  for (std::size_t v = 0; v < u.size(); ++v) {
    z[v] = u[v] > sigmoid(-phi[v]) ? 1 : 0;
  }
  return z;
}

int exponential_race_sample(RngStream& rng, double phi) {
  if (!std::isfinite(phi)) {
    throw InvalidArgument("exponential_race_sample: non-finite logit");
  }
  const double e1 = rng.next_exponential();
  const double e2 = rng.next_exponential();
  // e1 < e2 * exp(phi), compared in log space so large phi cannot overflow.
  return std::log(e1) - std::log(e2) < phi ? 1 : 0;
}

}  // namespace armgrad
