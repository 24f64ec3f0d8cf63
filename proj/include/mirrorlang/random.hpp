#pragma once

// Deterministic random streams.
//
// Every stream is a std::mt19937_64 seeded through std::seed_seq from the
// tuple (master seed, stream index, purpose tag). Chains use their index as
// the stream index, so a chain's draws never depend on which worker ran it
// or in which order.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace mirrorlang {

enum class StreamPurpose : std::uint32_t {
  noise = 1,   // Gaussian increments of a chain
  batch = 2,   // mini-batch selection
  oracle = 3,  // exact reference draws
  init = 4,    // random initializations
  test = 5,
};

class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t index, StreamPurpose purpose)
      : engine_(make_engine(seed, index, purpose)) {}

  std::mt19937_64& engine() { return engine_; }

  double gaussian() { return normal_(engine_); }

  void fill_gaussian(std::span<double> out) {
    for (double& v : out) v = normal_(engine_);
  }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

  double gamma(double shape) { return std::gamma_distribution<double>(shape, 1.0)(engine_); }

  /// Uniform integer in [0, n).
  std::size_t index_below(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

 private:
  static std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t index, StreamPurpose purpose) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                      static_cast<std::uint32_t>(purpose)};
    return std::mt19937_64(seq);
  }

  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

/// Standard Gaussian increments xi^t of dimension d for one chain.
class NoiseStream {
 public:
  NoiseStream(std::uint64_t seed, std::uint64_t chain, std::size_t dim)
      : stream_(seed, chain, StreamPurpose::noise), buffer_(dim) {}

  std::size_t dim() const { return buffer_.size(); }

  /// Next draw; the returned view is valid until the following call.
  std::span<const double> next() {
    stream_.fill_gaussian(buffer_);
    return buffer_;
  }

 private:
  RandomStream stream_;
  std::vector<double> buffer_;
};

}  // namespace mirrorlang
