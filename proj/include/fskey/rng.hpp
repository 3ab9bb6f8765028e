#pragma once

#include <cstdint>
#include <random>

namespace fskey {

// Identifiers for independent random streams derived from one root seed.
enum class Stream : std::uint64_t {
  run = 1,
  channel = 2,
  samples = 3,
  loss = 4,
  eve = 5,
  trace = 6,
  extrapolation = 7,
  synthetic = 8,
};

// Counter-based seed splitting:
//   split_seed(root, s, i) = mix(mix(root + s * G) + (i + 1) * G)
// where mix is the SplitMix64 finalizer and G = 0x9E3779B97F4A7C15.
// Distinct (stream, index) pairs give statistically independent seeds.
std::uint64_t split_seed(std::uint64_t root, Stream stream, std::uint64_t index = 0);

// mt19937_64 with a fixed uniform/normal transform so that sequences are
// identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via the Box-Muller transform; pairs are cached.
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace fskey
