#pragma once

// Equidistant multi-level quantization of RSS means and the shift-token
// reconciliation that lets two parties with close measurements land on the
// same level.

#include <cstdint>
#include <span>
#include <vector>

#include "fskey/bitstring.hpp"
#include "fskey/simd/kernels.hpp"

namespace fskey {

// The measurable RSS range [mu_min, mu_max] in dBm with dis(a, b) = |a - b| dB.
struct MetricSpace {
  int mu_min = -104;
  int mu_max = -40;

  double width() const { return static_cast<double>(mu_max - mu_min); }
  static double distance(double a, double b);

  // Throws Error(usage) unless mu_min < mu_max.
  void validate() const;

  friend bool operator==(const MetricSpace&, const MetricSpace&) = default;
};

// Public per-channel shift P = q - mu that Alice publishes. |shift| <= t.
struct ReconcileToken {
  double shift = 0.0;
};

struct TokenizedLevel {
  double level;
  ReconcileToken token;
};

// K levels anchored at mu_min with spacing d = 2t:
//   levels = { mu_min, mu_min + d, ..., mu_min + (K - 1) d },  K = floor(width / d)
// When width / d is not an integer the top gap is wider than d; every value
// still has at most one level within distance < t.
class QuantizationScheme {
 public:
  // Throws Error(usage) for tolerance <= 0 (or non-finite) and when K < 2.
  static QuantizationScheme build(MetricSpace space, double tolerance);

  const MetricSpace& space() const { return space_; }
  int level_count() const { return static_cast<int>(levels_.size()); }
  double spacing() const { return spacing_; }
  double tolerance() const { return tolerance_; }
  int bits() const { return bits_; }  // ceil(log2 K)

  std::span<const double> levels() const { return levels_; }
  double level(int index) const { return levels_[static_cast<std::size_t>(index)]; }

  // argmin over levels of dis(mu, q); exact midpoints resolve to the lower
  // level. mu is clamped into [mu_min, mu_max] first.
  int index_of(double mu) const;
  double quantize(double mu) const { return level(index_of(mu)); }

  // Batch form of index_of; dispatches to the SIMD kernels.
  void quantize_indices(std::span<const double> mus, std::span<std::int32_t> out) const;

  // Index of a value that is exactly one of the levels, or -1.
  int index_of_level(double level) const;

  simd::QuantizeParams kernel_params() const;

 private:
  QuantizationScheme(MetricSpace space, double tolerance, double spacing, int count);

  MetricSpace space_;
  double tolerance_;
  double spacing_;
  int bits_;
  std::vector<double> levels_;
};

// Alice's side: q = quantize(mu) and P = q - mu. mu is first clamped into the
// covered interval [mu_min, last level + t] so that |P| <= t holds for every
// input; values above it quantize to the last level either way.
TokenizedLevel make_token(const QuantizationScheme& scheme, double mu);

// Bob's side: quantize(mu_prime + P). Equals Alice's level whenever
// dis(mu, mu_prime) < t.
double apply_token(const QuantizationScheme& scheme, double mu_prime, ReconcileToken token);

// Concatenated p-bit big-endian level indices. Throws Error(usage) when a
// value is not a level of the scheme.
BitString encode_levels(const QuantizationScheme& scheme, std::span<const double> levels);

// Inverse of encode_levels. Throws Error(data) on a length that is not a
// multiple of p or on an index >= K.
std::vector<double> decode_levels(const QuantizationScheme& scheme, const BitString& bits);

}  // namespace fskey
