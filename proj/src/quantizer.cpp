#include "fskey/quantizer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "fskey/error.hpp"

namespace fskey {

double MetricSpace::distance(double a, double b) { return std::fabs(a - b); }

void MetricSpace::validate() const {
  if (mu_min >= mu_max) {
    fail(ErrorKind::usage, "metric space requires mu_min < mu_max (got [" +
                               std::to_string(mu_min) + ", " + std::to_string(mu_max) + "])");
  }
}

QuantizationScheme::QuantizationScheme(MetricSpace space, double tolerance, double spacing,
                                       int count)
    : space_(space),
      tolerance_(tolerance),
      spacing_(spacing),
      bits_(std::bit_width(static_cast<unsigned>(count - 1))) {
  levels_.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) levels_.push_back(space.mu_min + i * spacing);
}

QuantizationScheme QuantizationScheme::build(MetricSpace space, double tolerance) {
  space.validate();
  if (!std::isfinite(tolerance) || tolerance <= 0.0) {
    fail(ErrorKind::usage, "tolerance must be positive, got " + std::to_string(tolerance));
  }
  const double spacing = 2.0 * tolerance;
  // The epsilon absorbs representation error, e.g. 64 / 0.8.
  const double ratio = std::floor(space.width() / spacing + 1e-9);
  if (ratio < 2.0) {
    fail(ErrorKind::usage, "tolerance " + std::to_string(tolerance) +
                               " leaves fewer than two quantization levels");
  }
  if (ratio > 1e7) fail(ErrorKind::usage, "tolerance too small: level count exceeds 10^7");
  return QuantizationScheme(space, tolerance, spacing, static_cast<int>(ratio));
}

simd::QuantizeParams QuantizationScheme::kernel_params() const {
  return {static_cast<double>(space_.mu_min), static_cast<double>(space_.mu_max),
          static_cast<double>(space_.mu_min), spacing_, level_count() - 1};
}

int QuantizationScheme::index_of(double mu) const {
  std::int32_t index = 0;
  simd::scalar::quantize_indices(kernel_params(), std::span(&mu, 1), std::span(&index, 1));
  return index;
}

void QuantizationScheme::quantize_indices(std::span<const double> mus,
                                          std::span<std::int32_t> out) const {
  simd::quantize_indices(kernel_params(), mus, out);
}

int QuantizationScheme::index_of_level(double level) const {
  const double position = (level - space_.mu_min) / spacing_;
  if (!std::isfinite(position)) return -1;
  const double rounded = std::round(position);
  if (rounded < 0.0 || rounded >= static_cast<double>(levels_.size())) return -1;
  const int index = static_cast<int>(rounded);
  return std::fabs(levels_[static_cast<std::size_t>(index)] - level) <= 1e-9 ? index : -1;
}

TokenizedLevel make_token(const QuantizationScheme& scheme, double mu) {
  const double top = scheme.levels().back() + scheme.tolerance();
  const double covered = std::clamp(mu, static_cast<double>(scheme.space().mu_min), top);
  const double q = scheme.quantize(covered);
  return {q, ReconcileToken{q - covered}};
}

double apply_token(const QuantizationScheme& scheme, double mu_prime, ReconcileToken token) {
  return scheme.quantize(mu_prime + token.shift);
}

BitString encode_levels(const QuantizationScheme& scheme, std::span<const double> levels) {
  BitString out;
  for (double q : levels) {
    const int index = scheme.index_of_level(q);
    if (index < 0) fail(ErrorKind::usage, "value " + std::to_string(q) + " is not a level");
    out.append(static_cast<std::uint64_t>(index), scheme.bits());
  }
  return out;
}

std::vector<double> decode_levels(const QuantizationScheme& scheme, const BitString& bits) {
  const auto width = static_cast<std::size_t>(scheme.bits());
  if (bits.size() % width != 0) {
    fail(ErrorKind::data, "bit string length " + std::to_string(bits.size()) +
                              " is not a multiple of " + std::to_string(width));
  }
  std::vector<double> levels;
  levels.reserve(bits.size() / width);
  for (std::size_t offset = 0; offset < bits.size(); offset += width) {
    const auto index = bits.read(offset, scheme.bits());
    if (index >= static_cast<std::uint64_t>(scheme.level_count())) {
      fail(ErrorKind::data, "encoded index " + std::to_string(index) + " out of range");
    }
    levels.push_back(scheme.level(static_cast<int>(index)));
  }
  return levels;
}

}  // namespace fskey
