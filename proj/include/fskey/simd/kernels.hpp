#pragma once

// Data-parallel inner loops. Each kernel has a scalar reference
// implementation and an AVX2 variant; the public entry points dispatch at
// runtime to the best variant the CPU supports. Variants are required to
// produce bit-identical results.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace fskey::simd {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);

// True when the running CPU (and this build) can execute `isa`.
bool isa_supported(Isa isa);

// The variant used by the dispatching entry points. Chosen once, on first
// use: the best supported ISA, unless FSKEY_ISA=scalar|avx2 overrides it.
Isa active_isa();

// Uniform quantization grid: level i sits at origin + i * spacing,
// i in [0, max_index]. Inputs are clamped to [lo, hi] first.
struct QuantizeParams {
  double lo;
  double hi;
  double origin;
  double spacing;
  std::int32_t max_index;
};

// Nearest-level index per input; exact midpoints go to the lower level.
//   index = clamp(ceil((clamp(v, lo, hi) - origin) / spacing - 0.5), 0, max_index)
// `out` must be at least as long as `in`.
void quantize_indices(const QuantizeParams& params, std::span<const double> in,
                      std::span<std::int32_t> out);

// Index of the first element equal to `value`, or haystack.size().
std::size_t find_first(std::span<const std::int32_t> haystack, std::int32_t value);

// max_i |a[i] - b[i]|; 0 for empty input. Sizes must match.
double max_abs_diff(std::span<const double> a, std::span<const double> b);

namespace scalar {
void quantize_indices(const QuantizeParams& params, std::span<const double> in,
                      std::span<std::int32_t> out);
std::size_t find_first(std::span<const std::int32_t> haystack, std::int32_t value);
double max_abs_diff(std::span<const double> a, std::span<const double> b);
}  // namespace scalar

namespace avx2 {
// Only callable when isa_supported(Isa::avx2).
void quantize_indices(const QuantizeParams& params, std::span<const double> in,
                      std::span<std::int32_t> out);
std::size_t find_first(std::span<const std::int32_t> haystack, std::int32_t value);
double max_abs_diff(std::span<const double> a, std::span<const double> b);
}  // namespace avx2

}  // namespace fskey::simd
