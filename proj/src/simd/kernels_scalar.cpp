#include <algorithm>
#include <cmath>

#include "fskey/simd/kernels.hpp"

namespace fskey::simd::scalar {

void quantize_indices(const QuantizeParams& p, std::span<const double> in,
                      std::span<std::int32_t> out) {
  const double max_index = static_cast<double>(p.max_index);
  for (std::size_t i = 0; i < in.size(); ++i) {
    const double v = std::min(std::max(in[i], p.lo), p.hi);
    double y = std::ceil((v - p.origin) / p.spacing - 0.5);
    y = std::min(std::max(y, 0.0), max_index);
    out[i] = static_cast<std::int32_t>(y);
  }
}

std::size_t find_first(std::span<const std::int32_t> haystack, std::int32_t value) {
  for (std::size_t i = 0; i < haystack.size(); ++i) {
    if (haystack[i] == value) return i;
  }
  return haystack.size();
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double best = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    best = std::max(best, std::fabs(a[i] - b[i]));
  }
  return best;
}

}  // namespace fskey::simd::scalar
