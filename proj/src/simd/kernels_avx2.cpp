#include "fskey/simd/kernels.hpp"

#if defined(__x86_64__) || defined(__i386__)
#include <immintrin.h>

#include <algorithm>
#include <cmath>

#define FSKEY_AVX2 __attribute__((target("avx2")))

namespace fskey::simd::avx2 {

FSKEY_AVX2 void quantize_indices(const QuantizeParams& p, std::span<const double> in,
                                 std::span<std::int32_t> out) {
  const std::size_t n = in.size();
  const __m256d lo = _mm256_set1_pd(p.lo);
  const __m256d hi = _mm256_set1_pd(p.hi);
  const __m256d origin = _mm256_set1_pd(p.origin);
  const __m256d spacing = _mm256_set1_pd(p.spacing);
  const __m256d half = _mm256_set1_pd(0.5);
  const __m256d zero = _mm256_setzero_pd();
  const __m256d top = _mm256_set1_pd(static_cast<double>(p.max_index));

  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v = _mm256_loadu_pd(in.data() + i);
    v = _mm256_min_pd(_mm256_max_pd(v, lo), hi);
    __m256d y = _mm256_div_pd(_mm256_sub_pd(v, origin), spacing);
    y = _mm256_round_pd(_mm256_sub_pd(y, half), _MM_FROUND_TO_POS_INF | _MM_FROUND_NO_EXC);
    y = _mm256_min_pd(_mm256_max_pd(y, zero), top);
    _mm_storeu_si128(reinterpret_cast<__m128i*>(out.data() + i), _mm256_cvttpd_epi32(y));
  }
  if (i < n) scalar::quantize_indices(p, in.subspan(i), out.subspan(i));
}

FSKEY_AVX2 std::size_t find_first(std::span<const std::int32_t> haystack, std::int32_t value) {
  const std::size_t n = haystack.size();
  const std::int32_t* data = haystack.data();
  const __m256i needle = _mm256_set1_epi32(value);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256i v = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(data + i));
    const int mask = _mm256_movemask_ps(_mm256_castsi256_ps(_mm256_cmpeq_epi32(v, needle)));
    if (mask != 0) return i + static_cast<std::size_t>(__builtin_ctz(static_cast<unsigned>(mask)));
  }
  for (; i < n; ++i) {
    if (data[i] == value) return i;
  }
  return n;
}

FSKEY_AVX2 double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  const __m256d sign = _mm256_set1_pd(-0.0);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a.data() + i), _mm256_loadu_pd(b.data() + i));
    acc = _mm256_max_pd(acc, _mm256_andnot_pd(sign, d));
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double best = std::max(std::max(lanes[0], lanes[1]), std::max(lanes[2], lanes[3]));
  for (; i < n; ++i) best = std::max(best, std::fabs(a[i] - b[i]));
  return best;
}

}  // namespace fskey::simd::avx2

#else  // non-x86 builds: the AVX2 entry points are never selected.

namespace fskey::simd::avx2 {

void quantize_indices(const QuantizeParams& p, std::span<const double> in,
                      std::span<std::int32_t> out) {
  scalar::quantize_indices(p, in, out);
}
std::size_t find_first(std::span<const std::int32_t> haystack, std::int32_t value) {
  return scalar::find_first(haystack, value);
}
double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  return scalar::max_abs_diff(a, b);
}

}  // namespace fskey::simd::avx2

#endif
