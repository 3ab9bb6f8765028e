#include <cassert>
#include <cstdlib>
#include <string>

#include "fskey/simd/kernels.hpp"

namespace fskey::simd {
namespace {

struct KernelTable {
  Isa isa;
  void (*quantize_indices)(const QuantizeParams&, std::span<const double>,
                           std::span<std::int32_t>);
  std::size_t (*find_first)(std::span<const std::int32_t>, std::int32_t);
  double (*max_abs_diff)(std::span<const double>, std::span<const double>);
};

constexpr KernelTable kScalar{Isa::scalar, &scalar::quantize_indices, &scalar::find_first,
                              &scalar::max_abs_diff};
constexpr KernelTable kAvx2{Isa::avx2, &avx2::quantize_indices, &avx2::find_first,
                            &avx2::max_abs_diff};

const KernelTable& select() {
  if (const char* forced = std::getenv("FSKEY_ISA")) {
    const std::string name(forced);
    if (name == "scalar") return kScalar;
    if (name == "avx2" && isa_supported(Isa::avx2)) return kAvx2;
  }
  return isa_supported(Isa::avx2) ? kAvx2 : kScalar;
}

const KernelTable& table() {
  static const KernelTable& chosen = select();
  return chosen;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
  }
  return "unknown";
}

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(__x86_64__) || defined(__i386__)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
  }
  return false;
}

Isa active_isa() { return table().isa; }

void quantize_indices(const QuantizeParams& params, std::span<const double> in,
                      std::span<std::int32_t> out) {
  assert(out.size() >= in.size());
  table().quantize_indices(params, in, out);
}

std::size_t find_first(std::span<const std::int32_t> haystack, std::int32_t value) {
  return table().find_first(haystack, value);
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  return table().max_abs_diff(a, b);
}

}  // namespace fskey::simd
