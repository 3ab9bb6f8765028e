#pragma once

// T-decomposition of a byte string and the T-complexity based entropy
// estimate.
//
// The string is first parsed into single-symbol codewords. Each step takes
// the penultimate codeword p as copy pattern and the length k of the run of
// p ending there as copy factor, adds log2(k + 1) to the complexity, and
// reparses: runs of p are cut into p^(k+1) blocks and a shorter remainder
// p^j is fused with the codeword that follows it. Steps repeat until one
// codeword is left.

#include <cstddef>
#include <string_view>

namespace fskey {

struct TComplexity {
  double complexity = 0.0;   // C_T = sum log2(k_i + 1), in taugs
  std::size_t steps = 0;     // number of T-augmentation steps
  std::size_t length = 0;    // string length in symbols
  double entropy_bits = 0.0; // total-string entropy estimate
  double bits_per_symbol() const {
    return length == 0 ? 0.0 : entropy_bits / static_cast<double>(length);
  }
};

// Complexity only. Throws Error(usage) for an empty string.
TComplexity t_decompose(std::string_view text);

// Decomposition plus entropy estimate.
TComplexity t_complexity(std::string_view text);

// Logarithmic integral li(x) = Ei(ln x), x > 1, and its inverse on
// (1, inf) (Newton iteration with bisection safeguard).
double logarithmic_integral(double x);
double inverse_logarithmic_integral(double y);

// Entropy estimate in bits for a given complexity. The T-information
// li^-1(C_T) (in nats) is converted to bits and multiplied by a scale
// factor calibrated so that i.i.d. uniform strings of length 10^5 over
// alphabets of 2 to 64 symbols come out at L log2 A:
//   bits = kTEntropyScale * li^-1(C_T) / ln 2
double t_entropy_bits(double complexity);

extern const double kTEntropyScale;

}  // namespace fskey
