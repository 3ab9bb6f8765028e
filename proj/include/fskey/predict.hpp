#pragma once

// Secrecy scaling: covariance extrapolation to more channels, wider channel
// spacing by thinning, and differential-entropy projections.

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace fskey {

enum class ExtrapolationMethod { fixed_determinant, diagonal_uniform };

std::string_view to_string(ExtrapolationMethod method);
ExtrapolationMethod parse_extrapolation_method(std::string_view text);

// Rows and columns 0, s, 2s, ... of sigma. Throws Error(usage) when fewer
// than two channels would remain.
Eigen::MatrixXd thin_for_spacing(const Eigen::MatrixXd& sigma, int stride);

struct ExtrapolationConfig {
  Eigen::MatrixXd source;  // i x i, symmetric PSD
  int target = 0;          // m >= size of the thinned source
  ExtrapolationMethod method = ExtrapolationMethod::diagonal_uniform;
  int stride = 1;
  int replicates = 100;
  std::uint64_t seed = 0;
};

struct Extrapolation {
  std::vector<Eigen::MatrixXd> matrices;
  std::vector<int> clipped;  // eigenvalues clipped per replicate
  double decay = 0.0;        // lag-decay ratio used beyond the observed lags
};

inline constexpr double kEigenvalueFloor = 1e-9;

// Per-lag decay ratio r from a least-squares fit of log(mean_l / mean_0) = l log r
// over the observed lags 1..i-1 with positive mean, clamped to [0, 1].
// Returns 0 when no lag is usable.
double lag_decay(const Eigen::MatrixXd& source);

// diagonal_uniform: observed entries are kept; a missing entry at lag l is
// drawn uniformly from [min, max] of the source's lag-l diagonal when l < i,
// and from [min, max] of lag i-1 scaled by r^(l - i + 1) otherwise. The
// result is symmetrized and eigenvalues below kEigenvalueFloor are clipped.
// fixed_determinant: a single block-diagonal matrix diag(source, I), which
// keeps det unchanged.
Extrapolation extrapolate_covariance(const ExtrapolationConfig& config);

struct ProjectionRow {
  ExtrapolationMethod method;
  int channels = 0;
  int stride = 1;
  double mean_bits = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  int replicates = 0;
};

// One row per (method, target). Intervals are the 2.5% / 97.5% percentiles
// of the replicate entropies; fixed_determinant rows are exact
// (replicates = 1): H(source) + (m - n0) * 1/2 log2(2 pi e).
std::vector<ProjectionRow> entropy_projection(const Eigen::MatrixXd& source,
                                              std::span<const int> targets,
                                              std::span<const ExtrapolationMethod> methods,
                                              int stride, int replicates, std::uint64_t seed);

struct ValidationRow {
  int size = 0;  // i
  double truth = 0.0;
  double mean_bits = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  bool covered = false;
};

// For each i, extrapolates the leading i x i block of `full` back to its full
// size and checks whether the 95% interval contains H(full).
std::vector<ValidationRow> validate_prediction(const Eigen::MatrixXd& full,
                                               std::span<const int> sizes, int replicates,
                                               std::uint64_t seed);

// Linear-interpolation percentile (type 7) of unsorted data, q in [0, 1].
double percentile(std::vector<double> values, double q);

}  // namespace fskey
