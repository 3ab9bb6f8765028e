#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "fskey/channel_model.hpp"
#include "fskey/quantizer.hpp"

namespace fskey {

// Quantized outcomes: one row per sample (position), one column per channel,
// entries are level indices.
using LevelMatrix = Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

LevelMatrix quantize_matrix(const Eigen::MatrixXd& means, const QuantizationScheme& scheme);

// Plug-in Shannon entropy (bits) of the empirical distribution of `outcomes`.
double marginal_entropy(std::span<const std::int32_t> outcomes);

double joint_entropy_independent(std::span<const double> per_channel);

struct PluginEstimate {
  double bits = 0.0;
  std::size_t samples = 0;
  std::size_t distinct = 0;
  bool undersampled = false;  // samples < 10 * distinct
};

// Plug-in entropy over the empirical joint distribution of whole rows.
PluginEstimate joint_entropy_plugin(const LevelMatrix& outcomes);

// T-string symbols: level index i is written as byte kTStringOffset + i, row
// by row. Indices up to 63 give printable ASCII ('?' .. '~'); larger
// indices continue into the extended byte range.
inline constexpr int kTStringOffset = 0x3F;
inline constexpr int kTStringMaxLevels = 0x100 - kTStringOffset;

// Smallest tolerance whose scheme fits the T-string alphabet (exclusive
// bound: t must be strictly greater).
double tstring_tolerance_limit(const MetricSpace& space);

std::string tstring_encode(const LevelMatrix& outcomes);
LevelMatrix tstring_decode(std::string_view text, int channels);

// 1/2 log2((2 pi e)^n det(sigma)). Throws Error(numerical) naming the
// smallest eigenvalue when sigma is not positive definite.
double mvn_differential_entropy(const Eigen::MatrixXd& sigma);

struct EntropyReport {
  double tolerance = 0.0;
  std::vector<double> per_channel;
  double per_channel_mean = 0.0;
  double joint_independent = 0.0;
  double joint_plugin = 0.0;
  double joint_tcomplexity = 0.0;  // bits per position (row)
  std::size_t samples = 0;
  std::size_t distinct = 0;
  bool undersampled = false;
};

// `means` is positions x n (for example RssTrace::means(Party::alice)).
EntropyReport entropy_report(const Eigen::MatrixXd& means, const MetricSpace& space,
                             double tolerance);
std::vector<EntropyReport> entropy_reports(const Eigen::MatrixXd& means, const MetricSpace& space,
                                           std::span<const double> tolerances);

// Dependent-channel entropy per position from the T-complexity estimator.
double tcomplexity_joint_entropy(const LevelMatrix& outcomes);

struct ModelComparisonRow {
  double tolerance = 0.0;
  double empirical_bits = 0.0;
  double model_bits = 0.0;
};

// T-complexity joint entropy of Alice's channel means in `trace` against an
// equal-size trace synthesized from `model` with `seed`.
std::vector<ModelComparisonRow> model_vs_empirical(const ChannelModel& model,
                                                   const RssTrace& trace,
                                                   std::span<const double> tolerances,
                                                   std::uint64_t seed);

}  // namespace fskey
