#include "fskey/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <unordered_map>

#include "fskey/error.hpp"
#include "fskey/tcomplexity.hpp"

namespace fskey {

namespace {

double plugin_bits(const std::vector<std::size_t>& counts, std::size_t total) {
  const double n = static_cast<double>(total);
  double h = 0.0;
  for (std::size_t c : counts) {
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return std::max(h, 0.0);
}

template <typename Map>
std::vector<std::size_t> sorted_counts(const Map& map) {
  std::vector<std::size_t> counts;
  counts.reserve(map.size());
  for (const auto& [key, count] : map) counts.push_back(count);
  // Fixed summation order keeps results independent of hash iteration order.
  std::sort(counts.begin(), counts.end());
  return counts;
}

struct RowHash {
  std::size_t operator()(const std::vector<std::int32_t>& row) const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::int32_t v : row) {
      h ^= static_cast<std::uint32_t>(v);
      h *= 0x100000001b3ULL;
    }
    return static_cast<std::size_t>(h);
  }
};

}  // namespace

LevelMatrix quantize_matrix(const Eigen::MatrixXd& means, const QuantizationScheme& scheme) {
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = means;
  LevelMatrix out(means.rows(), means.cols());
  scheme.quantize_indices(std::span(rows.data(), static_cast<std::size_t>(rows.size())),
                          std::span(out.data(), static_cast<std::size_t>(out.size())));
  return out;
}

double marginal_entropy(std::span<const std::int32_t> outcomes) {
  if (outcomes.empty()) fail(ErrorKind::usage, "marginal entropy needs at least one outcome");
  std::unordered_map<std::int32_t, std::size_t> freq;
  for (std::int32_t v : outcomes) ++freq[v];
  return plugin_bits(sorted_counts(freq), outcomes.size());
}

double joint_entropy_independent(std::span<const double> per_channel) {
  double sum = 0.0;
  for (double h : per_channel) sum += h;
  return sum;
}

PluginEstimate joint_entropy_plugin(const LevelMatrix& outcomes) {
  PluginEstimate est;
  est.samples = static_cast<std::size_t>(outcomes.rows());
  if (est.samples == 0) return est;
  std::unordered_map<std::vector<std::int32_t>, std::size_t, RowHash> freq;
  std::vector<std::int32_t> row(static_cast<std::size_t>(outcomes.cols()));
  for (Eigen::Index r = 0; r < outcomes.rows(); ++r) {
    std::copy_n(outcomes.row(r).data(), row.size(), row.begin());
    ++freq[row];
  }
  est.distinct = freq.size();
  est.bits = plugin_bits(sorted_counts(freq), est.samples);
  est.undersampled = est.samples < 10 * est.distinct;
  return est;
}

double tstring_tolerance_limit(const MetricSpace& space) {
  return space.width() / (2.0 * (kTStringMaxLevels + 1));
}

std::string tstring_encode(const LevelMatrix& outcomes) {
  std::string text;
  text.reserve(static_cast<std::size_t>(outcomes.size()));
  for (Eigen::Index r = 0; r < outcomes.rows(); ++r) {
    for (Eigen::Index c = 0; c < outcomes.cols(); ++c) {
      const std::int32_t index = outcomes(r, c);
      if (index < 0 || index >= kTStringMaxLevels) {
        fail(ErrorKind::usage, "level index " + std::to_string(index) +
                                   " does not fit the T-string alphabet (max " +
                                   std::to_string(kTStringMaxLevels - 1) + ")");
      }
      text.push_back(static_cast<char>(kTStringOffset + index));
    }
  }
  return text;
}

LevelMatrix tstring_decode(std::string_view text, int channels) {
  if (channels < 1) fail(ErrorKind::usage, "channels must be >= 1");
  if (text.size() % static_cast<std::size_t>(channels) != 0) {
    fail(ErrorKind::data, "T-string length " + std::to_string(text.size()) +
                              " is not a multiple of " + std::to_string(channels));
  }
  LevelMatrix out(static_cast<Eigen::Index>(text.size() / static_cast<std::size_t>(channels)),
                  channels);
  for (std::size_t i = 0; i < text.size(); ++i) {
    const int byte = static_cast<unsigned char>(text[i]);
    if (byte < kTStringOffset) {
      fail(ErrorKind::data, "byte " + std::to_string(byte) + " is not a T-string symbol");
    }
    out.data()[i] = byte - kTStringOffset;
  }
  return out;
}

double mvn_differential_entropy(const Eigen::MatrixXd& sigma) {
  if (sigma.rows() < 1 || sigma.rows() != sigma.cols()) {
    fail(ErrorKind::usage, "covariance must be a non-empty square matrix");
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma, Eigen::EigenvaluesOnly);
    std::ostringstream msg;
    msg << "covariance is not positive definite (smallest eigenvalue "
        << eig.eigenvalues().minCoeff() << ")";
    fail(ErrorKind::numerical, msg.str());
  }
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double n = static_cast<double>(sigma.rows());
  return 0.5 * (n * std::log2(2.0 * std::numbers::pi * std::numbers::e) +
                logdet / std::numbers::ln2);
}

double tcomplexity_joint_entropy(const LevelMatrix& outcomes) {
  if (outcomes.rows() == 0) return 0.0;
  const TComplexity tc = t_complexity(tstring_encode(outcomes));
  return tc.entropy_bits / static_cast<double>(outcomes.rows());
}

EntropyReport entropy_report(const Eigen::MatrixXd& means, const MetricSpace& space,
                             double tolerance) {
  if (means.rows() < 1 || means.cols() < 1) {
    fail(ErrorKind::usage, "entropy report needs at least one position and channel");
  }
  const auto scheme = QuantizationScheme::build(space, tolerance);
  if (scheme.level_count() > kTStringMaxLevels) {
    std::ostringstream msg;
    msg << "tolerance " << tolerance << " gives " << scheme.level_count()
        << " levels, more than the T-string alphabet holds (" << kTStringMaxLevels
        << "); t must exceed " << tstring_tolerance_limit(space);
    fail(ErrorKind::usage, msg.str());
  }
  const LevelMatrix levels = quantize_matrix(means, scheme);

  EntropyReport report;
  report.tolerance = tolerance;
  std::vector<std::int32_t> column(static_cast<std::size_t>(levels.rows()));
  for (Eigen::Index c = 0; c < levels.cols(); ++c) {
    for (Eigen::Index r = 0; r < levels.rows(); ++r) column[static_cast<std::size_t>(r)] = levels(r, c);
    report.per_channel.push_back(marginal_entropy(column));
  }
  report.joint_independent = joint_entropy_independent(report.per_channel);
  report.per_channel_mean = report.joint_independent / static_cast<double>(levels.cols());
  const PluginEstimate plugin = joint_entropy_plugin(levels);
  report.joint_plugin = plugin.bits;
  report.samples = plugin.samples;
  report.distinct = plugin.distinct;
  report.undersampled = plugin.undersampled;
  report.joint_tcomplexity = tcomplexity_joint_entropy(levels);
  return report;
}

std::vector<EntropyReport> entropy_reports(const Eigen::MatrixXd& means, const MetricSpace& space,
                                           std::span<const double> tolerances) {
  std::vector<EntropyReport> out;
  out.reserve(tolerances.size());
  for (double t : tolerances) out.push_back(entropy_report(means, space, t));
  return out;
}

std::vector<ModelComparisonRow> model_vs_empirical(const ChannelModel& model,
                                                   const RssTrace& trace,
                                                   std::span<const double> tolerances,
                                                   std::uint64_t seed) {
  if (model.n() != trace.channels()) {
    fail(ErrorKind::usage, "model and trace channel counts differ");
  }
  const RssTrace synthetic = synthesize_trace(model, trace.positions(),
                                              trace.samples_per_channel(),
                                              split_seed(seed, Stream::synthetic));
  const Eigen::MatrixXd empirical = trace.means(Party::alice);
  const Eigen::MatrixXd simulated = synthetic.means(Party::alice);

  std::vector<ModelComparisonRow> rows;
  for (double t : tolerances) {
    const auto scheme = QuantizationScheme::build(trace.space(), t);
    rows.push_back({t, tcomplexity_joint_entropy(quantize_matrix(empirical, scheme)),
                    tcomplexity_joint_entropy(quantize_matrix(simulated, scheme))});
  }
  return rows;
}

}  // namespace fskey
