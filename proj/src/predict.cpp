#include "fskey/predict.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "fskey/entropy.hpp"
#include "fskey/error.hpp"
#include "fskey/rng.hpp"

namespace fskey {

std::string_view to_string(ExtrapolationMethod method) {
  return method == ExtrapolationMethod::fixed_determinant ? "fixed_determinant"
                                                          : "diagonal_uniform";
}

ExtrapolationMethod parse_extrapolation_method(std::string_view text) {
  if (text == "fixed_determinant") return ExtrapolationMethod::fixed_determinant;
  if (text == "diagonal_uniform") return ExtrapolationMethod::diagonal_uniform;
  fail(ErrorKind::usage, "unknown extrapolation method '" + std::string(text) + "'");
}

Eigen::MatrixXd thin_for_spacing(const Eigen::MatrixXd& sigma, int stride) {
  if (stride < 1) fail(ErrorKind::usage, "stride must be >= 1");
  if (stride == 1) return sigma;
  const Eigen::Index size = (sigma.rows() + stride - 1) / stride;
  if (size < 2) {
    fail(ErrorKind::usage, "stride " + std::to_string(stride) + " leaves fewer than 2 of " +
                               std::to_string(sigma.rows()) + " channels");
  }
  Eigen::MatrixXd out(size, size);
  for (Eigen::Index a = 0; a < size; ++a) {
    for (Eigen::Index b = 0; b < size; ++b) out(a, b) = sigma(a * stride, b * stride);
  }
  return out;
}

namespace {

struct LagRange {
  double lo;
  double hi;
  double mean;
};

std::vector<LagRange> lag_ranges(const Eigen::MatrixXd& source) {
  const Eigen::Index n = source.rows();
  std::vector<LagRange> ranges;
  for (Eigen::Index lag = 0; lag < n; ++lag) {
    const Eigen::VectorXd d = source.diagonal(lag);
    ranges.push_back({d.minCoeff(), d.maxCoeff(), d.mean()});
  }
  return ranges;
}

void check_source(const Eigen::MatrixXd& source) {
  if (source.rows() < 1 || source.rows() != source.cols()) {
    fail(ErrorKind::usage, "source covariance must be a non-empty square matrix");
  }
  const double scale = std::max(1.0, source.cwiseAbs().maxCoeff());
  if ((source - source.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    fail(ErrorKind::numerical, "source covariance is not symmetric");
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(source, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-9 * scale) {
    fail(ErrorKind::numerical, "source covariance is not positive semi-definite (eigenvalue " +
                                   std::to_string(eig.eigenvalues().minCoeff()) + ")");
  }
}

Eigen::MatrixXd extrapolate_once(const Eigen::MatrixXd& source,
                                 const std::vector<LagRange>& ranges, double decay, int target,
                                 Rng& rng, int& clipped) {
  const int i = static_cast<int>(source.rows());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(target, target);
  out.topLeftCorner(i, i) = source;
  for (int b = 0; b < target; ++b) {
    for (int a = 0; a <= b; ++a) {
      if (b < i) continue;
      const int lag = b - a;
      double lo;
      double hi;
      if (lag < i) {
        lo = ranges[static_cast<std::size_t>(lag)].lo;
        hi = ranges[static_cast<std::size_t>(lag)].hi;
      } else {
        const double factor = std::pow(decay, lag - (i - 1));
        lo = ranges.back().lo * factor;
        hi = ranges.back().hi * factor;
      }
      const double v = rng.uniform(lo, hi);
      out(a, b) = v;
      out(b, a) = v;
    }
  }

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(out);
  Eigen::VectorXd values = eig.eigenvalues();
  clipped = 0;
  for (Eigen::Index j = 0; j < values.size(); ++j) {
    if (values[j] < kEigenvalueFloor) {
      values[j] = kEigenvalueFloor;
      ++clipped;
    }
  }
  if (clipped > 0) {
    out = eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose();
    out = 0.5 * (out + out.transpose()).eval();
  }
  return out;
}

}  // namespace

double lag_decay(const Eigen::MatrixXd& source) {
  const auto ranges = lag_ranges(source);
  if (ranges.size() < 2 || !(ranges[0].mean > 0.0)) return 0.0;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t lag = 1; lag < ranges.size(); ++lag) {
    if (!(ranges[lag].mean > 0.0)) continue;
    const double x = static_cast<double>(lag);
    sxy += x * std::log(ranges[lag].mean / ranges[0].mean);
    sxx += x * x;
  }
  if (sxx == 0.0) return 0.0;
  return std::clamp(std::exp(sxy / sxx), 0.0, 1.0);
}

Extrapolation extrapolate_covariance(const ExtrapolationConfig& config) {
  check_source(config.source);
  const Eigen::MatrixXd source = thin_for_spacing(config.source, config.stride);
  const int i = static_cast<int>(source.rows());
  if (config.target < i) {
    fail(ErrorKind::usage, "target " + std::to_string(config.target) +
                               " is smaller than the source size " + std::to_string(i));
  }

  Extrapolation out;
  if (config.method == ExtrapolationMethod::fixed_determinant) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(config.target, config.target);
    m.topLeftCorner(i, i) = source;
    out.matrices.push_back(std::move(m));
    out.clipped.push_back(0);
    return out;
  }

  if (config.replicates < 1) fail(ErrorKind::usage, "replicates must be >= 1");
  const auto ranges = lag_ranges(source);
  out.decay = lag_decay(source);
  Rng rng(config.seed);
  for (int r = 0; r < config.replicates; ++r) {
    int clipped = 0;
    out.matrices.push_back(extrapolate_once(source, ranges, out.decay, config.target, rng, clipped));
    out.clipped.push_back(clipped);
  }
  return out;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) fail(ErrorKind::usage, "percentile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * std::clamp(q, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

namespace {

struct Summary {
  double mean;
  double lo;
  double hi;
};

Summary summarize(const std::vector<double>& bits) {
  double sum = 0.0;
  for (double b : bits) sum += b;
  return {sum / static_cast<double>(bits.size()), percentile(bits, 0.025), percentile(bits, 0.975)};
}

std::vector<double> replicate_entropies(const Extrapolation& ex) {
  std::vector<double> bits;
  bits.reserve(ex.matrices.size());
  for (const auto& m : ex.matrices) bits.push_back(mvn_differential_entropy(m));
  return bits;
}

}  // namespace

std::vector<ProjectionRow> entropy_projection(const Eigen::MatrixXd& source,
                                              std::span<const int> targets,
                                              std::span<const ExtrapolationMethod> methods,
                                              int stride, int replicates, std::uint64_t seed) {
  check_source(source);
  const Eigen::MatrixXd thinned = thin_for_spacing(source, stride);
  const int n0 = static_cast<int>(thinned.rows());
  if (replicates < 1) fail(ErrorKind::usage, "replicates must be >= 1");
  for (int m : targets) {
    if (m < n0) {
      fail(ErrorKind::usage, "target " + std::to_string(m) + " is smaller than the " +
                                 std::to_string(n0) + "-channel source (stride " +
                                 std::to_string(stride) + ")");
    }
  }

  const double base = mvn_differential_entropy(thinned);
  const double per_channel = 0.5 * std::log2(2.0 * std::numbers::pi * std::numbers::e);
  std::vector<ProjectionRow> rows;
  for (ExtrapolationMethod method : methods) {
    for (int m : targets) {
      ProjectionRow row{method, m, stride, 0.0, 0.0, 0.0, 1};
      if (method == ExtrapolationMethod::fixed_determinant) {
        const double bits = base + (m - n0) * per_channel;
        row.mean_bits = row.ci_low = row.ci_high = bits;
      } else {
        ExtrapolationConfig config{thinned, m, method, 1, replicates,
                                   split_seed(seed, Stream::extrapolation,
                                              static_cast<std::uint64_t>(m))};
        const Summary s = summarize(replicate_entropies(extrapolate_covariance(config)));
        row = {method, m, stride, s.mean, s.lo, s.hi, replicates};
      }
      rows.push_back(row);
    }
  }
  return rows;
}

std::vector<ValidationRow> validate_prediction(const Eigen::MatrixXd& full,
                                               std::span<const int> sizes, int replicates,
                                               std::uint64_t seed) {
  check_source(full);
  const int m = static_cast<int>(full.rows());
  const double truth = mvn_differential_entropy(full);
  std::vector<ValidationRow> rows;
  for (int i : sizes) {
    if (i < 1 || i > m) {
      fail(ErrorKind::usage, "sub-matrix size " + std::to_string(i) + " outside [1, " +
                                 std::to_string(m) + "]");
    }
    ExtrapolationConfig config{full.topLeftCorner(i, i), m, ExtrapolationMethod::diagonal_uniform,
                               1, replicates,
                               split_seed(seed, Stream::extrapolation, static_cast<std::uint64_t>(i))};
    const Summary s = summarize(replicate_entropies(extrapolate_covariance(config)));
    const double slack = 1e-9 * std::max(1.0, std::fabs(truth));
    rows.push_back({i, truth, s.mean, s.lo, s.hi,
                    truth >= s.lo - slack && truth <= s.hi + slack});
  }
  return rows;
}

}  // namespace fskey
