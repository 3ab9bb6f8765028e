#pragma once

// Stochastic model of a reciprocal, frequency-selective channel: a
// multivariate Normal over n per-channel RSS means, independent per-party
// reciprocity noise, and an eavesdropper whose view is an independent draw.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fskey/quantizer.hpp"
#include "fskey/rng.hpp"

namespace fskey {

struct ChannelModel {
  Eigen::VectorXd mean;  // dBm, length n
  Eigen::MatrixXd cov;   // dB^2, n x n, symmetric PSD
  // Std. dev. of the Alice - Bob difference of observed channel means (dB).
  double noise_sigma = 0.0;
  MetricSpace space{};

  int n() const { return static_cast<int>(mean.size()); }

  // Shape, symmetry, PSD and sigma checks. Throws Error(usage) for shape or
  // parameter errors and Error(numerical) for a non-PSD covariance.
  void validate() const;
};

struct ChannelRealization {
  Eigen::VectorXd c;        // true channel state
  Eigen::VectorXd x_alice;  // c + e_A
  Eigen::VectorXd x_bob;    // c + e_B
  Eigen::VectorXd x_eve;    // independent draw from the same distribution
};

// Draws realizations from a validated model. The covariance square root is
// computed once: cov = V diag(l) V^T, root = V diag(sqrt(max(l, 0))).
// Each party gets N(0, noise_sigma^2 / 2) noise per channel so that
// x_alice - x_bob ~ N(0, noise_sigma^2).
class ChannelSampler {
 public:
  explicit ChannelSampler(const ChannelModel& model);

  const ChannelModel& model() const { return model_; }
  ChannelRealization sample(Rng& rng) const;

 private:
  ChannelModel model_;
  Eigen::MatrixXd root_;
  double party_sigma_;
};

ChannelRealization sample_realization(const ChannelModel& model, std::uint64_t seed);

// Integer RSS samples for one party on one channel. Samples are
// round(x + jitter_j) with Normal jitter centred across the k samples and the
// rounding residue apportioned by largest remainder, so the k-sample sum is
// exactly round(k * x) (clamped to the metric space). The mean therefore
// tracks x to within 1/(2k) dB.
void synthesize_samples(double observation, const MetricSpace& space, double jitter_sigma,
                        Rng& rng, std::span<int> out);

enum class Party { alice, bob };

// Dense RSS trace, sample(position, party, channel, j). Positions are
// 0-based internally; `position_ids` keeps the identifiers used on disk.
class RssTrace {
 public:
  RssTrace() = default;
  RssTrace(int positions, int n, int k, MetricSpace space = {});

  int positions() const { return positions_; }
  int channels() const { return n_; }
  int samples_per_channel() const { return k_; }
  const MetricSpace& space() const { return space_; }

  int& at(int position, Party party, int channel, int j);
  int at(int position, Party party, int channel, int j) const;

  std::span<const int> samples(int position, Party party, int channel) const;

  // positions x n matrix of per-party channel means.
  Eigen::MatrixXd means(Party party) const;

  std::vector<int> position_ids;

 private:
  std::size_t offset(int position, Party party, int channel) const;

  int positions_ = 0;
  int n_ = 0;
  int k_ = 0;
  MetricSpace space_{};
  std::vector<int> data_;
};

inline constexpr double kDefaultSampleJitter = 0.5;

// Per position: one realization, then k integer samples per channel and party.
RssTrace synthesize_trace(const ChannelModel& model, int positions, int k, std::uint64_t seed,
                          double jitter_sigma = kDefaultSampleJitter);

struct NormalityReport {
  std::vector<double> per_channel;  // PPCC of each channel's position means
  double pooled = 0.0;              // PPCC of per-channel standardized means, pooled
  double minimum = 0.0;
};

struct FitResult {
  ChannelModel model;
  int positions = 0;
  bool ridge_applied = false;
  std::vector<std::string> warnings;
  NormalityReport normality;
};

inline constexpr double kCovarianceRidge = 1e-9;

// Mean: average of per-position channel means (both parties averaged).
// Covariance: 1/(P-1) sum_j (m_j - mean)(m_j - mean)^T over position means.
// noise_sigma: sqrt(mean of squared Alice - Bob mean differences) (zero-mean).
// A covariance that is not positive definite gets kCovarianceRidge added to
// its diagonal (flagged). Throws Error(usage) for fewer than 2 positions.
FitResult fit_model(const RssTrace& trace);

// Probability plot correlation coefficient against Normal order-statistic
// medians (Filliben plotting positions). Throws Error(usage) for fewer than
// 10 samples and Error(numerical) for constant input.
double normality_score(std::span<const double> samples);

// prod_i (2 Phi(t_i / sigma) - 1): the probability that every channel's
// deviation stays inside its tolerance. sigma == 0 gives 1.
double predict_success(std::span<const double> tolerances, double noise_sigma);
double predict_success(double tolerance, double noise_sigma, int n);

}  // namespace fskey
