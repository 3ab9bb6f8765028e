#include "fskey/channel_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <boost/math/distributions/normal.hpp>

#include "fskey/error.hpp"

namespace fskey {

void ChannelModel::validate() const {
  space.validate();
  const auto dim = mean.size();
  if (dim < 1) fail(ErrorKind::usage, "channel model needs at least one channel");
  if (cov.rows() != dim || cov.cols() != dim) {
    fail(ErrorKind::usage, "covariance must be " + std::to_string(dim) + "x" +
                               std::to_string(dim));
  }
  if (!mean.allFinite() || !cov.allFinite()) fail(ErrorKind::usage, "model has non-finite values");
  if (!std::isfinite(noise_sigma) || noise_sigma < 0.0) {
    fail(ErrorKind::usage, "noise_sigma must be >= 0");
  }
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    fail(ErrorKind::numerical, "covariance is not symmetric");
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
  const double smallest = eig.eigenvalues().minCoeff();
  if (smallest < -1e-9 * scale) {
    fail(ErrorKind::numerical,
         "covariance is not positive semi-definite (eigenvalue " + std::to_string(smallest) + ")");
  }
}

ChannelSampler::ChannelSampler(const ChannelModel& model)
    : model_(model), party_sigma_(model.noise_sigma / std::sqrt(2.0)) {
  model_.validate();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(model_.cov);
  const Eigen::VectorXd roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  root_ = eig.eigenvectors() * roots.asDiagonal();
}

ChannelRealization ChannelSampler::sample(Rng& rng) const {
  const int n = model_.n();
  Eigen::VectorXd z(n);
  ChannelRealization r;

  for (int i = 0; i < n; ++i) z[i] = rng.normal();
  r.c = model_.mean + root_ * z;

  r.x_alice = r.c;
  r.x_bob = r.c;
  for (int i = 0; i < n; ++i) {
    r.x_alice[i] += party_sigma_ * rng.normal();
    r.x_bob[i] += party_sigma_ * rng.normal();
  }

  for (int i = 0; i < n; ++i) z[i] = rng.normal();
  r.x_eve = model_.mean + root_ * z;
  return r;
}

ChannelRealization sample_realization(const ChannelModel& model, std::uint64_t seed) {
  const ChannelSampler sampler(model);
  Rng rng(split_seed(seed, Stream::channel));
  return sampler.sample(rng);
}

void synthesize_samples(double observation, const MetricSpace& space, double jitter_sigma,
                        Rng& rng, std::span<int> out) {
  const std::size_t k = out.size();
  if (k == 0) return;
  const double lo = space.mu_min;
  const double hi = space.mu_max;
  const double x = std::clamp(observation, lo, hi);
  const auto kd = static_cast<double>(k);
  const long target = std::clamp(static_cast<long>(std::floor(kd * x + 0.5)),
                                 static_cast<long>(k) * space.mu_min,
                                 static_cast<long>(k) * space.mu_max);

  std::vector<double> jitter(k);
  for (auto& j : jitter) j = jitter_sigma * rng.normal();
  const double centre = std::accumulate(jitter.begin(), jitter.end(), 0.0) / kd;

  std::vector<double> remainder(k);
  long sum = 0;
  for (std::size_t j = 0; j < k; ++j) {
    const double y = std::clamp(x + jitter[j] - centre, lo, hi);
    const double base = std::floor(y);
    out[j] = static_cast<int>(base);
    remainder[j] = y - base;
    sum += out[j];
  }

  long units = target - sum;
  if (units == 0) return;
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Largest remainders round up first; smallest round down first.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return units > 0 ? remainder[a] > remainder[b] : remainder[a] < remainder[b];
  });
  const int step = units > 0 ? 1 : -1;
  while (units != 0) {
    for (std::size_t idx : order) {
      if (units == 0) break;
      const int next = out[idx] + step;
      if (next < space.mu_min || next > space.mu_max) continue;
      out[idx] = next;
      units -= step;
    }
  }
}

RssTrace::RssTrace(int positions, int n, int k, MetricSpace space)
    : positions_(positions), n_(n), k_(k), space_(space) {
  if (positions < 0 || n < 1 || k < 1) fail(ErrorKind::usage, "invalid trace dimensions");
  data_.assign(static_cast<std::size_t>(positions) * 2 * n * k, 0);
  position_ids.resize(static_cast<std::size_t>(positions));
  std::iota(position_ids.begin(), position_ids.end(), 1);
}

std::size_t RssTrace::offset(int position, Party party, int channel) const {
  const auto p = static_cast<std::size_t>(position);
  const auto side = static_cast<std::size_t>(party == Party::alice ? 0 : 1);
  return ((p * 2 + side) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(channel)) *
         static_cast<std::size_t>(k_);
}

int& RssTrace::at(int position, Party party, int channel, int j) {
  return data_[offset(position, party, channel) + static_cast<std::size_t>(j)];
}

int RssTrace::at(int position, Party party, int channel, int j) const {
  return data_[offset(position, party, channel) + static_cast<std::size_t>(j)];
}

std::span<const int> RssTrace::samples(int position, Party party, int channel) const {
  return std::span<const int>(data_).subspan(offset(position, party, channel),
                                              static_cast<std::size_t>(k_));
}

Eigen::MatrixXd RssTrace::means(Party party) const {
  Eigen::MatrixXd m(positions_, n_);
  for (int p = 0; p < positions_; ++p) {
    for (int i = 0; i < n_; ++i) {
      const auto s = samples(p, party, i);
      const long total = std::accumulate(s.begin(), s.end(), 0L);
      m(p, i) = static_cast<double>(total) / k_;
    }
  }
  return m;
}

RssTrace synthesize_trace(const ChannelModel& model, int positions, int k, std::uint64_t seed,
                          double jitter_sigma) {
  if (k < 1) fail(ErrorKind::usage, "k must be >= 1");
  if (positions < 0) fail(ErrorKind::usage, "positions must be >= 0");
  const ChannelSampler sampler(model);
  RssTrace trace(positions, model.n(), k, model.space);
  std::vector<int> buffer(static_cast<std::size_t>(k));

  for (int p = 0; p < positions; ++p) {
    Rng channel_rng(split_seed(seed, Stream::channel, static_cast<std::uint64_t>(p)));
    Rng sample_rng(split_seed(seed, Stream::samples, static_cast<std::uint64_t>(p)));
    const ChannelRealization r = sampler.sample(channel_rng);
    for (Party party : {Party::alice, Party::bob}) {
      const Eigen::VectorXd& x = party == Party::alice ? r.x_alice : r.x_bob;
      for (int i = 0; i < model.n(); ++i) {
        synthesize_samples(x[i], model.space, jitter_sigma, sample_rng, buffer);
        for (int j = 0; j < k; ++j) trace.at(p, party, i, j) = buffer[static_cast<std::size_t>(j)];
      }
    }
  }
  return trace;
}

double normality_score(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n < 10) fail(ErrorKind::usage, "normality score needs at least 10 samples");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() == sorted.back()) {
    fail(ErrorKind::numerical, "normality score undefined for constant input");
  }

  // Filliben order-statistic medians.
  const auto nd = static_cast<double>(n);
  std::vector<double> medians(n);
  medians[n - 1] = std::pow(0.5, 1.0 / nd);
  medians[0] = 1.0 - medians[n - 1];
  for (std::size_t i = 1; i + 1 < n; ++i) {
    medians[i] = (static_cast<double>(i + 1) - 0.3175) / (nd + 0.365);
  }
  const boost::math::normal standard;
  std::vector<double> quantiles(n);
  for (std::size_t i = 0; i < n; ++i) quantiles[i] = boost::math::quantile(standard, medians[i]);

  const double mx = std::accumulate(sorted.begin(), sorted.end(), 0.0) / nd;
  const double mq = std::accumulate(quantiles.begin(), quantiles.end(), 0.0) / nd;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = sorted[i] - mx;
    const double dq = quantiles[i] - mq;
    sxy += dx * dq;
    sxx += dx * dx;
    syy += dq * dq;
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), 0.0, 1.0);
}

namespace {

NormalityReport assess_normality(const Eigen::MatrixXd& means, std::vector<std::string>& warnings) {
  NormalityReport report;
  const auto rows = means.rows();
  if (rows < 10) {
    warnings.push_back("fewer than 10 positions: normality score skipped");
    return report;
  }
  std::vector<double> pooled;
  pooled.reserve(static_cast<std::size_t>(means.size()));
  double minimum = 1.0;
  for (Eigen::Index i = 0; i < means.cols(); ++i) {
    std::vector<double> column(means.col(i).data(), means.col(i).data() + rows);
    try {
      const double score = normality_score(column);
      report.per_channel.push_back(score);
      minimum = std::min(minimum, score);
    } catch (const Error&) {
      report.per_channel.push_back(std::nan(""));
      warnings.push_back("channel " + std::to_string(i + 1) + " is constant: no normality score");
      continue;
    }
    const double mu = means.col(i).mean();
    const double sd = std::sqrt((means.col(i).array() - mu).square().sum() / (rows - 1));
    for (double v : column) pooled.push_back((v - mu) / sd);
  }
  report.minimum = report.per_channel.empty() ? std::nan("") : minimum;
  report.pooled = pooled.size() >= 10 ? normality_score(pooled) : std::nan("");
  return report;
}

}  // namespace

FitResult fit_model(const RssTrace& trace) {
  const int positions = trace.positions();
  if (positions < 2) {
    fail(ErrorKind::usage, "fitting needs at least 2 positions, trace has " +
                               std::to_string(positions));
  }
  const Eigen::MatrixXd alice = trace.means(Party::alice);
  const Eigen::MatrixXd bob = trace.means(Party::bob);
  const Eigen::MatrixXd centre = 0.5 * (alice + bob);

  FitResult result;
  result.positions = positions;
  ChannelModel& model = result.model;
  model.space = trace.space();
  model.mean = centre.colwise().mean().transpose();

  const Eigen::MatrixXd deviations = centre.rowwise() - model.mean.transpose();
  model.cov = (deviations.transpose() * deviations) / static_cast<double>(positions - 1);
  model.cov = 0.5 * (model.cov + model.cov.transpose());

  const Eigen::MatrixXd diff = alice - bob;
  model.noise_sigma = std::sqrt(diff.squaredNorm() / static_cast<double>(diff.size()));

  if (model.cov.cwiseAbs().maxCoeff() == 0.0) {
    result.warnings.push_back("degenerate trace: all position means equal, covariance is zero");
  }
  if (Eigen::LLT<Eigen::MatrixXd>(model.cov).info() != Eigen::Success) {
    model.cov.diagonal().array() += kCovarianceRidge;
    result.ridge_applied = true;
    result.warnings.push_back("covariance not positive definite: ridge of 1e-9 dB^2 added");
  }
  result.normality = assess_normality(centre, result.warnings);
  return result;
}

double predict_success(std::span<const double> tolerances, double noise_sigma) {
  if (!(noise_sigma >= 0.0)) fail(ErrorKind::usage, "noise sigma must be >= 0");
  double probability = 1.0;
  const boost::math::normal standard;
  for (double t : tolerances) {
    if (!(t > 0.0)) fail(ErrorKind::usage, "tolerances must be positive");
    if (noise_sigma == 0.0 || std::isinf(t)) continue;
    // 2 Phi(z) - 1 = 1 - 2 Phi(-z), kept in the tail for accuracy.
    probability *= 1.0 - 2.0 * boost::math::cdf(standard, -t / noise_sigma);
  }
  return probability;
}

double predict_success(double tolerance, double noise_sigma, int n) {
  const std::vector<double> t(static_cast<std::size_t>(std::max(n, 0)), tolerance);
  return predict_success(t, noise_sigma);
}

}  // namespace fskey
