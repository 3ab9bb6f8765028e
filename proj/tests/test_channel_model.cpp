#include "doctest.h"

#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "fskey/channel_model.hpp"
#include "fskey/error.hpp"

using namespace fskey;

namespace {

ChannelModel toeplitz_model(int n, double variance, double rho, double sigma) {
  ChannelModel m;
  m.mean = Eigen::VectorXd::Constant(n, -72.0);
  m.cov.resize(n, n);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) m.cov(a, b) = variance * std::pow(rho, std::abs(a - b));
  }
  m.noise_sigma = sigma;
  return m;
}

// P(|X| < t) for X ~ N(0, sigma^2) by composite Simpson integration.
double inside_probability(double t, double sigma) {
  const int steps = 20000;
  const double h = 2.0 * t / steps;
  const auto density = [&](double x) {
    return std::exp(-0.5 * x * x / (sigma * sigma)) / (sigma * std::sqrt(2.0 * std::numbers::pi));
  };
  double sum = density(-t) + density(t);
  for (int i = 1; i < steps; ++i) sum += density(-t + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

// Standard normal quantile by bisection on the erfc-based CDF.
double normal_quantile(double p) {
  double lo = -10.0, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

double ppcc_oracle(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  std::vector<double> m(n);
  m[n - 1] = std::pow(0.5, 1.0 / n);
  m[0] = 1.0 - m[n - 1];
  for (std::size_t i = 2; i < n; ++i) m[i - 1] = (i - 0.3175) / (n + 0.365);
  std::vector<double> q(n);
  for (std::size_t i = 0; i < n; ++i) q[i] = normal_quantile(m[i]);
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double mq = std::accumulate(q.begin(), q.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (q[i] - mq);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (q[i] - mq) * (q[i] - mq);
  }
  return sxy / std::sqrt(sxx * syy);
}

ErrorKind kind_of(const ChannelModel& m) {
  try {
    m.validate();
  } catch (const Error& e) {
    return e.kind();
  }
  return static_cast<ErrorKind>(0);
}

}  // namespace

TEST_CASE("model validation") {
  ChannelModel ok = toeplitz_model(3, 4.0, 0.5, 0.5);
  CHECK_NOTHROW(ok.validate());

  ChannelModel asym = ok;
  asym.cov(0, 1) += 0.5;
  CHECK(kind_of(asym) == ErrorKind::numerical);

  ChannelModel indefinite = ok;
  indefinite.cov << 1, 2, 0, 2, 1, 0, 0, 0, 1;
  CHECK(kind_of(indefinite) == ErrorKind::numerical);

  ChannelModel shape = ok;
  shape.cov.resize(2, 2);
  shape.cov.setIdentity();
  CHECK(kind_of(shape) == ErrorKind::usage);

  ChannelModel sigma = ok;
  sigma.noise_sigma = -1.0;
  CHECK(kind_of(sigma) == ErrorKind::usage);

  ChannelModel zero = ok;
  zero.cov.setZero();
  CHECK_NOTHROW(zero.validate());
}

TEST_CASE("sampler moments") {
  const ChannelModel model = toeplitz_model(3, 9.0, 0.6, 0.8);
  const ChannelSampler sampler(model);
  Rng rng(17);
  const int draws = 40000;
  Eigen::MatrixXd c(draws, 3), diff(draws, 3), eve(draws, 3);
  for (int i = 0; i < draws; ++i) {
    const auto r = sampler.sample(rng);
    c.row(i) = r.c.transpose();
    diff.row(i) = (r.x_alice - r.x_bob).transpose();
    eve.row(i) = r.x_eve.transpose();
  }
  const Eigen::RowVectorXd mean = c.colwise().mean();
  const Eigen::MatrixXd centred = c.rowwise() - mean;
  const Eigen::MatrixXd cov = centred.transpose() * centred / (draws - 1);
  for (int i = 0; i < 3; ++i) {
    CHECK(mean[i] == doctest::Approx(-72.0).epsilon(0.002));
    for (int j = 0; j < 3; ++j) CHECK(cov(i, j) == doctest::Approx(model.cov(i, j)).epsilon(0.05));
  }
  const double diff_var = diff.squaredNorm() / diff.size();
  CHECK(std::sqrt(diff_var) == doctest::Approx(0.8).epsilon(0.02));

  const Eigen::MatrixXd eve_centred = eve.rowwise() - eve.colwise().mean();
  const double cross = (centred.col(0).array() * eve_centred.col(0).array()).mean();
  CHECK(std::fabs(cross / 9.0) < 0.03);
}

TEST_CASE("zero noise gives identical party observations") {
  const ChannelModel model = toeplitz_model(4, 9.0, 0.6, 0.0);
  const auto r = sample_realization(model, 99);
  CHECK(r.x_alice == r.x_bob);
  CHECK(r.x_alice == r.c);
}

TEST_CASE("synthesized samples pin the sum") {
  Rng rng(8);
  std::vector<int> out(16);
  for (int i = 0; i < 2000; ++i) {
    const double x = rng.uniform(-110.0, -35.0);
    synthesize_samples(x, MetricSpace{}, 0.5, rng, out);
    const long sum = std::accumulate(out.begin(), out.end(), 0L);
    const double clamped = std::clamp(x, -104.0, -40.0);
    CHECK(sum == static_cast<long>(std::floor(16 * clamped + 0.5)));
    for (int v : out) {
      CHECK(v >= -104);
      CHECK(v <= -40);
    }
  }
  synthesize_samples(-70.25, MetricSpace{}, 0.0, rng, out);
  CHECK(std::accumulate(out.begin(), out.end(), 0L) == -1124);
  CHECK(*std::max_element(out.begin(), out.end()) - *std::min_element(out.begin(), out.end()) <= 1);
}

TEST_CASE("trace synthesis is deterministic under the seed") {
  const ChannelModel model = toeplitz_model(4, 25.0, 0.7, 0.5);
  const RssTrace a = synthesize_trace(model, 20, 8, 123);
  const RssTrace b = synthesize_trace(model, 20, 8, 123);
  const RssTrace c = synthesize_trace(model, 20, 8, 124);
  CHECK(a.means(Party::alice) == b.means(Party::alice));
  CHECK(a.means(Party::bob) == b.means(Party::bob));
  CHECK(a.means(Party::alice) != c.means(Party::alice));
  CHECK(a.positions() == 20);
  CHECK(a.position_ids.front() == 1);
  CHECK(a.position_ids.back() == 20);
}

TEST_CASE("fit recovers the generating model") {
  const ChannelModel model = toeplitz_model(6, 36.0, 0.8, 0.503);
  const RssTrace trace = synthesize_trace(model, 3000, 16, 42);
  const FitResult fit = fit_model(trace);
  CHECK(fit.positions == 3000);
  CHECK_FALSE(fit.ridge_applied);
  CHECK(fit.model.noise_sigma == doctest::Approx(0.503).epsilon(0.05));
  for (int a = 0; a < 6; ++a) {
    CHECK(fit.model.mean[a] == doctest::Approx(-72.0).epsilon(0.01));
    for (int b = 0; b < 6; ++b) {
      CHECK(fit.model.cov(a, b) == doctest::Approx(model.cov(a, b)).epsilon(0.1));
    }
  }
  CHECK(fit.normality.minimum >= 0.99);
  CHECK(fit.normality.pooled >= 0.99);
}

TEST_CASE("constant trace fits a zero covariance with warnings") {
  RssTrace trace(12, 3, 4);
  for (int p = 0; p < 12; ++p)
    for (Party party : {Party::alice, Party::bob})
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j) trace.at(p, party, i, j) = -70;
  const FitResult fit = fit_model(trace);
  CHECK(fit.model.noise_sigma == 0.0);
  CHECK(fit.ridge_applied);
  CHECK(fit.model.cov(0, 0) == doctest::Approx(kCovarianceRidge));
  CHECK(fit.model.cov(0, 1) == 0.0);
  CHECK(fit.warnings.size() >= 2);
}

TEST_CASE("fit needs two positions") {
  RssTrace trace(1, 2, 2);
  CHECK_THROWS_AS(fit_model(trace), Error);
}

TEST_CASE("normality score against an independent PPCC oracle") {
  Rng rng(1);
  std::vector<double> gauss(500), expo(500);
  for (auto& v : gauss) v = rng.normal();
  for (auto& v : expo) v = -std::log(1.0 - rng.uniform());
  CHECK(normality_score(gauss) == doctest::Approx(ppcc_oracle(gauss)).epsilon(1e-9));
  CHECK(normality_score(expo) == doctest::Approx(ppcc_oracle(expo)).epsilon(1e-9));
  CHECK(normality_score(gauss) >= 0.99);
  CHECK(normality_score(expo) < 0.97);

  CHECK_THROWS_AS(normality_score(std::vector<double>(5, 1.0)), Error);
  CHECK_THROWS_AS(normality_score(std::vector<double>(20, 1.0)), Error);
}

TEST_CASE("predict_success matches numerical integration") {
  const double oracle = std::pow(inside_probability(1.0, 0.503), 16);
  CHECK(predict_success(1.0, 0.503, 16) == doctest::Approx(oracle).epsilon(1e-9));
  CHECK(predict_success(1.0, 0.503, 16) == doctest::Approx(0.4644265284533829).epsilon(1e-12));

  const std::vector<double> mixed = {0.5, 1.0, 2.0};
  const double mixed_oracle = inside_probability(0.5, 0.7) * inside_probability(1.0, 0.7) *
                              inside_probability(2.0, 0.7);
  CHECK(predict_success(mixed, 0.7) == doctest::Approx(mixed_oracle).epsilon(1e-9));

  CHECK(predict_success(1.0, 0.0, 16) == 1.0);
  CHECK(predict_success(1.0, 0.5, 16) < predict_success(1.5, 0.5, 16));
  CHECK(predict_success(1.0, 0.6, 16) < predict_success(1.0, 0.5, 16));
  CHECK_THROWS_AS(predict_success(0.0, 0.5, 4), Error);
}
