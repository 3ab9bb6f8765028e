#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "fskey/error.hpp"
#include "fskey/io.hpp"
#include "fskey/protocol.hpp"

using namespace fskey;

namespace {

ChannelModel model_with_sigma(int n, double sigma) {
  ChannelModel m;
  m.mean = Eigen::VectorXd::Constant(n, -72.0);
  m.cov.resize(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) m.cov(a, b) = 36.0 * std::pow(0.8, std::abs(a - b));
  m.noise_sigma = sigma;
  return m;
}

// Serves fixed per-channel samples.
class FixedSource final : public SampleSource {
 public:
  FixedSource(std::vector<std::vector<int>> alice, std::vector<std::vector<int>> bob)
      : alice_(std::move(alice)), bob_(std::move(bob)) {}
  int sample(Role receiver, int channel, int j) override {
    return (receiver == Role::alice ? alice_ : bob_)[channel][j];
  }

 private:
  std::vector<std::vector<int>> alice_;
  std::vector<std::vector<int>> bob_;
};

}  // namespace

TEST_CASE("noise-free run agrees on the first try") {
  ProtocolConfig config;
  const Transcript t = run_protocol(model_with_sigma(16, 0.0), config, 7);
  CHECK(t.outcome == Outcome::agreed);
  CHECK(t.retries == 0);
  CHECK(t.first_try_success());
  CHECK(t.sampling_exchanges == 256);
  CHECK(t.alice_secret.size() == 80);
  CHECK(t.alice_secret == t.bob_secret);
  CHECK(t.max_deviation == 0.0);
  REQUIRE(t.attempts.size() == 1);
  CHECK(t.attempts[0].match);
  CHECK(t.attempts[0].alice_digest == secret_digest(t.alice_secret));
}

TEST_CASE("message log follows the three phases") {
  ProtocolConfig config;
  config.n = 2;
  config.k = 3;
  const Transcript t = run_protocol(model_with_sigma(2, 0.0), config, 3);
  REQUIRE(t.messages.size() == 2 * (1 + 2 * 3) + 3);
  CHECK(t.messages[0].kind == MessageKind::switch_channel);
  CHECK(t.messages[0].from == Role::alice);
  CHECK(t.messages[1].kind == MessageKind::sample_channel);
  CHECK(t.messages[1].from == Role::alice);
  CHECK(t.messages[2].from == Role::bob);
  CHECK(t.messages[7].kind == MessageKind::switch_channel);
  CHECK(t.messages[7].channel == 1);
  CHECK(t.messages[14].kind == MessageKind::bundle);
  CHECK(t.messages[15].kind == MessageKind::hash);
  CHECK(t.messages[15].from == Role::bob);
  CHECK(t.messages[16].kind == MessageKind::success);
}

TEST_CASE("sampling phase averages the exchanged samples") {
  ProtocolConfig config;
  config.n = 2;
  config.k = 4;
  FixedSource source({{-70, -71, -72, -71}, {-50, -50, -50, -51}},
                     {{-71, -71, -72, -70}, {-50, -51, -50, -51}});
  PartyState alice, bob;
  const SamplingResult r = sampling_phase(alice, bob, source, config, nullptr, nullptr);
  CHECK(r.completed);
  CHECK(r.exchanges == 8);
  CHECK(alice.means == std::vector<double>{-71.0, -50.25});
  CHECK(bob.means == std::vector<double>{-71.0, -50.5});
}

TEST_CASE("Bob reconstructs Alice's secret from the bundle alone") {
  const std::vector<double> mu = {-70.9, -55.3, -88.02, -41.0};
  const std::vector<double> mu_prime = {-71.1, -55.9, -87.5, -40.2};
  const std::vector<double> t(4, 1.0);
  const AliceKeyMaterial a = alice_key_generation(mu, t, MetricSpace{});
  CHECK(a.levels == std::vector<double>{-70.0, -56.0, -88.0, -42.0});
  CHECK(bob_key_generation(mu_prime, a.bundle, MetricSpace{}) == a.secret);
  CHECK(a.secret.size() == 20);

  ReconcileBundle broken = a.bundle;
  broken.shifts.pop_back();
  CHECK_THROWS_AS(bob_key_generation(mu_prime, broken, MetricSpace{}), Error);
}

TEST_CASE("secret digest over length prefix and packed bits") {
  CHECK(to_hex(secret_digest(BitString{})) ==
        "af5570f5a1810b7af78caf4bc70a660f0df51e42baf91d4de5b2328de0e83dfc");
  BitString bits;
  bits.append(5, 3);
  CHECK(to_hex(secret_digest(bits)) ==
        "494a55b0c2414e26135318af3b66e5f7326f55b92e9794f0ca211ccedca82eac");
}

TEST_CASE("a flipped hash bit forces a retry") {
  ProtocolConfig config;
  const ChannelModel model = model_with_sigma(16, 0.0);

  const Transcript once = run_protocol(model, config, 5, [](int attempt, Digest& d) {
    if (attempt == 0) d[0] ^= 0x01;
  });
  CHECK(once.outcome == Outcome::agreed);
  CHECK(once.retries == 1);
  REQUIRE(once.attempts.size() == 2);
  CHECK_FALSE(once.attempts[0].match);
  CHECK(once.attempts[1].tolerances == std::vector<double>(16, 1.5));

  const Transcript always = run_protocol(model, config, 5, [](int, Digest& d) { d[31] ^= 0x80; });
  CHECK(always.outcome == Outcome::failed);
  CHECK(always.retries == config.max_retries);
  CHECK(always.attempts.size() == static_cast<std::size_t>(config.max_retries + 1));
  CHECK(always.attempts.back().tolerances.front() == 1.0 + 0.5 * config.max_retries);
}

TEST_CASE("uniform retry policy") {
  ProtocolConfig config;
  config.n = 3;
  PartyState alice;
  alice.n = 3;
  alice.k = 2;
  alice.samples = {0, 0, 0, 0, 0, 0};
  CHECK(choose_tolerances(alice, 0, config) == std::vector<double>{1.0, 1.0, 1.0});
  CHECK(choose_tolerances(alice, 3, config) == std::vector<double>{2.5, 2.5, 2.5});
}

TEST_CASE("per-channel retry policy raises the noisiest channels first") {
  ProtocolConfig config;
  config.n = 4;
  config.retry_policy = RetryPolicy::per_channel;
  PartyState alice;
  alice.n = 4;
  alice.k = 3;
  // Sample variances: ch0 1, ch1 4, ch2 0, ch3 4 -> rank 1, 3, 0, 2.
  alice.samples = {-70, -71, -72, -70, -72, -74, -60, -60, -60, -50, -52, -54};
  CHECK(choose_tolerances(alice, 0, config) == std::vector<double>{1.0, 1.0, 1.0, 1.0});
  CHECK(choose_tolerances(alice, 1, config) == std::vector<double>{1.0, 1.5, 1.0, 1.0});
  CHECK(choose_tolerances(alice, 2, config) == std::vector<double>{1.0, 1.5, 1.0, 1.5});
  CHECK(choose_tolerances(alice, 3, config) == std::vector<double>{1.5, 1.5, 1.0, 1.5});
  CHECK(choose_tolerances(alice, 5, config) == std::vector<double>{1.5, 2.0, 1.5, 1.5});
}

TEST_CASE("lost messages are retransmitted up to the cap") {
  ProtocolConfig config;
  config.loss_probability = 0.05;
  const Transcript t = run_protocol(model_with_sigma(16, 0.3), config, 11);
  CHECK(t.outcome == Outcome::agreed);
  CHECK(t.sampling_exchanges == 256);
  const auto lost = std::count_if(t.messages.begin(), t.messages.end(),
                                  [](const Message& m) { return !m.delivered; });
  CHECK(lost > 0);

  ProtocolConfig harsh = config;
  harsh.loss_probability = 0.9;
  harsh.retransmit_cap = 0;
  const Transcript f = run_protocol(model_with_sigma(16, 0.3), harsh, 11);
  CHECK(f.outcome == Outcome::failed);
  CHECK_FALSE(f.failure.empty());
  CHECK(f.attempts.empty());
}

TEST_CASE("runs are deterministic under the seed") {
  ProtocolConfig config;
  const ChannelModel model = model_with_sigma(16, 0.503);
  const auto a = transcript_to_json(run_protocol(model, config, 99)).dump();
  const auto b = transcript_to_json(run_protocol(model, config, 99)).dump();
  const auto c = transcript_to_json(run_protocol(model, config, 100)).dump();
  CHECK(a == b);
  CHECK(a != c);
}

TEST_CASE("batch success rate tracks the analytic prediction") {
  ProtocolConfig config;
  const BatchSummary s = run_batch(model_with_sigma(16, 0.503), config, 1000, 2);
  CHECK(s.runs.size() == 1000);
  CHECK(s.first_try_rate == doctest::Approx(predict_success(1.0, 0.503, 16)).epsilon(0.12));
  CHECK(s.agreed_rate == 1.0);
  CHECK(s.mean_retries > 0.0);
}

TEST_CASE("configuration errors") {
  ProtocolConfig config;
  config.base_tolerance = 0.0;
  CHECK_THROWS_AS(config.validate(), Error);
  config = ProtocolConfig{};
  config.loss_probability = 1.0;
  CHECK_THROWS_AS(config.validate(), Error);
  config = ProtocolConfig{};
  config.n = 8;
  CHECK_THROWS_AS(run_protocol(model_with_sigma(16, 0.5), config, 1), Error);
  CHECK_THROWS_AS(parse_retry_policy("greedy"), Error);
  CHECK(parse_retry_policy("per_channel") == RetryPolicy::per_channel);
}
