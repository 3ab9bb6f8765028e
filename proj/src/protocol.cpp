#include "fskey/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <openssl/evp.h>

#include "fskey/error.hpp"
#include "fskey/simd/kernels.hpp"

namespace fskey {

std::string_view to_string(Role role) { return role == Role::alice ? "alice" : "bob"; }

std::string_view to_string(RetryPolicy policy) {
  return policy == RetryPolicy::uniform ? "uniform" : "per_channel";
}

std::string_view to_string(Outcome outcome) {
  return outcome == Outcome::agreed ? "agreed" : "failed";
}

RetryPolicy parse_retry_policy(std::string_view text) {
  if (text == "uniform") return RetryPolicy::uniform;
  if (text == "per_channel") return RetryPolicy::per_channel;
  fail(ErrorKind::usage, "unknown retry policy '" + std::string(text) + "'");
}

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::sampling: return "sampling";
    case Phase::key_generation: return "key_generation";
    case Phase::verification: return "verification";
  }
  return "?";
}

std::string_view to_string(MessageKind kind) {
  switch (kind) {
    case MessageKind::switch_channel: return "switchChannel";
    case MessageKind::sample_channel: return "sampleChannel";
    case MessageKind::bundle: return "bundle";
    case MessageKind::hash: return "hash";
    case MessageKind::success: return "success";
  }
  return "?";
}

void ProtocolConfig::validate() const {
  space.validate();
  if (n < 1) fail(ErrorKind::usage, "n must be >= 1");
  if (k < 1) fail(ErrorKind::usage, "k must be >= 1");
  if (!(base_tolerance > 0.0)) fail(ErrorKind::usage, "base_tolerance must be > 0");
  if (!(tolerance_step >= 0.0)) fail(ErrorKind::usage, "tolerance_step must be >= 0");
  if (max_retries < 0) fail(ErrorKind::usage, "max_retries must be >= 0");
  if (!(loss_probability >= 0.0 && loss_probability < 1.0)) {
    fail(ErrorKind::usage, "loss_probability must be in [0, 1)");
  }
  if (retransmit_cap < 0) fail(ErrorKind::usage, "retransmit_cap must be >= 0");
  if (!(sample_jitter >= 0.0)) fail(ErrorKind::usage, "sample_jitter must be >= 0");
  // Surface an unusable base tolerance before any run starts.
  (void)QuantizationScheme::build(space, base_tolerance);
}

std::span<const int> PartyState::channel_samples(int channel) const {
  return std::span<const int>(samples).subspan(static_cast<std::size_t>(channel) * k,
                                               static_cast<std::size_t>(k));
}

void PartyState::compute_means() {
  means.assign(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    const auto s = channel_samples(i);
    means[static_cast<std::size_t>(i)] =
        static_cast<double>(std::accumulate(s.begin(), s.end(), 0L)) / k;
  }
}

Digest secret_digest(const BitString& secret) {
  std::vector<std::uint8_t> message(8);
  const auto bits = static_cast<std::uint64_t>(secret.size());
  for (int b = 0; b < 8; ++b) message[b] = static_cast<std::uint8_t>(bits >> (56 - 8 * b));
  const auto packed = secret.packed();
  message.insert(message.end(), packed.begin(), packed.end());

  Digest digest{};
  unsigned int length = 0;
  if (EVP_Digest(message.data(), message.size(), digest.data(), &length, EVP_sha256(),
                 nullptr) != 1 ||
      length != digest.size()) {
    fail(ErrorKind::numerical, "SHA-256 computation failed");
  }
  return digest;
}

std::string to_hex(const Digest& digest) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  for (std::uint8_t byte : digest) {
    s.push_back(kDigits[byte >> 4]);
    s.push_back(kDigits[byte & 0x0F]);
  }
  return s;
}

RealizationSource::RealizationSource(const ChannelRealization& realization, int k,
                                     const MetricSpace& space, double jitter_sigma, Rng& rng)
    : k_(k) {
  const auto n = static_cast<std::size_t>(realization.c.size());
  const auto kk = static_cast<std::size_t>(k);
  alice_.resize(n * kk);
  bob_.resize(n * kk);
  for (std::size_t i = 0; i < n; ++i) {
    synthesize_samples(realization.x_alice[static_cast<Eigen::Index>(i)], space, jitter_sigma, rng,
                       std::span(alice_).subspan(i * kk, kk));
    synthesize_samples(realization.x_bob[static_cast<Eigen::Index>(i)], space, jitter_sigma, rng,
                       std::span(bob_).subspan(i * kk, kk));
  }
}

int RealizationSource::sample(Role receiver, int channel, int j) {
  const auto index = static_cast<std::size_t>(channel) * static_cast<std::size_t>(k_) +
                     static_cast<std::size_t>(j);
  return receiver == Role::alice ? alice_[index] : bob_[index];
}

namespace {

// Sends one message with retransmissions; true once delivered.
bool transmit(Phase phase, Role from, MessageKind kind, int channel, const ProtocolConfig& config,
              Rng* loss_rng, std::vector<Message>* log) {
  for (int attempt = 0; attempt <= config.retransmit_cap; ++attempt) {
    const bool delivered = config.loss_probability <= 0.0 || loss_rng == nullptr ||
                           loss_rng->uniform() >= config.loss_probability;
    if (log != nullptr) log->push_back({phase, from, kind, channel, attempt, delivered});
    if (delivered) return true;
  }
  return false;
}

void init_party(PartyState& party, Role role, const ProtocolConfig& config) {
  party.role = role;
  party.n = config.n;
  party.k = config.k;
  party.samples.assign(static_cast<std::size_t>(config.n) * config.k, 0);
  party.means.clear();
  party.error_count = 0;
  party.tolerances.clear();
}

}  // namespace

SamplingResult sampling_phase(PartyState& alice, PartyState& bob, SampleSource& source,
                              const ProtocolConfig& config, Rng* loss_rng,
                              std::vector<Message>* log) {
  init_party(alice, Role::alice, config);
  init_party(bob, Role::bob, config);
  SamplingResult result;

  const auto lost = [&](int channel) {
    result.completed = false;
    result.failure = "message lost on channel " + std::to_string(channel + 1) + " after " +
                     std::to_string(config.retransmit_cap) + " retransmissions";
    return result;
  };

  for (int i = 0; i < config.n; ++i) {
    if (!transmit(Phase::sampling, Role::alice, MessageKind::switch_channel, i, config, loss_rng,
                  log)) {
      return lost(i);
    }
    for (int j = 0; j < config.k; ++j) {
      const auto slot = static_cast<std::size_t>(i) * config.k + static_cast<std::size_t>(j);
      if (!transmit(Phase::sampling, Role::alice, MessageKind::sample_channel, i, config,
                    loss_rng, log)) {
        return lost(i);
      }
      bob.samples[slot] = source.sample(Role::bob, i, j);
      if (!transmit(Phase::sampling, Role::bob, MessageKind::sample_channel, i, config, loss_rng,
                    log)) {
        return lost(i);
      }
      alice.samples[slot] = source.sample(Role::alice, i, j);
      ++result.exchanges;
    }
  }
  alice.compute_means();
  bob.compute_means();
  return result;
}

std::vector<double> choose_tolerances(const PartyState& alice, int error_count,
                                      const ProtocolConfig& config) {
  if (error_count < 0) fail(ErrorKind::usage, "error_count must be >= 0");
  const auto n = static_cast<std::size_t>(alice.n);
  std::vector<double> tolerances(n, config.base_tolerance);

  if (config.retry_policy == RetryPolicy::uniform) {
    for (double& t : tolerances) t += config.tolerance_step * error_count;
    return tolerances;
  }

  std::vector<double> variance(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = alice.channel_samples(static_cast<int>(i));
    if (s.size() < 2) continue;
    const double mean =
        static_cast<double>(std::accumulate(s.begin(), s.end(), 0L)) / static_cast<double>(s.size());
    double ss = 0.0;
    for (int v : s) ss += (v - mean) * (v - mean);
    variance[i] = ss / static_cast<double>(s.size() - 1);
  }
  std::vector<std::size_t> rank(n);
  std::iota(rank.begin(), rank.end(), std::size_t{0});
  std::stable_sort(rank.begin(), rank.end(),
                   [&](std::size_t a, std::size_t b) { return variance[a] > variance[b]; });
  for (int e = 1; e <= error_count; ++e) {
    tolerances[rank[static_cast<std::size_t>(e - 1) % n]] += config.tolerance_step;
  }
  return tolerances;
}

AliceKeyMaterial alice_key_generation(std::span<const double> means,
                                      std::span<const double> tolerances,
                                      const MetricSpace& space) {
  if (means.size() != tolerances.size()) fail(ErrorKind::usage, "means/tolerances size mismatch");
  AliceKeyMaterial out;
  out.bundle.tolerances.assign(tolerances.begin(), tolerances.end());
  for (std::size_t i = 0; i < means.size(); ++i) {
    const auto scheme = QuantizationScheme::build(space, tolerances[i]);
    const TokenizedLevel tok = make_token(scheme, means[i]);
    out.levels.push_back(tok.level);
    out.bundle.shifts.push_back(tok.token.shift);
    out.secret.append(encode_levels(scheme, std::span(&tok.level, 1)));
  }
  return out;
}

BitString bob_key_generation(std::span<const double> means_prime, const ReconcileBundle& bundle,
                             const MetricSpace& space) {
  if (bundle.tolerances.size() != means_prime.size() ||
      bundle.shifts.size() != means_prime.size()) {
    fail(ErrorKind::data, "reconcile bundle does not match the channel count");
  }
  BitString secret;
  for (std::size_t i = 0; i < means_prime.size(); ++i) {
    const auto scheme = QuantizationScheme::build(space, bundle.tolerances[i]);
    const double level = apply_token(scheme, means_prime[i], ReconcileToken{bundle.shifts[i]});
    secret.append(encode_levels(scheme, std::span(&level, 1)));
  }
  return secret;
}

KeyGenerationResult key_generation_phase(const PartyState& alice, const PartyState& bob,
                                         std::span<const double> tolerances,
                                         const MetricSpace& space) {
  AliceKeyMaterial a = alice_key_generation(alice.means, tolerances, space);
  BitString secret_prime = bob_key_generation(bob.means, a.bundle, space);
  return {std::move(a.secret), std::move(secret_prime), std::move(a.bundle)};
}

VerificationResult verification_phase(PartyState& alice, PartyState& bob,
                                      const ProtocolConfig& config, std::vector<Message>* log,
                                      const DigestTamper& tamper) {
  VerificationResult result;
  alice.error_count = 0;
  bob.error_count = 0;

  for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
    alice.tolerances = choose_tolerances(alice, alice.error_count, config);
    AliceKeyMaterial a = alice_key_generation(alice.means, alice.tolerances, config.space);
    if (log != nullptr) {
      log->push_back({Phase::key_generation, Role::alice, MessageKind::bundle, -1, attempt, true});
    }

    bob.tolerances = a.bundle.tolerances;
    BitString secret_prime = bob_key_generation(bob.means, a.bundle, config.space);
    Digest bob_digest = secret_digest(secret_prime);
    if (tamper) tamper(attempt, bob_digest);
    if (log != nullptr) {
      log->push_back({Phase::verification, Role::bob, MessageKind::hash, -1, attempt, true});
    }

    VerificationAttempt record;
    record.attempt = attempt;
    record.tolerances = alice.tolerances;
    record.bundle = a.bundle;
    record.secret_bits = static_cast<int>(a.secret.size());
    record.alice_digest = secret_digest(a.secret);
    record.bob_digest = bob_digest;
    record.match = record.alice_digest == record.bob_digest;
    result.attempts.push_back(std::move(record));
    result.secret = std::move(a.secret);
    result.secret_prime = std::move(secret_prime);

    if (result.attempts.back().match) {
      if (log != nullptr) {
        log->push_back({Phase::verification, Role::alice, MessageKind::success, -1, attempt, true});
      }
      result.outcome = Outcome::agreed;
      result.retries = attempt;
      return result;
    }
    ++alice.error_count;
    ++bob.error_count;
  }
  result.outcome = Outcome::failed;
  result.retries = config.max_retries;
  return result;
}

namespace {

Transcript run_with_sampler(const ChannelSampler& sampler, const ProtocolConfig& config,
                            std::uint64_t seed, const DigestTamper& tamper) {
  Transcript t;
  t.config = config;
  t.seed = seed;

  Rng channel_rng(split_seed(seed, Stream::channel));
  Rng sample_rng(split_seed(seed, Stream::samples));
  Rng loss_rng(split_seed(seed, Stream::loss));

  const ChannelRealization realization = sampler.sample(channel_rng);
  RealizationSource source(realization, config.k, config.space, config.sample_jitter, sample_rng);

  PartyState alice;
  PartyState bob;
  std::vector<Message>* log = config.record_messages ? &t.messages : nullptr;
  const SamplingResult sampled = sampling_phase(alice, bob, source, config, &loss_rng, log);
  t.sampling_exchanges = sampled.exchanges;
  t.alice_samples = alice.samples;
  t.bob_samples = bob.samples;
  if (!sampled.completed) {
    t.outcome = Outcome::failed;
    t.failure = sampled.failure;
    return t;
  }
  t.alice_means = alice.means;
  t.bob_means = bob.means;
  t.max_deviation = simd::max_abs_diff(alice.means, bob.means);

  VerificationResult verified = verification_phase(alice, bob, config, log, tamper);
  t.attempts = std::move(verified.attempts);
  t.retries = verified.retries;
  t.outcome = verified.outcome;
  if (t.outcome == Outcome::failed) {
    t.failure = "hash mismatch after " + std::to_string(config.max_retries) + " retries";
  }
  t.alice_secret = std::move(verified.secret);
  t.bob_secret = std::move(verified.secret_prime);
  return t;
}

ChannelSampler checked_sampler(const ChannelModel& model, const ProtocolConfig& config) {
  config.validate();
  if (model.n() != config.n) {
    fail(ErrorKind::usage, "model has " + std::to_string(model.n()) +
                               " channels but the protocol config uses n=" +
                               std::to_string(config.n));
  }
  return ChannelSampler(model);
}

}  // namespace

Transcript run_protocol(const ChannelModel& model, const ProtocolConfig& config,
                        std::uint64_t seed, const DigestTamper& tamper) {
  return run_with_sampler(checked_sampler(model, config), config, seed, tamper);
}

BatchSummary run_batch(const ChannelModel& model, const ProtocolConfig& config, int runs,
                       std::uint64_t root_seed) {
  if (runs < 1) fail(ErrorKind::usage, "runs must be >= 1");
  const ChannelSampler sampler = checked_sampler(model, config);
  ProtocolConfig quiet = config;
  quiet.record_messages = false;

  BatchSummary summary;
  summary.runs.reserve(static_cast<std::size_t>(runs));
  long first = 0, agreed = 0, retries = 0;
  for (int r = 0; r < runs; ++r) {
    const Transcript t = run_with_sampler(
        sampler, quiet, split_seed(root_seed, Stream::run, static_cast<std::uint64_t>(r)), {});
    BatchRun row;
    row.run = r;
    row.outcome = t.outcome;
    row.retries = t.retries;
    row.secret_bits = static_cast<int>(t.alice_secret.size());
    row.first_try_success = t.first_try_success();
    row.max_deviation = t.max_deviation;
    first += row.first_try_success ? 1 : 0;
    agreed += row.outcome == Outcome::agreed ? 1 : 0;
    retries += row.retries;
    summary.runs.push_back(row);
  }
  summary.first_try_rate = static_cast<double>(first) / runs;
  summary.agreed_rate = static_cast<double>(agreed) / runs;
  summary.mean_retries = static_cast<double>(retries) / runs;
  return summary;
}

}  // namespace fskey
