#pragma once

// Three-phase key agreement between Alice and Bob:
//   1. sampling: k RSS exchanges on each of n channels, averaged to means;
//   2. key generation: Alice quantizes and publishes (T, P); Bob applies P;
//   3. verification: Bob sends h(secret'), Alice compares and either
//      confirms or retries phase 2 with larger tolerances on the same means.

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fskey/bitstring.hpp"
#include "fskey/channel_model.hpp"
#include "fskey/quantizer.hpp"

namespace fskey {

enum class Role { alice, bob };
enum class RetryPolicy { uniform, per_channel };
enum class Outcome { agreed, failed };

std::string_view to_string(Role role);
std::string_view to_string(RetryPolicy policy);
std::string_view to_string(Outcome outcome);
RetryPolicy parse_retry_policy(std::string_view text);

struct ProtocolConfig {
  int n = 16;
  int k = 16;
  MetricSpace space{};
  double base_tolerance = 1.0;
  double tolerance_step = 0.5;
  RetryPolicy retry_policy = RetryPolicy::uniform;
  int max_retries = 8;
  double loss_probability = 0.0;
  int retransmit_cap = 3;
  double sample_jitter = kDefaultSampleJitter;
  bool record_messages = true;

  void validate() const;
};

// Public vectors sent Alice -> Bob: tolerances T and shift tokens P.
struct ReconcileBundle {
  std::vector<double> tolerances;
  std::vector<double> shifts;
};

struct PartyState {
  Role role = Role::alice;
  int n = 0;
  int k = 0;
  std::vector<int> samples;  // n x k, channel-major
  std::vector<double> means;
  int error_count = 0;
  std::vector<double> tolerances;

  std::span<const int> channel_samples(int channel) const;
  // mu_i = (1/k) sum_j m_i^(j), from the stored samples.
  void compute_means();
};

using Digest = std::array<std::uint8_t, 32>;

// SHA-256 over (64-bit big-endian bit count || packed bits).
Digest secret_digest(const BitString& secret);
std::string to_hex(const Digest& digest);

enum class Phase { sampling, key_generation, verification };
enum class MessageKind { switch_channel, sample_channel, bundle, hash, success };

std::string_view to_string(Phase phase);
std::string_view to_string(MessageKind kind);

struct Message {
  Phase phase;
  Role from;
  MessageKind kind;
  int channel;      // -1 when not channel-specific
  int attempt;      // transmission attempt (sampling) or verification round
  bool delivered;
};

// Per-sample RSS source for the sampling phase.
class SampleSource {
 public:
  virtual ~SampleSource() = default;
  // RSS that `receiver` measures for exchange j on `channel`.
  virtual int sample(Role receiver, int channel, int j) = 0;
};

// Serves integer samples synthesized from one channel realization.
class RealizationSource final : public SampleSource {
 public:
  RealizationSource(const ChannelRealization& realization, int k, const MetricSpace& space,
                    double jitter_sigma, Rng& rng);
  int sample(Role receiver, int channel, int j) override;

 private:
  int k_;
  std::vector<int> alice_;
  std::vector<int> bob_;
};

struct SamplingResult {
  bool completed = true;
  std::string failure;
  int exchanges = 0;  // completed sampleChannel round trips
};

// Alice initiates each exchange; each side records the RSS of the message it
// receives. A lost message is retransmitted up to `retransmit_cap` times;
// after that the run aborts. `loss_rng` may be null when loss_probability==0.
SamplingResult sampling_phase(PartyState& alice, PartyState& bob, SampleSource& source,
                              const ProtocolConfig& config, Rng* loss_rng,
                              std::vector<Message>* log);

// Tolerances for the given verification error count.
// uniform:     t_i = base + step * error_count for every channel.
// per_channel: channels are ranked by descending sample variance (ties by
//              index); retry e bumps channel rank[(e - 1) mod n] by `step`,
//              so after e retries the first e ranked channels are raised.
std::vector<double> choose_tolerances(const PartyState& alice, int error_count,
                                      const ProtocolConfig& config);

struct AliceKeyMaterial {
  BitString secret;
  ReconcileBundle bundle;
  std::vector<double> levels;
};

// Alice: q_i = q_{t_i}(mu_i), P_i = q_i - mu_i, secret = bin(q_1) || ... || bin(q_n)
// in ascending channel order.
AliceKeyMaterial alice_key_generation(std::span<const double> means,
                                      std::span<const double> tolerances,
                                      const MetricSpace& space);

// Bob: q'_i = q_{t_i}(mu'_i + P_i). Uses only the bundle and his own means.
BitString bob_key_generation(std::span<const double> means_prime, const ReconcileBundle& bundle,
                             const MetricSpace& space);

struct KeyGenerationResult {
  BitString secret;
  BitString secret_prime;
  ReconcileBundle bundle;
};

KeyGenerationResult key_generation_phase(const PartyState& alice, const PartyState& bob,
                                         std::span<const double> tolerances,
                                         const MetricSpace& space);

struct VerificationAttempt {
  int attempt = 0;
  std::vector<double> tolerances;
  ReconcileBundle bundle;
  int secret_bits = 0;
  Digest alice_digest{};
  Digest bob_digest{};
  bool match = false;
};

struct VerificationResult {
  Outcome outcome = Outcome::failed;
  int retries = 0;
  std::vector<VerificationAttempt> attempts;
  BitString secret;
  BitString secret_prime;
};

// Hook that may rewrite Bob's digest in flight (attempt index, digest).
using DigestTamper = std::function<void(int, Digest&)>;

// Runs key generation and hash comparison, escalating tolerances on the same
// means until the digests match or max_retries retries have failed.
VerificationResult verification_phase(PartyState& alice, PartyState& bob,
                                      const ProtocolConfig& config, std::vector<Message>* log,
                                      const DigestTamper& tamper = {});

struct Transcript {
  ProtocolConfig config;
  std::uint64_t seed = 0;
  std::vector<Message> messages;
  int sampling_exchanges = 0;
  std::vector<int> alice_samples;
  std::vector<int> bob_samples;
  std::vector<double> alice_means;
  std::vector<double> bob_means;
  std::vector<VerificationAttempt> attempts;
  int retries = 0;
  Outcome outcome = Outcome::failed;
  std::string failure;
  BitString alice_secret;  // for harness inspection only
  BitString bob_secret;
  double max_deviation = 0.0;  // max_i |mu_i - mu'_i|

  bool first_try_success() const { return outcome == Outcome::agreed && retries == 0; }
};

// One end-to-end run over a fresh realization. All randomness derives from
// `seed` (channel, sample and loss streams), so equal inputs give equal
// transcripts.
Transcript run_protocol(const ChannelModel& model, const ProtocolConfig& config,
                        std::uint64_t seed, const DigestTamper& tamper = {});

struct BatchRun {
  int run = 0;
  Outcome outcome = Outcome::failed;
  int retries = 0;
  int secret_bits = 0;
  bool first_try_success = false;
  double max_deviation = 0.0;
};

struct BatchSummary {
  std::vector<BatchRun> runs;
  double first_try_rate = 0.0;
  double agreed_rate = 0.0;
  double mean_retries = 0.0;
};

// Run r uses seed split_seed(root_seed, Stream::run, r).
BatchSummary run_batch(const ChannelModel& model, const ProtocolConfig& config, int runs,
                       std::uint64_t root_seed);

}  // namespace fskey
