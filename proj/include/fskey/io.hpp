#pragma once

// File formats: RSS trace CSV, model / bundle / transcript JSON, and the
// CSV tables written by the command-line tool.

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "fskey/channel_model.hpp"
#include "fskey/entropy.hpp"
#include "fskey/predict.hpp"
#include "fskey/protocol.hpp"

namespace fskey {

using Json = nlohmann::ordered_json;

// Shortest decimal form that round-trips.
std::string format_number(double value);
// Shortest round-trip fixed notation with at least three fraction digits.
std::string format_fixed3(double value);

// position,channel,party,sample,rss_dbm with 1-based channel and sample,
// party "alice" or "bob". Rows are ordered by position, channel, party,
// sample.
inline constexpr std::string_view kTraceHeader = "position,channel,party,sample,rss_dbm";
void write_trace_csv(std::ostream& out, const RssTrace& trace);
// Rows may come in any order but must fill a complete
// positions x channels x parties x samples grid. Schema violations throw
// Error(data).
RssTrace read_trace_csv(std::istream& in, const MetricSpace& space = {});

// {"n", "mean", "cov", "noise_sigma", "mu_min", "mu_max"}. Unknown keys are
// ignored when reading; mu_min / mu_max default to the standard space.
Json model_to_json(const ChannelModel& model);
ChannelModel model_from_json(const Json& j);

Json fit_to_json(const FitResult& fit);

// Wire form of the public reconcile bundle: {"t":[...],"p":[...]}.
std::string bundle_to_wire(const ReconcileBundle& bundle);
ReconcileBundle bundle_from_wire(std::string_view text);

Json protocol_config_to_json(const ProtocolConfig& config);
// Overrides fields of `config` with any protocol keys present in `j`.
// Wrong types or values throw Error(usage).
void apply_protocol_settings(const Json& j, ProtocolConfig& config);

Json transcript_to_json(const Transcript& transcript);

inline constexpr std::string_view kBatchHeader = "run,outcome,retries,secret_bits,first_try_success";
void write_batch_csv(std::ostream& out, const BatchSummary& summary);

inline constexpr std::string_view kEntropyHeader =
    "tolerance,per_channel_mean,joint_independent,joint_plugin,joint_tcomplexity,samples,"
    "undersampled_flag";
void write_entropy_csv(std::ostream& out, const std::vector<EntropyReport>& reports);
Json entropy_report_to_json(const EntropyReport& report);

inline constexpr std::string_view kProjectionHeader =
    "method,channels,stride,entropy_mean_bits,ci_low,ci_high,replicates";
void write_projection_csv(std::ostream& out, const std::vector<ProjectionRow>& rows);

// Whole-file helpers. A missing or unreadable file throws Error(data).
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);
Json read_json_file(const std::string& path);
Json parse_json(std::string_view text, const std::string& what);

}  // namespace fskey
