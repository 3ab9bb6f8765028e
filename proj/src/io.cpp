#include "fskey/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "fskey/error.hpp"

namespace fskey {

std::string format_number(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

std::string format_fixed3(double value) {
  char buf[512];
  const auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::fixed);
  std::string s(buf, res.ptr);
  const auto dot = s.find('.');
  if (dot == std::string::npos) return s + ".000";
  const std::size_t digits = s.size() - dot - 1;
  if (digits < 3) s.append(3 - digits, '0');
  return s;
}

namespace {

std::string_view trim_cr(std::string_view line) {
  while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
  return line;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

long parse_integer(std::string_view field, const char* name, std::size_t line_no) {
  long value = 0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    fail(ErrorKind::data, "line " + std::to_string(line_no) + ": " + name + " '" +
                              std::string(field) + "' is not an integer");
  }
  return value;
}

struct TraceRow {
  long position;
  long channel;
  int party;
  long sample;
  long rss;
};

}  // namespace

void write_trace_csv(std::ostream& out, const RssTrace& trace) {
  out << kTraceHeader << '\n';
  std::string line;
  for (int p = 0; p < trace.positions(); ++p) {
    const int id = trace.position_ids[static_cast<std::size_t>(p)];
    for (int i = 0; i < trace.channels(); ++i) {
      for (Party party : {Party::alice, Party::bob}) {
        const char* name = party == Party::alice ? "alice" : "bob";
        for (int j = 0; j < trace.samples_per_channel(); ++j) {
          line.clear();
          line += std::to_string(id);
          line += ',';
          line += std::to_string(i + 1);
          line += ',';
          line += name;
          line += ',';
          line += std::to_string(j + 1);
          line += ',';
          line += std::to_string(trace.at(p, party, i, j));
          line += '\n';
          out << line;
        }
      }
    }
  }
}

RssTrace read_trace_csv(std::istream& in, const MetricSpace& space) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::data, "trace is empty (missing header)");
  if (trim_cr(line) != kTraceHeader) {
    fail(ErrorKind::data, "trace header must be '" + std::string(kTraceHeader) + "'");
  }

  std::vector<TraceRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim_cr(line);
    if (view.empty()) continue;
    const auto f = split_fields(view);
    if (f.size() != 5) {
      fail(ErrorKind::data, "line " + std::to_string(line_no) + ": expected 5 fields, got " +
                                std::to_string(f.size()));
    }
    TraceRow row{};
    row.position = parse_integer(f[0], "position", line_no);
    row.channel = parse_integer(f[1], "channel", line_no);
    if (f[2] == "alice") {
      row.party = 0;
    } else if (f[2] == "bob") {
      row.party = 1;
    } else {
      fail(ErrorKind::data, "line " + std::to_string(line_no) + ": party must be alice or bob");
    }
    row.sample = parse_integer(f[3], "sample", line_no);
    row.rss = parse_integer(f[4], "rss_dbm", line_no);
    if (row.channel < 1 || row.sample < 1) {
      fail(ErrorKind::data, "line " + std::to_string(line_no) +
                                ": channel and sample indices are 1-based");
    }
    rows.push_back(row);
  }
  if (rows.empty()) fail(ErrorKind::data, "trace has no data rows");

  std::map<long, int> position_index;
  long n = 0;
  long k = 0;
  for (const auto& r : rows) {
    position_index.emplace(r.position, 0);
    n = std::max(n, r.channel);
    k = std::max(k, r.sample);
  }
  int next = 0;
  for (auto& [id, index] : position_index) index = next++;

  const auto positions = static_cast<long>(position_index.size());
  const long expected = positions * 2 * n * k;
  if (static_cast<long>(rows.size()) != expected) {
    fail(ErrorKind::data, "trace has " + std::to_string(rows.size()) + " rows; a complete " +
                              std::to_string(positions) + "x" + std::to_string(n) + "x2x" +
                              std::to_string(k) + " grid needs " + std::to_string(expected));
  }

  RssTrace trace(static_cast<int>(positions), static_cast<int>(n), static_cast<int>(k), space);
  std::vector<char> seen(static_cast<std::size_t>(expected), 0);
  for (const auto& r : rows) {
    const int p = position_index.at(r.position);
    const std::size_t cell =
        ((static_cast<std::size_t>(p) * 2 + static_cast<std::size_t>(r.party)) *
             static_cast<std::size_t>(n) +
         static_cast<std::size_t>(r.channel - 1)) *
            static_cast<std::size_t>(k) +
        static_cast<std::size_t>(r.sample - 1);
    if (seen[cell]) {
      fail(ErrorKind::data, "duplicate sample for position " + std::to_string(r.position) +
                                ", channel " + std::to_string(r.channel) + ", sample " +
                                std::to_string(r.sample));
    }
    seen[cell] = 1;
    trace.at(p, r.party == 0 ? Party::alice : Party::bob, static_cast<int>(r.channel - 1),
             static_cast<int>(r.sample - 1)) = static_cast<int>(r.rss);
  }
  for (const auto& [id, index] : position_index) {
    trace.position_ids[static_cast<std::size_t>(index)] = static_cast<int>(id);
  }
  return trace;
}

Json model_to_json(const ChannelModel& model) {
  Json j;
  j["n"] = model.n();
  j["mean"] = std::vector<double>(model.mean.data(), model.mean.data() + model.mean.size());
  Json cov = Json::array();
  for (Eigen::Index r = 0; r < model.cov.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < model.cov.cols(); ++c) row.push_back(model.cov(r, c));
    cov.push_back(std::move(row));
  }
  j["cov"] = std::move(cov);
  j["noise_sigma"] = model.noise_sigma;
  j["mu_min"] = model.space.mu_min;
  j["mu_max"] = model.space.mu_max;
  return j;
}

namespace {

double number_at(const Json& j, const char* what) {
  if (!j.is_number()) fail(ErrorKind::data, std::string(what) + " must be a number");
  return j.get<double>();
}

}  // namespace

ChannelModel model_from_json(const Json& j) {
  if (!j.is_object()) fail(ErrorKind::data, "model must be a JSON object");
  for (const char* key : {"n", "mean", "cov", "noise_sigma"}) {
    if (!j.contains(key)) fail(ErrorKind::data, std::string("model is missing '") + key + "'");
  }
  if (!j["n"].is_number_integer() || j["n"].get<long>() < 1) {
    fail(ErrorKind::data, "model 'n' must be a positive integer");
  }
  const auto n = j["n"].get<long>();
  const Json& mean = j["mean"];
  const Json& cov = j["cov"];
  if (!mean.is_array() || static_cast<long>(mean.size()) != n) {
    fail(ErrorKind::data, "model 'mean' must have n entries");
  }
  if (!cov.is_array() || static_cast<long>(cov.size()) != n) {
    fail(ErrorKind::data, "model 'cov' must have n rows");
  }
  ChannelModel model;
  model.mean.resize(n);
  model.cov.resize(n, n);
  for (long i = 0; i < n; ++i) {
    model.mean[i] = number_at(mean[static_cast<std::size_t>(i)], "mean entry");
    const Json& row = cov[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<long>(row.size()) != n) {
      fail(ErrorKind::data, "model 'cov' rows must have n entries");
    }
    for (long c = 0; c < n; ++c) {
      model.cov(i, c) = number_at(row[static_cast<std::size_t>(c)], "cov entry");
    }
  }
  model.noise_sigma = number_at(j["noise_sigma"], "noise_sigma");
  if (j.contains("mu_min")) {
    if (!j["mu_min"].is_number_integer()) fail(ErrorKind::data, "mu_min must be an integer");
    model.space.mu_min = j["mu_min"].get<int>();
  }
  if (j.contains("mu_max")) {
    if (!j["mu_max"].is_number_integer()) fail(ErrorKind::data, "mu_max must be an integer");
    model.space.mu_max = j["mu_max"].get<int>();
  }
  model.validate();
  return model;
}

namespace {

Json nan_safe(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace

Json fit_to_json(const FitResult& fit) {
  Json j = model_to_json(fit.model);
  Json report;
  report["positions"] = fit.positions;
  report["ridge_applied"] = fit.ridge_applied;
  report["warnings"] = fit.warnings;
  Json per_channel = Json::array();
  for (double s : fit.normality.per_channel) per_channel.push_back(nan_safe(s));
  report["ppcc_per_channel"] = std::move(per_channel);
  report["ppcc_pooled"] = nan_safe(fit.normality.pooled);
  report["ppcc_minimum"] = nan_safe(fit.normality.minimum);
  j["fit"] = std::move(report);
  return j;
}

std::string bundle_to_wire(const ReconcileBundle& bundle) {
  std::string s = "{\"t\":[";
  for (std::size_t i = 0; i < bundle.tolerances.size(); ++i) {
    if (i > 0) s += ',';
    s += format_fixed3(bundle.tolerances[i]);
  }
  s += "],\"p\":[";
  for (std::size_t i = 0; i < bundle.shifts.size(); ++i) {
    if (i > 0) s += ',';
    s += format_fixed3(bundle.shifts[i]);
  }
  s += "]}";
  return s;
}

ReconcileBundle bundle_from_wire(std::string_view text) {
  const Json j = parse_json(text, "reconcile bundle");
  if (!j.is_object() || !j.contains("t") || !j.contains("p") || !j["t"].is_array() ||
      !j["p"].is_array() || j["t"].size() != j["p"].size()) {
    fail(ErrorKind::data, "reconcile bundle must be {\"t\":[...],\"p\":[...]} of equal length");
  }
  ReconcileBundle bundle;
  for (const auto& v : j["t"]) bundle.tolerances.push_back(number_at(v, "tolerance"));
  for (const auto& v : j["p"]) bundle.shifts.push_back(number_at(v, "shift"));
  return bundle;
}

Json protocol_config_to_json(const ProtocolConfig& config) {
  Json j;
  j["n"] = config.n;
  j["k"] = config.k;
  j["mu_min"] = config.space.mu_min;
  j["mu_max"] = config.space.mu_max;
  j["base_tolerance"] = config.base_tolerance;
  j["tolerance_step"] = config.tolerance_step;
  j["retry_policy"] = std::string(to_string(config.retry_policy));
  j["max_retries"] = config.max_retries;
  j["loss_probability"] = config.loss_probability;
  j["retransmit_cap"] = config.retransmit_cap;
  j["sample_jitter"] = config.sample_jitter;
  return j;
}

namespace {

int int_setting(const Json& j, const char* key) {
  if (!j[key].is_number_integer()) fail(ErrorKind::usage, std::string(key) + " must be an integer");
  return j[key].get<int>();
}

double number_setting(const Json& j, const char* key) {
  if (!j[key].is_number()) fail(ErrorKind::usage, std::string(key) + " must be a number");
  return j[key].get<double>();
}

}  // namespace

void apply_protocol_settings(const Json& j, ProtocolConfig& config) {
  if (j.contains("n")) config.n = int_setting(j, "n");
  if (j.contains("k")) config.k = int_setting(j, "k");
  if (j.contains("mu_min")) config.space.mu_min = int_setting(j, "mu_min");
  if (j.contains("mu_max")) config.space.mu_max = int_setting(j, "mu_max");
  if (j.contains("base_tolerance")) config.base_tolerance = number_setting(j, "base_tolerance");
  if (j.contains("tolerance_step")) config.tolerance_step = number_setting(j, "tolerance_step");
  if (j.contains("retry_policy")) {
    if (!j["retry_policy"].is_string()) fail(ErrorKind::usage, "retry_policy must be a string");
    config.retry_policy = parse_retry_policy(j["retry_policy"].get<std::string>());
  }
  if (j.contains("max_retries")) config.max_retries = int_setting(j, "max_retries");
  if (j.contains("loss_probability")) {
    config.loss_probability = number_setting(j, "loss_probability");
  }
  if (j.contains("retransmit_cap")) config.retransmit_cap = int_setting(j, "retransmit_cap");
  if (j.contains("sample_jitter")) config.sample_jitter = number_setting(j, "sample_jitter");
}

Json transcript_to_json(const Transcript& t) {
  Json j;
  j["seed"] = t.seed;
  j["config"] = protocol_config_to_json(t.config);
  j["outcome"] = std::string(to_string(t.outcome));
  j["retries"] = t.retries;
  j["failure"] = t.failure;
  j["sampling_exchanges"] = t.sampling_exchanges;
  j["max_deviation"] = t.max_deviation;
  j["alice_means"] = t.alice_means;
  j["bob_means"] = t.bob_means;
  Json attempts = Json::array();
  for (const auto& a : t.attempts) {
    Json entry;
    entry["attempt"] = a.attempt;
    entry["bundle"] = parse_json(bundle_to_wire(a.bundle), "reconcile bundle");
    entry["secret_bits"] = a.secret_bits;
    entry["alice_digest"] = to_hex(a.alice_digest);
    entry["bob_digest"] = to_hex(a.bob_digest);
    entry["match"] = a.match;
    attempts.push_back(std::move(entry));
  }
  j["attempts"] = std::move(attempts);
  Json messages = Json::array();
  for (const auto& m : t.messages) {
    Json entry;
    entry["phase"] = std::string(to_string(m.phase));
    entry["from"] = std::string(to_string(m.from));
    entry["kind"] = std::string(to_string(m.kind));
    entry["channel"] = m.channel < 0 ? Json(nullptr) : Json(m.channel + 1);
    entry["attempt"] = m.attempt;
    entry["delivered"] = m.delivered;
    messages.push_back(std::move(entry));
  }
  j["messages"] = std::move(messages);
  return j;
}

void write_batch_csv(std::ostream& out, const BatchSummary& summary) {
  out << kBatchHeader << '\n';
  for (const auto& r : summary.runs) {
    out << r.run + 1 << ',' << to_string(r.outcome) << ',' << r.retries << ',' << r.secret_bits
        << ',' << (r.first_try_success ? 1 : 0) << '\n';
  }
}

void write_entropy_csv(std::ostream& out, const std::vector<EntropyReport>& reports) {
  out << kEntropyHeader << '\n';
  for (const auto& r : reports) {
    out << format_number(r.tolerance) << ',' << format_number(r.per_channel_mean) << ','
        << format_number(r.joint_independent) << ',' << format_number(r.joint_plugin) << ','
        << format_number(r.joint_tcomplexity) << ',' << r.samples << ','
        << (r.undersampled ? 1 : 0) << '\n';
  }
}

Json entropy_report_to_json(const EntropyReport& r) {
  Json j;
  j["tolerance"] = r.tolerance;
  j["per_channel"] = r.per_channel;
  j["per_channel_mean"] = r.per_channel_mean;
  j["joint_independent"] = r.joint_independent;
  j["joint_plugin"] = r.joint_plugin;
  j["joint_tcomplexity"] = r.joint_tcomplexity;
  j["samples"] = r.samples;
  j["distinct"] = r.distinct;
  j["undersampled"] = r.undersampled;
  return j;
}

void write_projection_csv(std::ostream& out, const std::vector<ProjectionRow>& rows) {
  out << kProjectionHeader << '\n';
  for (const auto& r : rows) {
    out << to_string(r.method) << ',' << r.channels << ',' << r.stride << ','
        << format_number(r.mean_bits) << ',' << format_number(r.ci_low) << ','
        << format_number(r.ci_high) << ',' << r.replicates << '\n';
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::data, "cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::data, "cannot write '" + path + "'");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) fail(ErrorKind::data, "failed writing '" + path + "'");
}

Json parse_json(std::string_view text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    fail(ErrorKind::data, what + " is not valid JSON: " + e.what());
  }
}

Json read_json_file(const std::string& path) { return parse_json(read_file(path), "'" + path + "'"); }

}  // namespace fskey
