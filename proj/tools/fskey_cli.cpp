// fskey: trace synthesis, protocol Monte-Carlo, model fitting, entropy
// analysis and secrecy-scaling projections.
//
// Settings resolve as command-line flag > --config JSON file > default. The
// resolved settings are echoed into every output: JSON outputs carry a
// "config" member, CSV outputs get a <out>.config.json sidecar.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fskey/channel_model.hpp"
#include "fskey/entropy.hpp"
#include "fskey/error.hpp"
#include "fskey/io.hpp"
#include "fskey/predict.hpp"
#include "fskey/protocol.hpp"

using namespace fskey;

namespace {

enum class Kind { integer, seed, number, text, numbers, integers, texts };

struct Setting {
  std::string key;
  Kind kind;
  std::string raw;
  CLI::Option* option = nullptr;
};

std::string flag_name(const std::string& key) {
  std::string name = "--" + key;
  std::replace(name.begin(), name.end(), '_', '-');
  return name;
}

std::vector<std::string> split_list(const std::string& raw) {
  std::vector<std::string> items;
  std::stringstream stream(raw);
  std::string item;
  while (std::getline(stream, item, ',')) {
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

template <typename T>
T parse_exact(const std::string& text, const std::string& key) {
  T value{};
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    fail(ErrorKind::usage, flag_name(key) + ": cannot parse '" + text + "'");
  }
  return value;
}

Json parse_setting(const Setting& s) {
  switch (s.kind) {
    case Kind::integer: return parse_exact<long>(s.raw, s.key);
    case Kind::seed: return parse_exact<std::uint64_t>(s.raw, s.key);
    case Kind::number: return parse_exact<double>(s.raw, s.key);
    case Kind::text: return s.raw;
    case Kind::numbers: {
      Json list = Json::array();
      for (const auto& item : split_list(s.raw)) list.push_back(parse_exact<double>(item, s.key));
      return list;
    }
    case Kind::integers: {
      Json list = Json::array();
      for (const auto& item : split_list(s.raw)) list.push_back(parse_exact<long>(item, s.key));
      return list;
    }
    case Kind::texts: return split_list(s.raw);
  }
  return nullptr;
}

// Every key any subcommand understands; config files may mix them.
const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "seed", "model", "trace", "positions", "k", "n", "mu_min", "mu_max", "runs",
      "base_tolerance", "tolerance_step", "retry_policy", "max_retries", "loss_probability",
      "retransmit_cap", "sample_jitter", "noise_sigma", "tolerances", "targets", "methods",
      "strides", "replicates", "transcript"};
  return keys;
}

class Command {
 public:
  Command(CLI::App& parent, const std::string& name, const std::string& description,
          std::string default_format)
      : name_(name), format_(std::move(default_format)) {
    app_ = parent.add_subcommand(name, description);
    app_->add_option("--seed", seed_raw_, "Root seed (u64)");
    app_->add_option("--config", config_path_, "JSON settings file");
    app_->add_option("--out", out_, "Output path")->required();
    app_->add_option("--format", format_, "Output format")
        ->check(CLI::IsMember({"csv", "json"}));
    defaults_["seed"] = std::uint64_t{1};
  }

  CLI::App* app() const { return app_; }
  const std::string& name() const { return name_; }
  const std::string& out() const { return out_; }
  const std::string& format() const { return format_; }
  bool format_given() const { return app_->get_option("--format")->count() > 0; }

  void add(const std::string& key, Kind kind, const std::string& help, Json fallback = nullptr) {
    auto s = std::make_unique<Setting>();
    s->key = key;
    s->kind = kind;
    s->option = app_->add_option(flag_name(key), s->raw, help);
    if (!fallback.is_null()) defaults_[key] = std::move(fallback);
    settings_.push_back(std::move(s));
  }

  // Resolves flag > config > default into one JSON object.
  Json resolve() const {
    Json merged = defaults_;
    if (!config_path_.empty()) {
      const Json file = read_json_file(config_path_);
      if (!file.is_object()) fail(ErrorKind::usage, "config file must hold a JSON object");
      for (const auto& [key, value] : file.items()) {
        if (!known_keys().count(key)) {
          fail(ErrorKind::usage, "unknown config key '" + key + "'");
        }
        if (key == "seed" || owns(key)) merged[key] = value;
      }
    }
    if (!seed_raw_.empty()) merged["seed"] = parse_exact<std::uint64_t>(seed_raw_, "seed");
    for (const auto& s : settings_) {
      if (s->option->count() > 0) merged[s->key] = parse_setting(*s);
    }
    Json ordered;
    ordered["command"] = name_;
    ordered["format"] = format_;
    for (const auto& [key, value] : merged.items()) ordered[key] = value;
    return ordered;
  }

 private:
  bool owns(const std::string& key) const {
    return std::any_of(settings_.begin(), settings_.end(),
                       [&](const auto& s) { return s->key == key; });
  }

  std::string name_;
  CLI::App* app_ = nullptr;
  std::string seed_raw_;
  std::string config_path_;
  std::string out_;
  std::string format_;
  Json defaults_ = Json::object();
  std::vector<std::unique_ptr<Setting>> settings_;
};

// Typed access to resolved settings; wrong types are usage errors.
bool has(const Json& s, const char* key) { return s.contains(key) && !s[key].is_null(); }

const Json& need(const Json& s, const char* key) {
  if (!has(s, key)) fail(ErrorKind::usage, std::string("missing required setting ") + flag_name(key));
  return s[key];
}

long get_int(const Json& s, const char* key) {
  const Json& v = need(s, key);
  if (!v.is_number_integer()) fail(ErrorKind::usage, std::string(key) + " must be an integer");
  return v.get<long>();
}

std::uint64_t get_seed(const Json& s) {
  const Json& v = need(s, "seed");
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long>() >= 0)) {
    fail(ErrorKind::usage, "seed must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

double get_number(const Json& s, const char* key) {
  const Json& v = need(s, key);
  if (!v.is_number()) fail(ErrorKind::usage, std::string(key) + " must be a number");
  return v.get<double>();
}

std::string get_text(const Json& s, const char* key) {
  const Json& v = need(s, key);
  if (!v.is_string()) fail(ErrorKind::usage, std::string(key) + " must be a string");
  return v.get<std::string>();
}

template <typename T>
std::vector<T> get_list(const Json& s, const char* key) {
  const Json& v = need(s, key);
  if (!v.is_array()) fail(ErrorKind::usage, std::string(key) + " must be a list");
  std::vector<T> out;
  for (const auto& item : v) {
    if constexpr (std::is_same_v<T, std::string>) {
      if (!item.is_string()) fail(ErrorKind::usage, std::string(key) + " entries must be strings");
    } else if constexpr (std::is_integral_v<T>) {
      if (!item.is_number_integer()) {
        fail(ErrorKind::usage, std::string(key) + " entries must be integers");
      }
    } else {
      if (!item.is_number()) fail(ErrorKind::usage, std::string(key) + " entries must be numbers");
    }
    out.push_back(item.get<T>());
  }
  if (out.empty()) fail(ErrorKind::usage, std::string(key) + " must not be empty");
  return out;
}

int checked_int(long v, const char* key, long lo) {
  if (v < lo || v > 100000000L) {
    fail(ErrorKind::usage, std::string(key) + " must be in [" + std::to_string(lo) + ", 1e8]");
  }
  return static_cast<int>(v);
}

MetricSpace space_from(const Json& s) {
  MetricSpace space;
  if (has(s, "mu_min")) space.mu_min = static_cast<int>(get_int(s, "mu_min"));
  if (has(s, "mu_max")) space.mu_max = static_cast<int>(get_int(s, "mu_max"));
  space.validate();
  return space;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

void write_sidecar(const Command& cmd, const Json& settings) {
  Json j;
  j["config"] = settings;
  write_file(cmd.out() + ".config.json", dump(j));
}

Json default_tolerance_grid() {
  Json grid = Json::array();
  for (int i = 4; i <= 20; ++i) grid.push_back(i / 10.0);
  return grid;
}

// ---------------------------------------------------------------------------

void run_trace_gen(const Command& cmd) {
  const Json s = cmd.resolve();
  const ChannelModel model = model_from_json(read_json_file(get_text(s, "model")));
  const int positions = checked_int(get_int(s, "positions"), "positions", 0);
  const int k = checked_int(get_int(s, "k"), "k", 1);
  const double jitter = get_number(s, "sample_jitter");
  if (!(jitter >= 0.0)) fail(ErrorKind::usage, "sample_jitter must be >= 0");
  const RssTrace trace = synthesize_trace(model, positions, k, get_seed(s), jitter);

  if (cmd.format() == "json") {
    Json j;
    j["config"] = s;
    Json rows = Json::array();
    for (int p = 0; p < trace.positions(); ++p) {
      Json entry;
      entry["position"] = trace.position_ids[static_cast<std::size_t>(p)];
      for (Party party : {Party::alice, Party::bob}) {
        Json channels = Json::array();
        for (int i = 0; i < trace.channels(); ++i) {
          const auto samples = trace.samples(p, party, i);
          channels.push_back(std::vector<int>(samples.begin(), samples.end()));
        }
        entry[party == Party::alice ? "alice" : "bob"] = std::move(channels);
      }
      rows.push_back(std::move(entry));
    }
    j["positions"] = std::move(rows);
    write_file(cmd.out(), dump(j));
    return;
  }
  std::ostringstream out;
  write_trace_csv(out, trace);
  write_file(cmd.out(), out.str());
  write_sidecar(cmd, s);
}

ProtocolConfig protocol_from(const Json& s, const ChannelModel& model) {
  ProtocolConfig config;
  config.n = model.n();
  config.space = model.space;
  apply_protocol_settings(s, config);
  config.validate();
  return config;
}

Json ecdf_points(std::vector<double> deviations) {
  std::sort(deviations.begin(), deviations.end());
  const std::size_t n = deviations.size();
  Json points = Json::array();
  const std::size_t count = std::min<std::size_t>(n, 100);
  for (std::size_t q = 1; q <= count; ++q) {
    const std::size_t rank = (q * n + count - 1) / count;  // ceil(q n / count)
    Json point;
    point["deviation"] = deviations[rank - 1];
    point["F"] = static_cast<double>(rank) / static_cast<double>(n);
    points.push_back(std::move(point));
  }
  return points;
}

void run_simulate(const Command& cmd) {
  const Json s = cmd.resolve();
  ChannelModel model = model_from_json(read_json_file(get_text(s, "model")));
  if (has(s, "noise_sigma")) {
    model.noise_sigma = get_number(s, "noise_sigma");
    model.validate();
  }
  const ProtocolConfig config = protocol_from(s, model);
  const int runs = checked_int(get_int(s, "runs"), "runs", 1);
  const std::uint64_t seed = get_seed(s);

  const BatchSummary summary = run_batch(model, config, runs, seed);
  const double predicted = predict_success(config.base_tolerance, model.noise_sigma, config.n);

  Json stats;
  stats["runs"] = runs;
  stats["first_try_success_rate"] = summary.first_try_rate;
  stats["agreed_rate"] = summary.agreed_rate;
  stats["mean_retries"] = summary.mean_retries;
  stats["predict_success"] = predicted;
  stats["divergence"] = summary.first_try_rate - predicted;
  std::vector<double> deviations;
  for (const auto& r : summary.runs) deviations.push_back(r.max_deviation);
  stats["max_deviation_ecdf"] = ecdf_points(std::move(deviations));

  Json sweep = Json::array();
  std::ostringstream sweep_csv;
  if (has(s, "tolerances")) {
    sweep_csv << "tolerance,first_try_success,agreed_rate,predicted\n";
    for (double t : get_list<double>(s, "tolerances")) {
      ProtocolConfig swept = config;
      swept.base_tolerance = t;
      swept.validate();
      const BatchSummary b = run_batch(model, swept, runs, seed);
      const double p = predict_success(t, model.noise_sigma, config.n);
      Json row;
      row["tolerance"] = t;
      row["first_try_success"] = b.first_try_rate;
      row["agreed_rate"] = b.agreed_rate;
      row["predicted"] = p;
      sweep.push_back(std::move(row));
      sweep_csv << format_number(t) << ',' << format_number(b.first_try_rate) << ','
                << format_number(b.agreed_rate) << ',' << format_number(p) << '\n';
    }
  }

  if (has(s, "transcript")) {
    const Transcript t =
        run_protocol(model, config, split_seed(seed, Stream::run, 0));
    Json j = transcript_to_json(t);
    j["config"] = s;
    write_file(get_text(s, "transcript"), dump(j));
  }

  if (cmd.format() == "json") {
    Json j;
    j["config"] = s;
    j["stats"] = std::move(stats);
    Json rows = Json::array();
    for (const auto& r : summary.runs) {
      Json row;
      row["run"] = r.run + 1;
      row["outcome"] = std::string(to_string(r.outcome));
      row["retries"] = r.retries;
      row["secret_bits"] = r.secret_bits;
      row["first_try_success"] = r.first_try_success;
      rows.push_back(std::move(row));
    }
    j["runs"] = std::move(rows);
    if (!sweep.empty()) j["sweep"] = std::move(sweep);
    write_file(cmd.out(), dump(j));
    return;
  }
  std::ostringstream out;
  write_batch_csv(out, summary);
  write_file(cmd.out(), out.str());
  Json stats_file;
  stats_file["config"] = s;
  for (const auto& [key, value] : stats.items()) stats_file[key] = value;
  write_file(cmd.out() + ".stats.json", dump(stats_file));
  if (has(s, "tolerances")) write_file(cmd.out() + ".sweep.csv", sweep_csv.str());
  write_sidecar(cmd, s);
}

RssTrace load_trace(const Json& s) {
  std::istringstream in(read_file(get_text(s, "trace")));
  return read_trace_csv(in, space_from(s));
}

void run_fit(const Command& cmd) {
  if (cmd.format_given() && cmd.format() != "json") {
    fail(ErrorKind::usage, "fit writes a JSON model; use --format json");
  }
  const Json s = cmd.resolve();
  const FitResult fit = fit_model(load_trace(s));
  Json j = fit_to_json(fit);
  j["config"] = s;
  write_file(cmd.out(), dump(j));
}

void run_entropy(const Command& cmd) {
  const Json s = cmd.resolve();
  const bool from_trace = has(s, "trace");
  const bool from_model = has(s, "model");
  if (!from_trace && !from_model) fail(ErrorKind::usage, "entropy needs --trace or --model");
  const std::vector<double> grid = get_list<double>(s, "tolerances");
  const std::uint64_t seed = get_seed(s);

  RssTrace trace;
  ChannelModel model;
  if (from_model) model = model_from_json(read_json_file(get_text(s, "model")));
  if (from_trace) {
    trace = load_trace(s);
  } else {
    trace = synthesize_trace(model, checked_int(get_int(s, "positions"), "positions", 1),
                             checked_int(get_int(s, "k"), "k", 1),
                             split_seed(seed, Stream::trace));
  }
  const std::vector<EntropyReport> reports =
      entropy_reports(trace.means(Party::alice), trace.space(), grid);
  std::vector<ModelComparisonRow> comparison;
  if (from_trace && from_model) comparison = model_vs_empirical(model, trace, grid, seed);

  if (cmd.format() == "json") {
    Json j;
    j["config"] = s;
    Json rows = Json::array();
    for (const auto& r : reports) rows.push_back(entropy_report_to_json(r));
    j["reports"] = std::move(rows);
    if (!comparison.empty()) {
      Json cmp = Json::array();
      for (const auto& c : comparison) {
        Json row;
        row["tolerance"] = c.tolerance;
        row["empirical_bits"] = c.empirical_bits;
        row["model_bits"] = c.model_bits;
        cmp.push_back(std::move(row));
      }
      j["model_vs_empirical"] = std::move(cmp);
    }
    write_file(cmd.out(), dump(j));
    return;
  }
  std::ostringstream out;
  write_entropy_csv(out, reports);
  write_file(cmd.out(), out.str());
  if (!comparison.empty()) {
    std::ostringstream cmp;
    cmp << "tolerance,empirical_bits,model_bits\n";
    for (const auto& c : comparison) {
      cmp << format_number(c.tolerance) << ',' << format_number(c.empirical_bits) << ','
          << format_number(c.model_bits) << '\n';
    }
    write_file(cmd.out() + ".compare.csv", cmp.str());
  }
  write_sidecar(cmd, s);
}

void run_predict(const Command& cmd) {
  Json s = cmd.resolve();
  const ChannelModel model = model_from_json(read_json_file(get_text(s, "model")));
  if (!has(s, "targets")) {
    Json targets = Json::array();
    for (int m = model.n(); m <= std::max(model.n(), 40); ++m) targets.push_back(m);
    s["targets"] = std::move(targets);
  }
  std::vector<int> targets;
  for (long m : get_list<long>(s, "targets")) targets.push_back(checked_int(m, "targets", 1));
  std::vector<ExtrapolationMethod> methods;
  for (const auto& name : get_list<std::string>(s, "methods")) {
    methods.push_back(parse_extrapolation_method(name));
  }
  const int replicates = checked_int(get_int(s, "replicates"), "replicates", 1);
  const std::uint64_t seed = get_seed(s);

  std::vector<ProjectionRow> rows;
  for (long stride : get_list<long>(s, "strides")) {
    const auto part = entropy_projection(model.cov, targets, methods,
                                         checked_int(stride, "strides", 1), replicates, seed);
    rows.insert(rows.end(), part.begin(), part.end());
  }

  if (cmd.format() == "json") {
    Json j;
    j["config"] = s;
    Json out = Json::array();
    for (const auto& r : rows) {
      Json row;
      row["method"] = std::string(to_string(r.method));
      row["channels"] = r.channels;
      row["stride"] = r.stride;
      row["entropy_mean_bits"] = r.mean_bits;
      row["ci_low"] = r.ci_low;
      row["ci_high"] = r.ci_high;
      row["replicates"] = r.replicates;
      out.push_back(std::move(row));
    }
    j["rows"] = std::move(out);
    write_file(cmd.out(), dump(j));
    return;
  }
  std::ostringstream out;
  write_projection_csv(out, rows);
  write_file(cmd.out(), out.str());
  write_sidecar(cmd, s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fskey: frequency-selective channel key generation toolkit"};
  app.require_subcommand(1);

  Command trace_gen(app, "trace-gen", "Synthesize an RSS trace from a channel model", "csv");
  trace_gen.add("model", Kind::text, "Channel model JSON");
  trace_gen.add("positions", Kind::integer, "Number of positions", 250);
  trace_gen.add("k", Kind::integer, "Samples per channel", 16);
  trace_gen.add("sample_jitter", Kind::number, "Std. dev. of per-sample jitter (dB)",
                kDefaultSampleJitter);

  Command simulate(app, "simulate", "Monte-Carlo runs of the key agreement protocol", "csv");
  simulate.add("model", Kind::text, "Channel model JSON");
  simulate.add("runs", Kind::integer, "Number of protocol runs", 1000);
  simulate.add("n", Kind::integer, "Channels (defaults to the model's)");
  simulate.add("k", Kind::integer, "Samples per channel", 16);
  simulate.add("mu_min", Kind::integer, "Metric space lower bound (dBm)");
  simulate.add("mu_max", Kind::integer, "Metric space upper bound (dBm)");
  simulate.add("base_tolerance", Kind::number, "Initial tolerance t (dB)", 1.0);
  simulate.add("tolerance_step", Kind::number, "Tolerance increase per retry (dB)", 0.5);
  simulate.add("retry_policy", Kind::text, "uniform | per_channel", "uniform");
  simulate.add("max_retries", Kind::integer, "Verification retries before giving up", 8);
  simulate.add("loss_probability", Kind::number, "Per-message loss probability", 0.0);
  simulate.add("retransmit_cap", Kind::integer, "Retransmissions per lost message", 3);
  simulate.add("sample_jitter", Kind::number, "Std. dev. of per-sample jitter (dB)",
               kDefaultSampleJitter);
  simulate.add("noise_sigma", Kind::number, "Override the model's noise sigma (dB)");
  simulate.add("tolerances", Kind::numbers, "Tolerance sweep, comma separated");
  simulate.add("transcript", Kind::text, "Write the first run's transcript JSON here");

  Command fit(app, "fit", "Fit a channel model to an RSS trace", "json");
  fit.add("trace", Kind::text, "RSS trace CSV");
  fit.add("mu_min", Kind::integer, "Metric space lower bound (dBm)");
  fit.add("mu_max", Kind::integer, "Metric space upper bound (dBm)");

  Command entropy(app, "entropy", "Entropy of quantized channel means over a tolerance grid",
                  "csv");
  entropy.add("trace", Kind::text, "RSS trace CSV");
  entropy.add("model", Kind::text, "Channel model JSON (synthesized when no trace is given)");
  entropy.add("positions", Kind::integer, "Positions synthesized from the model", 250);
  entropy.add("k", Kind::integer, "Samples per channel for synthesis", 16);
  entropy.add("mu_min", Kind::integer, "Metric space lower bound for traces (dBm)");
  entropy.add("mu_max", Kind::integer, "Metric space upper bound for traces (dBm)");
  entropy.add("tolerances", Kind::numbers, "Tolerance grid, comma separated",
              default_tolerance_grid());

  Command predict(app, "predict", "Differential-entropy projections to more channels", "csv");
  predict.add("model", Kind::text, "Channel model JSON");
  predict.add("targets", Kind::integers, "Target channel counts (default n..40)");
  predict.add("methods", Kind::texts, "fixed_determinant,diagonal_uniform",
              Json::array({"fixed_determinant", "diagonal_uniform"}));
  predict.add("strides", Kind::integers, "Channel spacing strides", Json::array({1}));
  predict.add("replicates", Kind::integer, "Extrapolation replicates", 100);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*trace_gen.app()) run_trace_gen(trace_gen);
    else if (*simulate.app()) run_simulate(simulate);
    else if (*fit.app()) run_fit(fit);
    else if (*entropy.app()) run_entropy(entropy);
    else if (*predict.app()) run_predict(predict);
  } catch (const Error& e) {
    std::cerr << "fskey: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "fskey: internal error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
