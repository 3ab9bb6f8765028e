#include "doctest.h"

#include <cmath>
#include <sstream>
#include <string>

#include "fskey/error.hpp"
#include "fskey/io.hpp"

using namespace fskey;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return static_cast<ErrorKind>(0);
}

ChannelModel small_model() {
  ChannelModel m;
  m.mean = Eigen::Vector3d(-70.5, -60.0, -80.25);
  m.cov = Eigen::Matrix3d{{4.0, 1.0, 0.5}, {1.0, 9.0, 2.0}, {0.5, 2.0, 6.0}};
  m.noise_sigma = 0.503;
  return m;
}

}  // namespace

TEST_CASE("number formatting") {
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(2.0) == "2");
  CHECK(format_number(-71.424) == "-71.424");
  CHECK(format_fixed3(1.0) == "1.000");
  CHECK(format_fixed3(0.5) == "0.500");
  CHECK(format_fixed3(-0.424) == "-0.424");
  CHECK(format_fixed3(0.1234) == "0.1234");
  CHECK(std::stod(format_fixed3(0.9000000000000057)) == 0.9000000000000057);
}

TEST_CASE("trace CSV round trip") {
  const RssTrace trace = synthesize_trace(
      [] {
        ChannelModel m = small_model();
        return m;
      }(),
      5, 4, 17);
  std::stringstream csv;
  write_trace_csv(csv, trace);
  const std::string text = csv.str();
  CHECK(text.rfind("position,channel,party,sample,rss_dbm\n1,1,alice,1,", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 5 * 3 * 2 * 4);

  std::istringstream in(text);
  const RssTrace back = read_trace_csv(in);
  CHECK(back.positions() == 5);
  CHECK(back.channels() == 3);
  CHECK(back.samples_per_channel() == 4);
  CHECK(back.means(Party::alice) == trace.means(Party::alice));
  CHECK(back.means(Party::bob) == trace.means(Party::bob));
  CHECK(back.position_ids == trace.position_ids);
}

TEST_CASE("trace CSV accepts shuffled rows and CRLF") {
  const std::string text =
      "position,channel,party,sample,rss_dbm\r\n"
      "7,1,bob,1,-71\r\n"
      "7,1,alice,1,-70\r\n"
      "3,1,bob,1,-51\r\n"
      "3,1,alice,1,-50\r\n";
  std::istringstream in(text);
  const RssTrace t = read_trace_csv(in);
  CHECK(t.positions() == 2);
  CHECK(t.position_ids == std::vector<int>{3, 7});
  CHECK(t.at(0, Party::alice, 0, 0) == -50);
  CHECK(t.at(1, Party::bob, 0, 0) == -71);
}

TEST_CASE("trace CSV schema errors") {
  const auto read = [](const std::string& text) {
    return [text] {
      std::istringstream in(text);
      read_trace_csv(in);
    };
  };
  const std::string header = "position,channel,party,sample,rss_dbm\n";
  CHECK(kind_of(read("")) == ErrorKind::data);
  CHECK(kind_of(read("pos,ch\n1,1\n")) == ErrorKind::data);
  CHECK(kind_of(read(header)) == ErrorKind::data);
  CHECK(kind_of(read(header + "1,1,carol,1,-70\n")) == ErrorKind::data);
  CHECK(kind_of(read(header + "1,1,alice,1,-70.5\n1,1,bob,1,-70\n")) == ErrorKind::data);
  CHECK(kind_of(read(header + "1,0,alice,1,-70\n1,0,bob,1,-70\n")) == ErrorKind::data);
  CHECK(kind_of(read(header + "1,1,alice,1,-70\n")) == ErrorKind::data);
  CHECK(kind_of(read(header + "1,1,alice,1,-70\n1,1,alice,1,-70\n")) == ErrorKind::data);
  CHECK(kind_of(read(header + "1,1,alice,1\n")) == ErrorKind::data);
}

TEST_CASE("header-only trace output") {
  const RssTrace empty = synthesize_trace(small_model(), 0, 4, 1);
  std::stringstream csv;
  write_trace_csv(csv, empty);
  CHECK(csv.str() == "position,channel,party,sample,rss_dbm\n");
}

TEST_CASE("model JSON round trip and errors") {
  const ChannelModel m = small_model();
  const Json j = model_to_json(m);
  CHECK(j["n"] == 3);
  const ChannelModel back = model_from_json(Json::parse(j.dump()));
  CHECK(back.mean == m.mean);
  CHECK(back.cov == m.cov);
  CHECK(back.noise_sigma == m.noise_sigma);
  CHECK(back.space == m.space);

  Json missing = j;
  missing.erase("cov");
  CHECK(kind_of([&] { model_from_json(missing); }) == ErrorKind::data);

  Json ragged = j;
  ragged["mean"] = Json::array({1.0, 2.0});
  CHECK(kind_of([&] { model_from_json(ragged); }) == ErrorKind::data);

  Json indefinite = j;
  indefinite["cov"] = Json::array({Json::array({1.0, 3.0, 0.0}), Json::array({3.0, 1.0, 0.0}),
                                   Json::array({0.0, 0.0, 1.0})});
  CHECK(kind_of([&] { model_from_json(indefinite); }) == ErrorKind::numerical);

  Json extra = j;
  extra["fit"] = Json::object();
  CHECK_NOTHROW(model_from_json(extra));
}

TEST_CASE("bundle wire format") {
  const ReconcileBundle b{{1.0, 1.5}, {0.9, -0.424}};
  const std::string wire = bundle_to_wire(b);
  CHECK(wire == "{\"t\":[1.000,1.500],\"p\":[0.900,-0.424]}");
  const ReconcileBundle back = bundle_from_wire(wire);
  CHECK(back.tolerances == b.tolerances);
  CHECK(back.shifts == b.shifts);
  CHECK(kind_of([] { bundle_from_wire("{\"t\":[1.0]}"); }) == ErrorKind::data);
  CHECK(kind_of([] { bundle_from_wire("not json"); }) == ErrorKind::data);
}

TEST_CASE("protocol settings from JSON") {
  ProtocolConfig config;
  apply_protocol_settings(Json::parse(R"({"k":8,"base_tolerance":1.5,"retry_policy":"per_channel"})"),
                          config);
  CHECK(config.k == 8);
  CHECK(config.base_tolerance == 1.5);
  CHECK(config.retry_policy == RetryPolicy::per_channel);
  CHECK(protocol_config_to_json(config)["retry_policy"] == "per_channel");

  CHECK(kind_of([&] { apply_protocol_settings(Json::parse(R"({"k":"eight"})"), config); }) ==
        ErrorKind::usage);
  CHECK(kind_of([&] { apply_protocol_settings(Json::parse(R"({"n":2.5})"), config); }) ==
        ErrorKind::usage);
  CHECK(kind_of([&] { apply_protocol_settings(Json::parse(R"({"retry_policy":"x"})"), config); }) ==
        ErrorKind::usage);
}

TEST_CASE("table headers") {
  std::stringstream e, p, b;
  write_entropy_csv(e, {});
  write_projection_csv(p, {});
  write_batch_csv(b, {});
  CHECK(e.str() ==
        "tolerance,per_channel_mean,joint_independent,joint_plugin,joint_tcomplexity,samples,"
        "undersampled_flag\n");
  CHECK(p.str() == "method,channels,stride,entropy_mean_bits,ci_low,ci_high,replicates\n");
  CHECK(b.str() == "run,outcome,retries,secret_bits,first_try_success\n");

  std::stringstream row;
  write_projection_csv(row, {{ExtrapolationMethod::fixed_determinant, 17, 1, 2.5, 2.5, 2.5, 1}});
  CHECK(row.str().substr(row.str().find('\n') + 1) == "fixed_determinant,17,1,2.5,2.5,2.5,1\n");
}

TEST_CASE("file helpers") {
  CHECK(kind_of([] { read_file("/nonexistent/fskey/file"); }) == ErrorKind::data);
  CHECK(kind_of([] { parse_json("{", "x"); }) == ErrorKind::data);
}
