#include "doctest.h"

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "fskey/io.hpp"

using namespace fskey;
namespace fs = std::filesystem;

namespace {

const fs::path& workdir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("fskey_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string path(const std::string& name) { return (workdir() / name).string(); }

int run(const std::string& args) {
  const std::string command = std::string(FSKEY_CLI_PATH) + " " + args + " 2>" + path("stderr.txt");
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& file) { return read_file(file); }

void write_model(const std::string& name, int n, double sigma, double variance = 36.0) {
  ChannelModel m;
  m.mean = Eigen::VectorXd::Constant(n, -72.0);
  m.cov.resize(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) m.cov(a, b) = variance * std::pow(0.8, std::abs(a - b));
  m.noise_sigma = sigma;
  write_file(path(name), model_to_json(m).dump());
}

std::size_t line_count(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(run("") == 2);
  CHECK(run("bogus") == 2);
  CHECK(run("trace-gen --positions 3") == 2);
  write_model("m4.json", 4, 0.5);
  CHECK(run("simulate --model " + path("m4.json") + " --retry-policy greedy --out " +
            path("x.csv")) == 2);
  CHECK(run("simulate --model " + path("m4.json") + " --runs abc --out " + path("x.csv")) == 2);
  CHECK(run("simulate --model " + path("m4.json") + " --n 8 --out " + path("x.csv")) == 2);
  CHECK(run("trace-gen --model " + path("m4.json") + " --format xml --out " + path("x.csv")) == 2);
}

TEST_CASE("data and numerical errors") {
  CHECK(run("trace-gen --model " + path("missing.json") + " --out " + path("x.csv")) == 3);
  write_file(path("broken.json"), "{\"n\": 2");
  CHECK(run("trace-gen --model " + path("broken.json") + " --out " + path("x.csv")) == 3);
  write_file(path("indef.json"),
             R"({"n":2,"mean":[-70,-70],"cov":[[1,3],[3,1]],"noise_sigma":0.5})");
  CHECK(run("trace-gen --model " + path("indef.json") + " --out " + path("x.csv")) == 4);
  write_file(path("bad_trace.csv"), "position,channel,party,sample,rss_dbm\n1,1,alice,1,x\n");
  CHECK(run("fit --trace " + path("bad_trace.csv") + " --out " + path("x.json")) == 3);
}

TEST_CASE("trace-gen row counts and sidecar") {
  write_model("m16.json", 16, 0.503);
  REQUIRE(run("trace-gen --model " + path("m16.json") + " --positions 250 --seed 3 --out " +
              path("t250.csv")) == 0);
  const std::string text = slurp(path("t250.csv"));
  CHECK(line_count(text) == 1 + 128000);
  const Json side = parse_json(slurp(path("t250.csv.config.json")), "sidecar");
  CHECK(side["config"]["seed"] == 3);
  CHECK(side["config"]["positions"] == 250);
  CHECK(side["config"]["command"] == "trace-gen");

  REQUIRE(run("trace-gen --model " + path("m16.json") + " --positions 0 --out " +
              path("t0.csv")) == 0);
  CHECK(slurp(path("t0.csv")) == "position,channel,party,sample,rss_dbm\n");

  REQUIRE(run("trace-gen --model " + path("m16.json") + " --positions 2 --k 3 --format json --out " +
              path("t2.json")) == 0);
  const Json tj = parse_json(slurp(path("t2.json")), "trace json");
  CHECK(tj["positions"].size() == 2);
  CHECK(tj["positions"][0]["alice"].size() == 16);
  CHECK(tj["positions"][0]["alice"][0].size() == 3);
}

TEST_CASE("fit round trip and undersized trace") {
  write_model("m6.json", 6, 0.503);
  REQUIRE(run("trace-gen --model " + path("m6.json") + " --positions 2000 --out " +
              path("t6.csv")) == 0);
  REQUIRE(run("fit --trace " + path("t6.csv") + " --out " + path("fit6.json")) == 0);
  const Json fit = parse_json(slurp(path("fit6.json")), "fit");
  CHECK(fit["noise_sigma"].get<double>() == doctest::Approx(0.503).epsilon(0.05));
  CHECK(fit["fit"]["ppcc_pooled"].get<double>() >= 0.99);
  CHECK(fit["config"]["command"] == "fit");
  CHECK_NOTHROW(model_from_json(fit));

  REQUIRE(run("trace-gen --model " + path("m6.json") + " --positions 1 --out " +
              path("t1.csv")) == 0);
  CHECK(run("fit --trace " + path("t1.csv") + " --out " + path("fit1.json")) == 2);
  CHECK(run("fit --trace " + path("t6.csv") + " --format csv --out " + path("fit.csv")) == 2);
}

TEST_CASE("simulate outputs, sweep and config precedence") {
  write_model("quiet.json", 16, 0.0);
  REQUIRE(run("simulate --model " + path("quiet.json") + " --runs 20 --out " + path("q.csv")) == 0);
  const Json stats = parse_json(slurp(path("q.csv.stats.json")), "stats");
  CHECK(stats["first_try_success_rate"] == 1.0);
  CHECK(stats["predict_success"] == 1.0);
  CHECK(stats.contains("divergence"));
  CHECK(stats.contains("max_deviation_ecdf"));
  CHECK(line_count(slurp(path("q.csv"))) == 21);

  write_model("noisy.json", 16, 0.503);
  REQUIRE(run("simulate --model " + path("noisy.json") +
              " --runs 300 --tolerances 0.5,1.0,1.5,2.0 --out " + path("s.csv")) == 0);
  std::istringstream sweep(slurp(path("s.csv.sweep.csv")));
  std::string line;
  std::getline(sweep, line);
  CHECK(line == "tolerance,first_try_success,agreed_rate,predicted");
  double previous = -1.0;
  int rows = 0;
  while (std::getline(sweep, line)) {
    const double rate = std::stod(line.substr(line.find(',') + 1));
    CHECK(rate >= previous);
    previous = rate;
    ++rows;
  }
  CHECK(rows == 4);

  write_file(path("cfg.json"), R"({"runs": 5, "seed": 9, "base_tolerance": 1.5})");
  REQUIRE(run("simulate --model " + path("noisy.json") + " --config " + path("cfg.json") +
              " --out " + path("c1.csv")) == 0);
  CHECK(line_count(slurp(path("c1.csv"))) == 6);
  REQUIRE(run("simulate --model " + path("noisy.json") + " --config " + path("cfg.json") +
              " --runs 7 --out " + path("c2.csv")) == 0);
  CHECK(line_count(slurp(path("c2.csv"))) == 8);
  const Json side = parse_json(slurp(path("c2.csv.config.json")), "sidecar");
  CHECK(side["config"]["runs"] == 7);
  CHECK(side["config"]["seed"] == 9);
  CHECK(side["config"]["base_tolerance"] == 1.5);
  CHECK(side["config"]["max_retries"] == 8);

  write_file(path("cfg_bad.json"), R"({"rnus": 5})");
  CHECK(run("simulate --model " + path("noisy.json") + " --config " + path("cfg_bad.json") +
            " --out " + path("c3.csv")) == 2);

  REQUIRE(run("simulate --model " + path("noisy.json") + " --runs 3 --format json --transcript " +
              path("tr.json") + " --out " + path("s.json")) == 0);
  const Json sj = parse_json(slurp(path("s.json")), "simulate json");
  CHECK(sj["runs"].size() == 3);
  const Json tr = parse_json(slurp(path("tr.json")), "transcript");
  CHECK(tr["sampling_exchanges"] == 256);
  CHECK(tr["attempts"][0]["bundle"]["t"].size() == 16);
}

TEST_CASE("entropy command") {
  write_model("m16e.json", 16, 0.503);
  REQUIRE(run("entropy --model " + path("m16e.json") + " --positions 300 --out " +
              path("e.csv")) == 0);
  std::istringstream csv(slurp(path("e.csv")));
  std::string line;
  std::getline(csv, line);
  CHECK(line ==
        "tolerance,per_channel_mean,joint_independent,joint_plugin,joint_tcomplexity,samples,"
        "undersampled_flag");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 17);

  const int code = run("entropy --model " + path("m16e.json") + " --tolerances 0.1 --out " +
                       path("e2.csv"));
  CHECK(code == 2);
  CHECK(slurp(path("stderr.txt")).find("t must exceed") != std::string::npos);

  REQUIRE(run("trace-gen --model " + path("m16e.json") + " --positions 200 --out " +
              path("te.csv")) == 0);
  REQUIRE(run("entropy --trace " + path("te.csv") + " --model " + path("m16e.json") +
              " --tolerances 1.0,2.0 --format json --out " + path("e.json")) == 0);
  const Json ej = parse_json(slurp(path("e.json")), "entropy json");
  CHECK(ej["reports"].size() == 2);
  CHECK(ej["model_vs_empirical"].size() == 2);
  CHECK(run("entropy --out " + path("e3.csv")) == 2);
}

TEST_CASE("predict command") {
  write_model("m16p.json", 16, 0.503);
  REQUIRE(run("predict --model " + path("m16p.json") + " --targets 16,40 --replicates 20 --out " +
              path("p.csv")) == 0);
  std::istringstream csv(slurp(path("p.csv")));
  std::string header, fd16, fd40;
  std::getline(csv, header);
  std::getline(csv, fd16);
  std::getline(csv, fd40);
  CHECK(header == "method,channels,stride,entropy_mean_bits,ci_low,ci_high,replicates");
  CHECK(fd16.rfind("fixed_determinant,16,1,", 0) == 0);
  const auto bits = [](const std::string& row) {
    std::stringstream s(row);
    std::string field;
    for (int i = 0; i < 4; ++i) std::getline(s, field, ',');
    return std::stod(field);
  };
  CHECK(bits(fd40) - bits(fd16) == doctest::Approx(24 * 2.0470955851806).epsilon(1e-9));

  CHECK(run("predict --model " + path("m16p.json") + " --targets 8 --out " + path("p2.csv")) == 2);
  CHECK(run("predict --model " + path("m16p.json") + " --strides 16 --out " + path("p3.csv")) == 2);
  CHECK(run("predict --model " + path("m16p.json") + " --methods spline --out " + path("p4.csv")) == 2);
}
