#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "ratchet/config.hpp"
#include "ratchet/error.hpp"
#include "ratchet/runner.hpp"

using namespace ratchet;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"({"model": "diffusion", "alpha": 1, "lambda": 1, "d": 15, "seed": 42})";

std::string error_text(std::string_view json_text) {
  try {
    parse_config_text(json_text);
  } catch (const Error& e) {
    return std::string(to_string(e.code())) + "|" + e.what();
  }
  return "ok";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ratchet_unit_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("minimal config parses with defaults") {
  const RunConfig c = parse_config_text(kMinimal);
  CHECK(c.model == Model::Diffusion);
  CHECK(c.params.alpha == 1.0);
  CHECK(c.params.lambda == 1.0);
  CHECK(c.params.d == 15);
  CHECK(c.seed == 42);
  CHECK(c.integrator.dt == 1e-3);
  CHECK_FALSE(c.experiment);
  CHECK_FALSE(c.threads);
}

TEST_CASE("validation errors name the field") {
  const std::string neg = error_text(R"({"model": "diffusion", "alpha": -1, "lambda": 1, "d": 15, "seed": 42})");
  CHECK(neg.rfind("ValidationError|", 0) == 0);
  CHECK(neg.find("alpha") != std::string::npos);

  const std::string typo =
      error_text(R"({"model": "diffusion", "alpha": 1, "lamda": 1, "lambda": 1, "d": 15, "seed": 42})");
  CHECK(typo.rfind("ValidationError|", 0) == 0);
  CHECK(typo.find("lamda") != std::string::npos);
  CHECK(typo.find("unknown key") != std::string::npos);

  CHECK(error_text(R"({"model": "diffusion", "alpha": 1, "lambda": 1, "d": 15})").find("seed") != std::string::npos);
  CHECK(error_text(R"({"model": "wright", "alpha": 1, "lambda": 1, "d": 15, "seed": 1})").find("model") !=
        std::string::npos);
  CHECK(error_text(R"({"model": "diffusion", "alpha": 1, "lambda": 1, "d": 15, "seed": -3})").find("seed") !=
        std::string::npos);
  CHECK(error_text(R"({"model": "diffusion", "alpha": 1, "lambda": 1, "d": 15.5, "seed": 3})").find("d:") !=
        std::string::npos);
  CHECK(error_text(R"({"model": "discrete", "alpha": 1, "lambda": 1, "d": 15, "seed": 3})").find("alpha") !=
        std::string::npos);
  CHECK(error_text(R"({"model": "aggregated", "alpha": 1, "lambda": 1, "d": 15, "seed": 3})").find("k:") !=
        std::string::npos);
  CHECK(error_text(R"({"model": "diffusion", "alpha": 1, "lambda": 1, "d": 15, "seed": 3, "particles": 1})")
            .find("particles") != std::string::npos);
  CHECK(error_text(R"({"model": "diffusion", "alpha": 1, "lambda": 1, "d": 2, "seed": 3,
                       "initial_profile": [0.5, 0.6, 0.0]})")
            .find("initial_profile") != std::string::npos);
  CHECK(error_text(R"({"model": "diffusion", "alpha": 1, "lambda": 1, "d": 15, "seed": 3, "d_list": [30, 15]})")
            .find("d_list") != std::string::npos);
}

TEST_CASE("malformed JSON reports a line") {
  const std::string e = error_text("{\"model\": \"diffusion\",\n  \"alpha\": 1,,\n}");
  CHECK(e.rfind("ParseError|", 0) == 0);
  CHECK(e.find("line 2") != std::string::npos);
  CHECK(error_text("[1, 2]").rfind("ParseError|", 0) == 0);
}

TEST_CASE("seed accepts the full unsigned range") {
  const RunConfig c =
      parse_config_text(R"({"model": "diffusion", "alpha": 1, "lambda": 1, "d": 15, "seed": 18446744073709551615})");
  CHECK(c.seed == 18446744073709551615ULL);
}

TEST_CASE("resolved config round-trips and the digest tracks inputs") {
  const RunConfig c = parse_config_text(kMinimal);
  const RunConfig again = parse_config_text(resolved_json(c).dump());
  CHECK(config_digest(c) == config_digest(again));
  CHECK(config_digest(c).size() == 16);

  RunConfig other = c;
  other.seed = 43;
  CHECK(config_digest(other) != config_digest(c));
  RunConfig threaded = c;
  threaded.threads = 8;
  CHECK(config_digest(threaded) == config_digest(c));
}

TEST_CASE("time grid") {
  RunConfig c = parse_config_text(kMinimal);
  c.integrator.t_max = 0.3;
  c.grid_step = 0.1;
  const auto g = effective_grid(c);
  REQUIRE(g.size() == 4);
  CHECK(g.back() == doctest::Approx(0.3));
  c.t_grid = {0.0, 2.0};
  CHECK(effective_grid(c) == c.t_grid);
}

TEST_CASE("format_real keeps 17 significant digits") {
  CHECK(format_real(0.1) == "0.10000000000000001");
  CHECK(format_real(2.0) == "2");
  CHECK(format_real(-1.5e-300) == "-1.5000000000000001e-300");
}

TEST_CASE("simulate writes identical artifacts across runs and thread counts") {
  RunConfig c = parse_config_text(
      R"({"model": "diffusion", "alpha": 1, "lambda": 1, "d": 8, "seed": 5, "replicates": 16,
          "t_max": 0.3, "record_stride": 50})");
  const fs::path a = scratch("sim_a"), b = scratch("sim_b");
  c.threads = 1;
  REQUIRE(run(c, Experiment::Simulate, a) == 0);
  c.threads = 4;
  REQUIRE(run(c, Experiment::Simulate, b) == 0);
  for (const char* f : {"series.csv", "summary.json", "config.json"}) CHECK(slurp(a / f) == slurp(b / f));
  const std::string csv = slurp(a / "series.csv");
  CHECK(csv.rfind("replicate,time,x0,m1,m2,m3\r\n", 0) == 0);
  const auto summary = nlohmann::json::parse(slurp(a / "summary.json"));
  CHECK(summary["schema_version"] == kSchemaVersion);
  CHECK(summary["config_digest"] == config_digest(c));
  CHECK(summary.contains("code_version"));
  CHECK(summary["estimates"].contains("final_mean_m1"));
}

TEST_CASE("discrete and aggregated simulate runs") {
  const fs::path d = scratch("disc");
  RunConfig c = parse_config_text(
      R"({"model": "discrete", "alpha": 0.1, "lambda": 0.05, "d": 10, "seed": 9, "replicates": 4,
          "population_size": 50, "generations": 200, "record_stride": 20})");
  CHECK(run(c, Experiment::Simulate, d) == 0);
  CHECK(slurp(d / "series.csv").rfind("replicate,generation,x0,m1,m2,m3\r\n", 0) == 0);

  const fs::path g = scratch("agg");
  RunConfig ca = parse_config_text(
      R"({"model": "aggregated", "k": 3, "alpha": 1, "lambda": 1, "d": 8, "seed": 9, "replicates": 4, "t_max": 0.2})");
  CHECK(run(ca, Experiment::Simulate, g) == 0);
}

TEST_CASE("failures leave an error record and the right exit code") {
  const fs::path e1 = scratch("err1");
  RunConfig c = parse_config_text(kMinimal);
  c.experiment = Experiment::Qsd;
  CHECK(run(c, Experiment::Simulate, e1) == 1);
  const auto err = nlohmann::json::parse(slurp(e1 / "error.json"));
  CHECK(err["error"] == "ValidationError");
  CHECK(err["exit_code"] == 1);

  const fs::path e2 = scratch("err2");
  RunConfig thin = parse_config_text(
      R"({"model": "diffusion", "alpha": 1, "lambda": 1, "d": 8, "seed": 1, "replicates": 50, "t_max": 0.5,
          "initial_profile": [0.4, 0.6, 0, 0, 0, 0, 0, 0, 0]})");
  CHECK(run(thin, Experiment::ClickStats, e2) == 2);
  CHECK(nlohmann::json::parse(slurp(e2 / "error.json"))["error"] == "StatisticalFloor");
  CHECK_FALSE(fs::exists(e2 / "summary.json"));

  const fs::path e3 = scratch("err3");
  RunConfig disc = parse_config_text(
      R"({"model": "discrete", "alpha": 0.1, "lambda": 0.05, "d": 10, "seed": 9})");
  CHECK(run(disc, Experiment::Qsd, e3) == 1);

  CHECK(exit_code_for(ErrorCode::WindowTooThin) == 2);
  CHECK(exit_code_for(ErrorCode::NoDecayWindow) == 2);
  CHECK(exit_code_for(ErrorCode::Extinct) == 1);
}

TEST_CASE("tightness table has one row per d with stderr") {
  const fs::path t = scratch("tight");
  RunConfig c = parse_config_text(
      R"({"model": "diffusion", "alpha": 1, "lambda": 1, "d": 6, "seed": 2, "particles": 100, "horizon": 4,
          "d_list": [4, 6], "moment_order": 3, "quantile": 0.9})");
  REQUIRE(run(c, Experiment::Tightness, t) == 0);
  const auto s = nlohmann::json::parse(slurp(t / "summary.json"));
  REQUIRE(s["table"].size() == 2);
  CHECK(s["table"][0]["d"] == 4);
  CHECK(s["table"][1]["d"] == 6);
  CHECK(s["table"][0]["quantile"].contains("stderr"));
  CHECK(s["flags"]["holder_holds"] == true);
}
