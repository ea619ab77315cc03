#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ratchet/config.hpp"
#include "ratchet/error.hpp"
#include "ratchet/parallel.hpp"
#include "ratchet/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Muller's ratchet diffusion and quasi-stationary distribution experiments"};
  std::string experiment;
  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  int threads = 0;
  app.add_option("experiment", experiment,
                 "simulate | qsd | eta | qprocess | correlations | relaxation | tightness | autonomy | compare | "
                 "clickstats")
      ->required();
  app.add_option("--config", config_path, "JSON config file")->required();
  app.add_option("--out", out_dir, "output directory");
  auto* seed_opt = app.add_option("--seed", seed, "master seed, overrides the config");
  auto* threads_opt = app.add_option("--threads", threads, "worker threads, overrides the config")
                          ->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  ratchet::RunConfig cfg;
  ratchet::Experiment which;
  try {
    which = ratchet::parse_experiment(experiment);
    cfg = ratchet::parse_config(config_path);
  } catch (const ratchet::Error& e) {
    nlohmann::ordered_json err;
    err["schema_version"] = ratchet::kSchemaVersion;
    err["experiment"] = experiment;
    err["error"] = ratchet::to_string(e.code());
    err["message"] = e.what();
    err["exit_code"] = ratchet::exit_code_for(e.code());
    std::cerr << err.dump() << '\n';
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    std::ofstream(std::filesystem::path(out_dir) / "error.json", std::ios::binary) << err.dump(2) << '\n';
    return ratchet::exit_code_for(e.code());
  }
  if (*seed_opt) cfg.seed = seed;
  if (*threads_opt) cfg.threads = threads;
  if (!cfg.threads) ratchet::set_thread_count(0);
  return ratchet::run(cfg, which, out_dir);
}
