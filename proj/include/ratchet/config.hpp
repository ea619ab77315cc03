#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ratchet/core.hpp"
#include "ratchet/diffusion_model.hpp"
#include "ratchet/qsd.hpp"

namespace ratchet {

enum class Model { Discrete, Diffusion, Aggregated };

enum class Experiment {
  Simulate,
  Qsd,
  Eta,
  QProcess,
  Correlations,
  Relaxation,
  Tightness,
  Autonomy,
  Compare,
  ClickStats,
};

std::string_view to_string(Model m);
std::string_view to_string(Experiment e);
Experiment parse_experiment(std::string_view name);

struct RunConfig {
  Model model = Model::Diffusion;
  std::optional<Experiment> experiment;
  Params params;
  IntegratorConfig integrator;
  std::uint64_t seed = 0;
  std::optional<int> threads;

  std::size_t replicates = 1000;

  // Fleming-Viot
  std::size_t particles = 2000;
  double horizon = 40.0;
  FlemingViotOptions fv;
  double delta_t = 1.0;
  int bins = 20;

  // aggregation level for model "aggregated" and the autonomy experiment
  int k = 0;

  // discrete model
  std::uint64_t population_size = 1000;
  std::vector<std::uint64_t> population_sizes;
  long long generations = 1000;

  // tightness
  std::vector<int> d_list;
  int moment_order = 3;
  double quantile = 0.95;

  double guard = 1.0;
  std::optional<double> rho0;

  std::vector<int> ks{0, 1, 2, 3};
  std::vector<double> t_grid;
  double grid_step = 0.05;
  double min_survival = 0.9;
  int bootstrap = 200;

  std::optional<std::vector<double>> initial_profile;
  std::optional<std::vector<double>> initial_profile_b;
  std::vector<double> head;
  std::vector<double> tail_a;
  std::vector<double> tail_b;

  std::optional<double> relaxation_time;
};

/// Reads and validates a JSON config. Unknown keys are rejected.
RunConfig parse_config(const std::filesystem::path& path);
RunConfig parse_config_text(std::string_view text);

/// Every field after defaults, in a fixed key order. Thread count is left
/// out because it never changes results.
nlohmann::ordered_json resolved_json(const RunConfig& cfg);

/// FNV-1a 64 of the resolved config, as 16 hex digits.
std::string config_digest(const RunConfig& cfg);

/// Time grid for the correlation and relaxation experiments.
std::vector<double> effective_grid(const RunConfig& cfg);

}  // namespace ratchet
