#include "ratchet/config.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "ratchet/error.hpp"

namespace ratchet {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<Experiment, std::string_view>, 10> kExperiments{{
    {Experiment::Simulate, "simulate"},
    {Experiment::Qsd, "qsd"},
    {Experiment::Eta, "eta"},
    {Experiment::QProcess, "qprocess"},
    {Experiment::Correlations, "correlations"},
    {Experiment::Relaxation, "relaxation"},
    {Experiment::Tightness, "tightness"},
    {Experiment::Autonomy, "autonomy"},
    {Experiment::Compare, "compare"},
    {Experiment::ClickStats, "clickstats"},
}};

[[noreturn]] void invalid(const std::string& field, const std::string& what) {
  throw Error(ErrorCode::ValidationError, field + ": " + what);
}

// Typed access to a JSON object that remembers which keys were consumed.
class Reader {
 public:
  explicit Reader(const json& obj) : obj_(obj) {}

  bool has(const std::string& key) {
    seen_.insert(key);
    return obj_.contains(key);
  }

  double number(const std::string& key) {
    const json& v = obj_.at(key);
    if (!v.is_number()) invalid(key, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) invalid(key, "must be finite");
    return x;
  }

  long long integer(const std::string& key) {
    const json& v = obj_.at(key);
    if (!v.is_number_integer()) invalid(key, "expected an integer");
    if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) {
      invalid(key, "integer out of range");
    }
    return v.get<long long>();
  }

  std::uint64_t unsigned_integer(const std::string& key) {
    const json& v = obj_.at(key);
    if (!v.is_number_integer()) invalid(key, "expected an integer");
    if (!v.is_number_unsigned() && v.get<long long>() < 0) invalid(key, "must lie in [0, 2^64 - 1]");
    return v.get<std::uint64_t>();
  }

  std::vector<double> numbers(const std::string& key) {
    const json& v = obj_.at(key);
    if (!v.is_array()) invalid(key, "expected an array of numbers");
    std::vector<double> out;
    for (const json& e : v) {
      if (!e.is_number() || !std::isfinite(e.get<double>())) invalid(key, "expected an array of finite numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  std::vector<long long> integers(const std::string& key) {
    const json& v = obj_.at(key);
    if (!v.is_array()) invalid(key, "expected an array of integers");
    std::vector<long long> out;
    for (const json& e : v) {
      if (!e.is_number_integer()) invalid(key, "expected an array of integers");
      out.push_back(e.get<long long>());
    }
    return out;
  }

  std::string string(const std::string& key) {
    const json& v = obj_.at(key);
    if (!v.is_string()) invalid(key, "expected a string");
    return v.get<std::string>();
  }

  void reject_unknown() const {
    for (const auto& item : obj_.items()) {
      if (!seen_.count(item.key())) invalid(item.key(), "unknown key");
    }
  }

 private:
  const json& obj_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& field, const std::string& range) {
  if (!ok) invalid(field, "must be " + range);
}

int as_int(long long v, const std::string& field) {
  if (v < INT32_MIN || v > INT32_MAX) invalid(field, "integer out of range");
  return static_cast<int>(v);
}

std::vector<double> checked_profile(Reader& r, const std::string& key, int d) {
  std::vector<double> v = r.numbers(key);
  require(v.size() == static_cast<std::size_t>(d) + 1, key, "an array of d + 1 entries");
  try {
    validate_profile(v);
  } catch (const Error& e) {
    invalid(key, e.what());
  }
  return v;
}

void parse_into(RunConfig& c, Reader& r) {
  for (const char* key : {"model", "alpha", "lambda", "d", "seed"}) {
    if (!r.has(key)) invalid(key, "required key missing");
  }
  const std::string model = r.string("model");
  if (model == "discrete") c.model = Model::Discrete;
  else if (model == "diffusion") c.model = Model::Diffusion;
  else if (model == "aggregated") c.model = Model::Aggregated;
  else invalid("model", "must be one of discrete, diffusion, aggregated");

  c.params.alpha = r.number("alpha");
  require(c.params.alpha >= 0.0, "alpha", ">= 0");
  if (c.model == Model::Discrete) require(c.params.alpha < 1.0, "alpha", "< 1 for the discrete model");
  c.params.lambda = r.number("lambda");
  require(c.params.lambda >= 0.0, "lambda", ">= 0");
  c.params.d = as_int(r.integer("d"), "d");
  require(c.params.d >= 1 && c.params.d <= 10000, "d", "in [1, 10000]");
  c.seed = r.unsigned_integer("seed");

  if (r.has("experiment")) {
    try {
      c.experiment = parse_experiment(r.string("experiment"));
    } catch (const Error&) {
      invalid("experiment", "unknown experiment name");
    }
  }
  if (r.has("threads")) {
    c.threads = as_int(r.integer("threads"), "threads");
    require(*c.threads >= 1, "threads", ">= 1");
  }

  if (r.has("dt")) c.integrator.dt = r.number("dt");
  require(c.integrator.dt > 0.0 && c.integrator.dt <= 0.1, "dt", "in (0, 0.1]");
  if (r.has("t_max")) c.integrator.t_max = r.number("t_max");
  require(c.integrator.t_max > 0.0, "t_max", "> 0");
  if (r.has("record_stride")) c.integrator.record_stride = as_int(r.integer("record_stride"), "record_stride");
  require(c.integrator.record_stride >= 1, "record_stride", ">= 1");
  if (r.has("scheme")) {
    const std::string scheme = r.string("scheme");
    require(scheme == "hybrid" || scheme == "euler_clip", "scheme", "one of hybrid, euler_clip");
    c.integrator.scheme = scheme == "hybrid" ? Scheme::Hybrid : Scheme::EulerClip;
  }

  if (r.has("replicates")) {
    const long long v = r.integer("replicates");
    require(v >= 1, "replicates", ">= 1");
    c.replicates = static_cast<std::size_t>(v);
  }
  if (r.has("particles")) {
    const long long v = r.integer("particles");
    require(v >= 2, "particles", ">= 2 (Fleming-Viot needs a partner to restart from)");
    c.particles = static_cast<std::size_t>(v);
  }
  if (r.has("horizon")) c.horizon = r.number("horizon");
  require(c.horizon > 0.0, "horizon", "> 0");
  if (r.has("burn_in_fraction")) c.fv.burn_in_fraction = r.number("burn_in_fraction");
  require(c.fv.burn_in_fraction >= 0.0 && c.fv.burn_in_fraction < 1.0, "burn_in_fraction", "in [0, 1)");
  if (r.has("snapshot_interval")) c.fv.snapshot_interval = r.number("snapshot_interval");
  require(c.fv.snapshot_interval > 0.0, "snapshot_interval", "> 0");
  if (r.has("batches")) c.fv.batches = as_int(r.integer("batches"), "batches");
  require(c.fv.batches >= 2, "batches", ">= 2");
  if (r.has("delta_t")) c.delta_t = r.number("delta_t");
  require(c.delta_t >= 0.0, "delta_t", ">= 0");
  if (r.has("bins")) c.bins = as_int(r.integer("bins"), "bins");
  require(c.bins >= 2 && c.bins <= 1000, "bins", "in [2, 1000]");

  if (r.has("k")) c.k = as_int(r.integer("k"), "k");
  require(c.k >= 0 && c.k <= c.params.d, "k", "in [0, d]");
  if (c.model == Model::Aggregated) require(c.k >= 1, "k", ">= 1 for the aggregated model");

  if (r.has("population_size")) {
    c.population_size = r.unsigned_integer("population_size");
    require(c.population_size >= 1, "population_size", ">= 1");
  }
  if (r.has("population_sizes")) {
    for (long long v : r.integers("population_sizes")) {
      require(v >= 1, "population_sizes", "an array of integers >= 1");
      c.population_sizes.push_back(static_cast<std::uint64_t>(v));
    }
  }
  if (r.has("generations")) c.generations = r.integer("generations");
  require(c.generations >= 0, "generations", ">= 0");

  if (r.has("d_list")) {
    for (long long v : r.integers("d_list")) {
      require(v >= 1 && v <= 10000, "d_list", "an increasing array of integers in [1, 10000]");
      require(c.d_list.empty() || v > c.d_list.back(), "d_list", "an increasing array of integers in [1, 10000]");
      c.d_list.push_back(static_cast<int>(v));
    }
  }
  if (r.has("moment_order")) c.moment_order = as_int(r.integer("moment_order"), "moment_order");
  require(c.moment_order >= 1 && c.moment_order <= 4, "moment_order", "in [1, 4]");
  if (r.has("quantile")) c.quantile = r.number("quantile");
  require(c.quantile > 0.0 && c.quantile < 1.0, "quantile", "in (0, 1)");

  if (r.has("guard")) c.guard = r.number("guard");
  require(c.guard >= 0.0, "guard", ">= 0");
  if (r.has("rho0")) {
    c.rho0 = r.number("rho0");
    require(*c.rho0 >= 0.0, "rho0", ">= 0");
  }

  if (r.has("ks")) {
    c.ks.clear();
    for (long long v : r.integers("ks")) {
      require(v >= 0 && v <= c.params.d, "ks", "an array of class indices in [0, d]");
      c.ks.push_back(static_cast<int>(v));
    }
  }
  if (r.has("t_grid")) {
    c.t_grid = r.numbers("t_grid");
    for (std::size_t i = 0; i < c.t_grid.size(); ++i) {
      require(c.t_grid[i] >= 0.0 && (i == 0 || c.t_grid[i] > c.t_grid[i - 1]), "t_grid",
              "a nonnegative increasing array");
    }
    require(!c.t_grid.empty(), "t_grid", "nonempty");
  }
  if (r.has("grid_step")) c.grid_step = r.number("grid_step");
  require(c.grid_step > 0.0, "grid_step", "> 0");
  if (r.has("min_survival")) c.min_survival = r.number("min_survival");
  require(c.min_survival >= 0.0 && c.min_survival <= 1.0, "min_survival", "in [0, 1]");
  if (r.has("bootstrap")) c.bootstrap = as_int(r.integer("bootstrap"), "bootstrap");
  require(c.bootstrap >= 0, "bootstrap", ">= 0");

  if (r.has("initial_profile")) c.initial_profile = checked_profile(r, "initial_profile", c.params.d);
  if (r.has("initial_profile_b")) c.initial_profile_b = checked_profile(r, "initial_profile_b", c.params.d);
  if (r.has("head")) c.head = r.numbers("head");
  if (r.has("tail_a")) c.tail_a = r.numbers("tail_a");
  if (r.has("tail_b")) c.tail_b = r.numbers("tail_b");
  if (!c.head.empty() || !c.tail_a.empty() || !c.tail_b.empty()) {
    require(c.k >= 1, "k", ">= 1 when head/tail profiles are given");
    require(c.head.size() == static_cast<std::size_t>(c.k), "head", "an array of k entries");
    const std::size_t tail = static_cast<std::size_t>(c.params.d - c.k + 1);
    require(c.tail_a.size() == tail, "tail_a", "an array of d - k + 1 entries");
    require(c.tail_b.size() == tail, "tail_b", "an array of d - k + 1 entries");
  }

  if (r.has("relaxation_time")) {
    c.relaxation_time = r.number("relaxation_time");
    require(*c.relaxation_time > 0.0, "relaxation_time", "> 0");
  }

  r.reject_unknown();
}

}  // namespace

std::string_view to_string(Model m) {
  switch (m) {
    case Model::Discrete: return "discrete";
    case Model::Diffusion: return "diffusion";
    case Model::Aggregated: return "aggregated";
  }
  return "unknown";
}

std::string_view to_string(Experiment e) {
  for (const auto& [value, name] : kExperiments) {
    if (value == e) return name;
  }
  return "unknown";
}

Experiment parse_experiment(std::string_view name) {
  for (const auto& [value, label] : kExperiments) {
    if (label == name) return value;
  }
  throw Error(ErrorCode::ValidationError, "experiment: unknown experiment '" + std::string(name) + "'");
}

RunConfig parse_config_text(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw Error(ErrorCode::ParseError,
                "line " + std::to_string(line) + ", column " + std::to_string(col) + ": invalid JSON");
  }
  if (!doc.is_object()) throw Error(ErrorCode::ParseError, "line 1: top level must be a JSON object");
  RunConfig c;
  Reader r(doc);
  parse_into(c, r);
  return c;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

nlohmann::ordered_json resolved_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["model"] = to_string(c.model);
  if (c.experiment) j["experiment"] = to_string(*c.experiment);
  j["alpha"] = c.params.alpha;
  j["lambda"] = c.params.lambda;
  j["d"] = c.params.d;
  j["seed"] = c.seed;
  j["dt"] = c.integrator.dt;
  j["t_max"] = c.integrator.t_max;
  j["record_stride"] = c.integrator.record_stride;
  j["scheme"] = c.integrator.scheme == Scheme::Hybrid ? "hybrid" : "euler_clip";
  j["replicates"] = c.replicates;
  j["particles"] = c.particles;
  j["horizon"] = c.horizon;
  j["burn_in_fraction"] = c.fv.burn_in_fraction;
  j["snapshot_interval"] = c.fv.snapshot_interval;
  j["batches"] = c.fv.batches;
  j["delta_t"] = c.delta_t;
  j["bins"] = c.bins;
  j["k"] = c.k;
  j["population_size"] = c.population_size;
  if (!c.population_sizes.empty()) j["population_sizes"] = c.population_sizes;
  j["generations"] = c.generations;
  if (!c.d_list.empty()) j["d_list"] = c.d_list;
  j["moment_order"] = c.moment_order;
  j["quantile"] = c.quantile;
  j["guard"] = c.guard;
  if (c.rho0) j["rho0"] = *c.rho0;
  j["ks"] = c.ks;
  if (!c.t_grid.empty()) j["t_grid"] = c.t_grid;
  j["grid_step"] = c.grid_step;
  j["min_survival"] = c.min_survival;
  j["bootstrap"] = c.bootstrap;
  if (c.initial_profile) j["initial_profile"] = *c.initial_profile;
  if (c.initial_profile_b) j["initial_profile_b"] = *c.initial_profile_b;
  if (!c.head.empty()) {
    j["head"] = c.head;
    j["tail_a"] = c.tail_a;
    j["tail_b"] = c.tail_b;
  }
  if (c.relaxation_time) j["relaxation_time"] = *c.relaxation_time;
  return j;
}

std::string config_digest(const RunConfig& c) {
  const std::string text = resolved_json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

std::vector<double> effective_grid(const RunConfig& c) {
  if (!c.t_grid.empty()) return c.t_grid;
  std::vector<double> grid;
  const long long n = std::llround(std::floor(c.integrator.t_max / c.grid_step + 1e-9));
  for (long long i = 0; i <= n; ++i) grid.push_back(static_cast<double>(i) * c.grid_step);
  return grid;
}

}  // namespace ratchet
