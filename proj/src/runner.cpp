#include "ratchet/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "ratchet/diagnostics.hpp"
#include "ratchet/discrete_model.hpp"
#include "ratchet/error.hpp"
#include "ratchet/parallel.hpp"

#ifndef RATCHET_VERSION
#define RATCHET_VERSION "unknown"
#endif

namespace ratchet {

using Json = nlohmann::ordered_json;

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int exit_code_for(ErrorCode code) { return is_statistical(code) ? 2 : 1; }

namespace {

class Csv {
 public:
  explicit Csv(std::vector<std::string> header) : header_(std::move(header)) {}

  struct Row {
    std::vector<std::string> cells;
    Row& operator<<(double v) {
      cells.push_back(format_real(v));
      return *this;
    }
    Row& operator<<(long long v) {
      cells.push_back(std::to_string(v));
      return *this;
    }
    Row& operator<<(std::uint64_t v) {
      cells.push_back(std::to_string(v));
      return *this;
    }
    Row& operator<<(int v) { return *this << static_cast<long long>(v); }
    Row& operator<<(const std::string& v) {
      cells.push_back(quote(v));
      return *this;
    }
  };

  Row& row() { return rows_.emplace_back(); }

  void write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    emit(out, header_);
    for (const Row& r : rows_) {
      if (r.cells.size() != header_.size()) throw Error(ErrorCode::IoError, "CSV row width mismatch");
      emit(out, r.cells);
    }
  }

 private:
  static std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + '"';
  }

  static void emit(std::ostream& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out << ',';
      out << cells[i];
    }
    out << "\r\n";
  }

  std::vector<std::string> header_;
  std::vector<Row> rows_;
};

struct Outcome {
  Json estimates = Json::object();
  Json flags = Json::object();
  Json extra = Json::object();
  Csv series{std::vector<std::string>{}};

  void estimate(const std::string& name, double value, double stderr_ = std::nan("")) {
    Json e;
    e["value"] = value;
    e["stderr"] = stderr_;
    estimates[name] = e;
  }
  void estimate(const std::string& name, const Estimate& e) { estimate(name, e.value, e.stderr_); }
};

std::uint32_t experiment_index(Experiment e) { return static_cast<std::uint32_t>(e) + 1; }

void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void require_model(const RunConfig& cfg, std::initializer_list<Model> allowed, Experiment e) {
  for (Model m : allowed) {
    if (cfg.model == m) return;
  }
  throw Error(ErrorCode::ValidationError, "model: '" + std::string(to_string(cfg.model)) +
                                              "' is not supported by experiment '" + std::string(to_string(e)) + "'");
}

Profile default_start(const RunConfig& cfg) {
  if (cfg.initial_profile) return validate_profile(*cfg.initial_profile);
  if (cfg.params.alpha > 0.0) return poisson_profile(cfg.params);
  return Profile::point_mass(cfg.params.d, 0);
}

QsdOptions qsd_options(const RunConfig& cfg) {
  QsdOptions o;
  o.particles = cfg.particles;
  o.horizon = cfg.horizon;
  o.fv = cfg.fv;
  if (cfg.initial_profile) o.initial = validate_profile(*cfg.initial_profile);
  return o;
}

void add_moments(Outcome& out, const QsdEstimate& q) {
  out.estimate("rho0", q.rho0);
  out.estimate("t_c", q.t_c(), q.rho0.stderr_ / (q.rho0.value * q.rho0.value));
  for (int k = 1; k <= 4; ++k) out.estimate("mean_m" + std::to_string(k), q.moments[static_cast<std::size_t>(k - 1)]);
  out.extra["pooled_samples"] = q.ensemble.size();
}

void summary_row(Csv::Row& row, std::span<const double> x) {
  row << x[0] << moment(x, 1) << moment(x, 2) << moment(x, 3);
}

// --- experiments -----------------------------------------------------------

Outcome run_simulate(const RunConfig& cfg, const StreamFactory& streams) {
  Outcome out;
  const Profile x0 = default_start(cfg);
  const std::size_t n = cfg.replicates;

  if (cfg.model == Model::Discrete) {
    const DiscreteParams dp =
        DiscreteParams::make(cfg.params.alpha, cfg.params.lambda, cfg.population_size, cfg.params.d);
    const DiscretePopulation pop0 = population_from_profile(x0, cfg.population_size);
    std::vector<DiscreteClickResult> runs(n);
    parallel_for(n, [&](std::size_t r) {
      RandomStream rng = streams.stream(r);
      runs[r] = simulate_until_click(pop0, dp, cfg.generations, rng);
    });
    out.series = Csv({"replicate", "generation", "x0", "m1", "m2", "m3"});
    std::vector<double> clicks, final_m1;
    for (std::size_t r = 0; r < n; ++r) {
      const auto& path = runs[r].path;
      for (std::size_t g = 0; g < path.size(); ++g) {
        if (g % static_cast<std::size_t>(cfg.integrator.record_stride) != 0 && g + 1 != path.size()) continue;
        const GenerationSummary& s = path[g];
        out.series.row() << static_cast<std::uint64_t>(r) << s.generation << s.x0 << s.m1 << s.m2 << s.m3;
      }
      if (runs[r].click_generation) clicks.push_back(static_cast<double>(*runs[r].click_generation));
      final_m1.push_back(path.back().m1);
    }
    out.estimate("click_fraction", static_cast<double>(clicks.size()) / static_cast<double>(n));
    if (!clicks.empty()) {
      const auto m = stats::mean_estimate(clicks);
      out.estimate("mean_click_generation", m.mean, m.stderr_);
    }
    const auto m1 = stats::mean_estimate(final_m1);
    out.estimate("final_mean_m1", m1.mean, m1.stderr_);
    return out;
  }

  std::vector<Trajectory> paths(n);
  parallel_for(n, [&](std::size_t r) {
    RandomStream rng = streams.stream(r);
    paths[r] = cfg.model == Model::Aggregated ? simulate_aggregated_path(x0, cfg.params, cfg.k, cfg.integrator, rng)
                                              : simulate_path(x0, cfg.params, cfg.integrator, rng);
  });
  out.series = Csv({"replicate", "time", "x0", "m1", "m2", "m3"});
  std::vector<double> clicks, final_m1;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < paths[r].times.size(); ++i) {
      auto& row = out.series.row() << static_cast<std::uint64_t>(r) << paths[r].times[i];
      summary_row(row, paths[r].states[i].freqs());
    }
    if (paths[r].click_time) clicks.push_back(*paths[r].click_time);
    final_m1.push_back(moment(paths[r].states.back().freqs(), 1));
  }
  out.estimate("click_fraction", static_cast<double>(clicks.size()) / static_cast<double>(n));
  if (!clicks.empty()) {
    const auto m = stats::mean_estimate(clicks);
    out.estimate("mean_click_time", m.mean, m.stderr_);
  }
  const auto m1 = stats::mean_estimate(final_m1);
  out.estimate("final_mean_m1", m1.mean, m1.stderr_);
  return out;
}

Outcome run_qsd(const RunConfig& cfg, const StreamFactory& streams) {
  Outcome out;
  const QsdEstimate q = estimate_qsd(cfg.params, cfg.integrator, qsd_options(cfg), streams);
  add_moments(out, q);
  out.estimate("quantile_m" + std::to_string(cfg.moment_order), moment_quantile(q, cfg.moment_order, cfg.quantile));
  if (cfg.delta_t > 0.0) {
    const PushforwardReport pf =
        qsd_pushforward_check(q, cfg.params, cfg.delta_t, cfg.integrator, streams.with_tag(streams.tag() + 1), cfg.bins);
    out.estimate("pushforward_tv", pf.tv);
    out.extra["pushforward_survivors"] = pf.survivors;
    out.flags["pushforward_tv_below_0.05"] = pf.tv < 0.05;
  }
  out.series = Csv({"index", "batch", "x0", "m1", "m2", "m3"});
  for (std::size_t i = 0; i < q.ensemble.size(); ++i) {
    auto& row = out.series.row() << static_cast<std::uint64_t>(i) << q.batch[i];
    summary_row(row, q.ensemble.particles[i].freqs());
  }
  return out;
}

Outcome run_eta(const RunConfig& cfg, const StreamFactory& streams) {
  Outcome out;
  double rho0 = 0.0;
  if (cfg.rho0) {
    rho0 = *cfg.rho0;
  } else {
    RunConfig qcfg = cfg;
    qcfg.initial_profile.reset();
    const QsdEstimate q = estimate_qsd(cfg.params, cfg.integrator, qsd_options(qcfg), streams);
    rho0 = q.rho0.value;
    out.estimate("rho0", q.rho0);
  }
  const Profile x = default_start(cfg);
  const EtaCurve eta =
      estimate_eta(x, cfg.params, rho0, cfg.integrator, cfg.replicates, streams.with_tag(streams.tag() + 1));
  out.estimate("eta_plateau", eta.plateau);
  out.extra["plateau_window"] = {eta.plateau_lo, eta.plateau_hi};
  out.extra["rho0_used"] = rho0;
  out.series = Csv({"time", "eta", "stderr", "survivors"});
  for (std::size_t i = 0; i < eta.times.size(); ++i) {
    out.series.row() << eta.times[i] << eta.eta[i] << eta.stderr_[i] << eta.survivors[i];
  }
  return out;
}

Outcome run_qprocess(const RunConfig& cfg, const StreamFactory& streams) {
  Outcome out;
  const Profile x0 = default_start(cfg);
  const QProcessSample s = sample_qprocess(x0, cfg.params, cfg.integrator.t_max, cfg.guard, cfg.integrator,
                                           cfg.replicates, streams);
  out.estimate("acceptance_rate", s.acceptance_rate);
  out.extra["accepted"] = s.paths.size();
  out.extra["attempted"] = s.attempted;
  std::vector<double> m1, x0s;
  out.series = Csv({"path", "time", "x0", "m1", "m2", "m3"});
  for (std::size_t r = 0; r < s.paths.size(); ++r) {
    const Trajectory& tr = s.paths[r];
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
      auto& row = out.series.row() << static_cast<std::uint64_t>(r) << tr.times[i];
      summary_row(row, tr.states[i].freqs());
    }
    m1.push_back(moment(tr.states.back().freqs(), 1));
    x0s.push_back(tr.states.back()[0]);
  }
  const auto em1 = stats::mean_estimate(m1);
  const auto ex0 = stats::mean_estimate(x0s);
  out.estimate("final_mean_m1", em1.mean, em1.stderr_);
  out.estimate("final_mean_x0", ex0.mean, ex0.stderr_);
  return out;
}

Outcome run_correlations(const RunConfig& cfg, const StreamFactory& streams) {
  Outcome out;
  RunConfig qcfg = cfg;
  qcfg.initial_profile.reset();
  const QsdEstimate q = estimate_qsd(cfg.params, cfg.integrator, qsd_options(qcfg), streams);
  add_moments(out, q);
  const std::vector<double> grid = effective_grid(cfg);
  const CorrelationReport rep = correlation_decay(q, cfg.params, cfg.ks, grid, cfg.integrator, cfg.replicates,
                                                  streams.with_tag(streams.tag() + 1), cfg.min_survival,
                                                  cfg.bootstrap);
  out.extra["gate_time"] = rep.gate_time;
  out.series = Csv({"k", "time", "survival", "corr", "band_lo", "band_hi"});
  bool all_cross = true;
  for (const CorrelationSeries& s : rep.series) {
    for (std::size_t j = 0; j < rep.times.size(); ++j) {
      out.series.row() << s.k << rep.times[j] << rep.survival[j] << s.corr[j] << s.band_lo[j] << s.band_hi[j];
    }
    const auto cross = s.crossing_time(rep.times, 0.1);
    const std::string name = "crossing_time_k" + std::to_string(s.k);
    if (cross) out.estimate(name, *cross);
    const bool early = cross && *cross < q.t_c() / 2.0;
    out.flags["crosses_0.1_before_half_t_c_k" + std::to_string(s.k)] = early;
    all_cross = all_cross && early;
  }
  out.flags["all_cross_before_half_t_c"] = all_cross;
  return out;
}

Outcome run_relaxation(const RunConfig& cfg, const StreamFactory& streams) {
  Outcome out;
  const Profile xa = cfg.initial_profile ? validate_profile(*cfg.initial_profile) : Profile::point_mass(cfg.params.d, 0);
  const Profile xb = cfg.initial_profile_b ? validate_profile(*cfg.initial_profile_b) : poisson_profile(cfg.params);
  const RelaxationFit fit = relaxation_rate_fit(xa, xb, cfg.params, effective_grid(cfg), cfg.integrator,
                                                cfg.replicates, streams, cfg.bins, cfg.bootstrap);
  out.estimate("gamma", fit.gamma);
  out.estimate("relaxation_time", fit.relaxation_time());
  out.series = Csv({"time", "tv", "noise_floor", "survivors_a", "survivors_b", "in_window"});
  for (std::size_t j = 0; j < fit.times.size(); ++j) {
    const bool in = std::find(fit.window.begin(), fit.window.end(), j) != fit.window.end();
    out.series.row() << fit.times[j] << fit.tv[j] << fit.noise_floor[j]
                     << static_cast<std::uint64_t>(fit.survivors_a[j]) << static_cast<std::uint64_t>(fit.survivors_b[j])
                     << (in ? 1 : 0);
  }
  return out;
}

Outcome run_tightness(const RunConfig& cfg, const StreamFactory& streams) {
  Outcome out;
  std::vector<int> d_list = cfg.d_list.empty() ? std::vector<int>{cfg.params.d} : cfg.d_list;
  RunConfig qcfg = cfg;
  qcfg.initial_profile.reset();
  const auto rows = moment_tightness_scan(cfg.params, d_list, cfg.moment_order, cfg.quantile, cfg.integrator,
                                          qsd_options(qcfg), streams);
  out.series = Csv({"d", "quantile", "quantile_stderr", "rho0", "rho0_stderr", "mean_m1", "mean_m1_stderr",
                    "holder_violations", "samples"});
  Json table = Json::array();
  std::size_t violations = 0;
  for (const TightnessRow& r : rows) {
    out.series.row() << r.d << r.quantile.value << r.quantile.stderr_ << r.rho0.value << r.rho0.stderr_
                     << r.mean_m1.value << r.mean_m1.stderr_ << static_cast<std::uint64_t>(r.holder_violations)
                     << static_cast<std::uint64_t>(r.samples);
    Json row;
    row["d"] = r.d;
    row["quantile"] = {{"value", r.quantile.value}, {"stderr", r.quantile.stderr_}};
    row["rho0"] = {{"value", r.rho0.value}, {"stderr", r.rho0.stderr_}};
    row["mean_m1"] = {{"value", r.mean_m1.value}, {"stderr", r.mean_m1.stderr_}};
    row["holder_violations"] = r.holder_violations;
    row["samples"] = r.samples;
    table.push_back(row);
    violations += r.holder_violations;
  }
  out.extra["table"] = table;
  out.flags["holder_holds"] = violations == 0;
  if (rows.size() >= 2) {
    const TightnessRow& a = rows.front();
    const TightnessRow& b = rows.back();
    const auto agree = [](const Estimate& x, const Estimate& y) {
      return std::abs(x.value - y.value) <= 2.0 * std::hypot(x.stderr_, y.stderr_);
    };
    out.flags["quantile_agrees_first_last"] = agree(a.quantile, b.quantile);
    out.flags["rho0_agrees_first_last"] = agree(a.rho0, b.rho0);
  }
  return out;
}

Outcome run_autonomy(const RunConfig& cfg, const StreamFactory& streams) {
  Outcome out;
  if (cfg.k < 1) throw Error(ErrorCode::ValidationError, "k: must be >= 1 for the autonomy experiment");
  std::vector<double> head = cfg.head, tail_a = cfg.tail_a, tail_b = cfg.tail_b;
  if (head.empty()) {
    const Profile base = poisson_profile(cfg.params);
    double mass = 0.0;
    for (int i = 0; i < cfg.k; ++i) {
      head.push_back(base[static_cast<std::size_t>(i)]);
      mass += head.back();
    }
    const std::size_t tail = static_cast<std::size_t>(cfg.params.d - cfg.k + 1);
    tail_a.assign(tail, 0.0);
    tail_b.assign(tail, 0.0);
    tail_a.front() = 1.0 - mass;
    tail_b.back() = 1.0 - mass;
  }
  const bool aggregated = cfg.model == Model::Aggregated;
  const AutonomyReport rep = pi_k_autonomy_test(head, tail_a, tail_b, cfg.params, cfg.k, cfg.integrator.t_max,
                                                cfg.integrator, cfg.replicates, streams, aggregated);
  out.estimate("min_p", rep.min_p);
  out.estimate("corrected_min_p", rep.corrected_min_p);
  out.extra["dynamics"] = aggregated ? "aggregated" : "full";
  out.flags["rejects_at_0.01"] = rep.rejects(0.01);
  out.series = Csv({"observable", "ks_statistic", "p_value"});
  for (std::size_t i = 0; i < rep.tests.size(); ++i) {
    out.series.row() << rep.labels[i] << rep.tests[i].statistic << rep.tests[i].p_value;
  }
  return out;
}

Outcome run_compare(const RunConfig& cfg, const StreamFactory& streams) {
  Outcome out;
  std::vector<std::uint64_t> sizes =
      cfg.population_sizes.empty() ? std::vector<std::uint64_t>{cfg.population_size} : cfg.population_sizes;
  const Profile x0 = cfg.initial_profile ? validate_profile(*cfg.initial_profile) : Profile::point_mass(cfg.params.d, 0);
  out.series = Csv({"n", "generations", "discrete_m1", "discrete_m1_stderr", "diffusion_m1", "diffusion_m1_stderr",
                    "m1_relative_gap", "m1_relative_gap_stderr", "discrete_x0", "diffusion_x0", "x0_relative_gap",
                    "x0_relative_gap_stderr", "m1_variance_relative_gap"});
  std::vector<CompareReport> reps;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    reps.push_back(discrete_vs_diffusion_compare(sizes[i], cfg.params, cfg.integrator.t_max, x0, cfg.integrator,
                                                 cfg.replicates, streams.with_tag(streams.tag() + i)));
    const CompareReport& r = reps.back();
    out.series.row() << r.n << r.generations << r.discrete.m1.mean << r.discrete.m1.stderr_ << r.diffusion.m1.mean
                     << r.diffusion.m1.stderr_ << r.m1_relative_gap.value << r.m1_relative_gap.stderr_
                     << r.discrete.x0.mean << r.diffusion.x0.mean << r.x0_relative_gap.value
                     << r.x0_relative_gap.stderr_ << r.m1_variance_relative_gap;
    const std::string tag = "_n" + std::to_string(r.n);
    out.estimate("m1_relative_gap" + tag, r.m1_relative_gap);
    out.estimate("x0_relative_gap" + tag, r.x0_relative_gap);
  }
  out.flags["m1_gap_below_0.1"] = reps.front().m1_relative_gap.value < 0.1;
  if (reps.size() >= 2) {
    bool monotone = true;
    for (std::size_t i = 1; i < reps.size(); ++i) {
      const Estimate& a = reps[i - 1].m1_relative_gap;
      const Estimate& b = reps[i].m1_relative_gap;
      monotone = monotone && b.value <= a.value + 2.0 * std::hypot(a.stderr_, b.stderr_);
    }
    out.flags["m1_gap_non_increasing"] = monotone;
  }
  return out;
}

Outcome run_clickstats(const RunConfig& cfg, const StreamFactory& streams) {
  Outcome out;
  std::vector<Profile> starts;
  std::optional<Estimate> fv_rate;
  if (cfg.initial_profile) {
    starts.push_back(validate_profile(*cfg.initial_profile));
  } else {
    QsdEstimate q = estimate_qsd(cfg.params, cfg.integrator, qsd_options(cfg), streams);
    add_moments(out, q);
    fv_rate = q.rho0;
    starts = std::move(q.ensemble.particles);
  }
  const ClickSample cs = sample_click_times(starts, cfg.params, cfg.integrator, cfg.replicates,
                                            streams.with_tag(streams.tag() + 1));
  const ClickStatsReport rep = click_statistics(cs.click_times, cfg.relaxation_time);
  out.estimate("mean_click_time", rep.mean);
  out.estimate("median_click_time", rep.median);
  for (const auto& [level, value] : rep.quantiles) out.estimate("click_time_q" + format_real(level), value);
  out.estimate("ks_statistic_vs_exponential", rep.exponential_fit.statistic);
  out.estimate("ks_p_vs_exponential", rep.exponential_fit.p_value);
  out.extra["censored"] = cs.censored;
  out.flags["exponential_fit_p_above_0.01"] = rep.exponential_fit.p_value > 0.01;
  if (rep.relaxation_time) out.flags["metastable"] = rep.metastable;

  const double hi = std::min(3.0 * rep.mean, cs.survival.times.back());
  RandomStream boot = streams.with_tag(streams.tag() + 2).stream(0);
  const Estimate slope = estimate_rho0(cs.survival, 0.0, hi, boot);
  out.estimate("rho0_survival_slope", slope);
  if (fv_rate) {
    out.flags["rho0_slope_agrees_with_restart_rate"] =
        std::abs(slope.value - fv_rate->value) <= 2.0 * std::hypot(slope.stderr_, fv_rate->stderr_);
  }
  out.series = Csv({"replicate_rank", "click_time"});
  for (std::size_t i = 0; i < cs.click_times.size(); ++i) {
    out.series.row() << static_cast<std::uint64_t>(i) << cs.click_times[i];
  }
  return out;
}

Outcome dispatch(const RunConfig& cfg, Experiment e, const StreamFactory& streams) {
  switch (e) {
    case Experiment::Simulate:
      return run_simulate(cfg, streams);
    case Experiment::Compare:
      return run_compare(cfg, streams);
    case Experiment::Autonomy:
      require_model(cfg, {Model::Diffusion, Model::Aggregated}, e);
      return run_autonomy(cfg, streams);
    default:
      break;
  }
  require_model(cfg, {Model::Diffusion}, e);
  switch (e) {
    case Experiment::Qsd: return run_qsd(cfg, streams);
    case Experiment::Eta: return run_eta(cfg, streams);
    case Experiment::QProcess: return run_qprocess(cfg, streams);
    case Experiment::Correlations: return run_correlations(cfg, streams);
    case Experiment::Relaxation: return run_relaxation(cfg, streams);
    case Experiment::Tightness: return run_tightness(cfg, streams);
    case Experiment::ClickStats: return run_clickstats(cfg, streams);
    default: break;
  }
  throw Error(ErrorCode::ValidationError, "experiment: not dispatchable");
}

}  // namespace

int run(const RunConfig& cfg, Experiment experiment, const std::filesystem::path& out_dir) {
  const std::string digest = config_digest(cfg);
  auto fail = [&](ErrorCode code, const std::string& message) {
    const int exit_code = exit_code_for(code);
    Json err;
    err["schema_version"] = kSchemaVersion;
    err["experiment"] = to_string(experiment);
    err["config_digest"] = digest;
    err["error"] = to_string(code);
    err["message"] = message;
    err["exit_code"] = exit_code;
    std::cerr << err.dump() << '\n';
    try {
      write_json(out_dir / "error.json", err);
    } catch (const std::exception&) {
    }
    return exit_code;
  };

  try {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + out_dir.string() + ": " + ec.message());
    if (cfg.experiment && *cfg.experiment != experiment) {
      throw Error(ErrorCode::ValidationError, "experiment: config names '" + std::string(to_string(*cfg.experiment)) +
                                                  "' but '" + std::string(to_string(experiment)) + "' was requested");
    }
    if (cfg.threads) set_thread_count(*cfg.threads);

    const StreamFactory streams(cfg.seed, stream_tag(experiment_index(experiment), 0));
    Outcome out = dispatch(cfg, experiment, streams);

    Json summary;
    summary["schema_version"] = kSchemaVersion;
    summary["experiment"] = to_string(experiment);
    summary["config_digest"] = digest;
    summary["code_version"] = RATCHET_VERSION;
    summary["seed"] = cfg.seed;
    summary["estimates"] = out.estimates;
    summary["flags"] = out.flags;
    for (auto& [key, value] : out.extra.items()) summary[key] = value;

    std::filesystem::remove(out_dir / "error.json", ec);
    write_json(out_dir / "config.json", resolved_json(cfg));
    out.series.write(out_dir / "series.csv");
    write_json(out_dir / "summary.json", summary);
    return 0;
  } catch (const Error& e) {
    return fail(e.code(), e.what());
  } catch (const std::exception& e) {
    return fail(ErrorCode::InvalidArgument, e.what());
  }
}

}  // namespace ratchet
