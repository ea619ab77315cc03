#include "ratchet/qsd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ratchet/error.hpp"
#include "ratchet/parallel.hpp"

namespace ratchet {

ParticleEnsemble ParticleEnsemble::uniform(std::vector<Profile> particles) {
  ParticleEnsemble e;
  const std::size_t n = particles.size();
  e.particles = std::move(particles);
  e.weights.assign(n, n == 0 ? 0.0 : 1.0 / static_cast<double>(n));
  e.ids.resize(n);
  std::iota(e.ids.begin(), e.ids.end(), std::uint64_t{0});
  return e;
}

ParticleEnsemble ParticleEnsemble::replicate(const Profile& x, std::size_t n) {
  return uniform(std::vector<Profile>(n, x));
}

void ParticleEnsemble::validate() const {
  if (particles.empty()) throw Error(ErrorCode::InvalidArgument, "ensemble is empty");
  if (weights.size() != particles.size() || ids.size() != particles.size()) {
    throw Error(ErrorCode::InvalidArgument, "ensemble arrays differ in length");
  }
  // Neumaier summation keeps large uniform ensembles inside the tolerance.
  double sum = 0.0, carry = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw Error(ErrorCode::InvalidArgument, "negative ensemble weight");
    const double t = sum + w;
    carry += std::abs(sum) >= std::abs(w) ? (sum - t) + w : (w - t) + sum;
    sum = t;
  }
  sum += carry;
  if (std::abs(sum - 1.0) > kIdentityTol) throw Error(ErrorCode::InvalidArgument, "ensemble weights not normalized");
}

void SurvivalCurve::validate() const {
  if (times.size() != survivors.size()) throw Error(ErrorCode::InvalidArgument, "survival curve size mismatch");
  for (std::size_t i = 0; i < survivors.size(); ++i) {
    if (survivors[i] > total) throw Error(ErrorCode::InvalidArgument, "more survivors than replicates");
    if (i > 0 && (survivors[i] > survivors[i - 1] || !(times[i] > times[i - 1]))) {
      throw Error(ErrorCode::InvalidArgument, "survival curve must be nonincreasing on an increasing grid");
    }
  }
}

namespace {

// Grid steps 0, stride, 2*stride, ... plus the final step.
std::vector<long long> grid_steps(long long steps, int stride) {
  std::vector<long long> g;
  for (long long s = 0; s <= steps; s += stride) g.push_back(s);
  if (g.back() != steps) g.push_back(steps);
  return g;
}

// click_step = 0 marks a replicate that never clicked.
SurvivalCurve survival_from_clicks(std::span<const long long> click_step, const std::vector<long long>& grid,
                                   double dt) {
  SurvivalCurve sc;
  sc.total = click_step.size();
  std::vector<long long> sorted;
  sorted.reserve(click_step.size());
  for (long long c : click_step) {
    if (c > 0) sorted.push_back(c);
  }
  std::sort(sorted.begin(), sorted.end());
  for (long long s : grid) {
    const auto dead = static_cast<std::uint64_t>(std::upper_bound(sorted.begin(), sorted.end(), s) - sorted.begin());
    sc.times.push_back(static_cast<double>(s) * dt);
    sc.survivors.push_back(sc.total - dead);
  }
  return sc;
}

long long steps_for(double horizon, double dt) {
  if (horizon < 0.0) throw Error(ErrorCode::InvalidArgument, "horizon must be >= 0");
  return std::llround(horizon / dt);
}

void check_cfg(const IntegratorConfig& cfg) {
  if (!(cfg.dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "dt must be > 0");
  if (cfg.record_stride < 1) throw Error(ErrorCode::InvalidArgument, "record_stride must be >= 1");
}

}  // namespace

ConditionedEvolution conditioned_ensemble_evolve(const ParticleEnsemble& e, const Params& p,
                                                 const IntegratorConfig& cfg, double horizon,
                                                 const StreamFactory& streams) {
  e.validate();
  check_cfg(cfg);
  for (const Profile& x : e.particles) check_dimension(x, p);
  const long long steps = steps_for(horizon, cfg.dt);
  const std::size_t n = e.size();

  std::vector<std::vector<double>> states(n);
  std::vector<long long> click(n, 0);
  parallel_for(n, [&](std::size_t i) {
    states[i] = e.particles[i].vec();
    if (!(states[i][0] > 0.0)) {
      click[i] = -1;  // already absorbed
      return;
    }
    RandomStream rng = streams.stream(0, e.ids[i]);
    EulerStepper stepper(p, cfg.scheme);
    const auto c = advance(states[i], stepper, cfg.dt, steps, rng, true);
    click[i] = c.value_or(0);
  });

  ConditionedEvolution out;
  std::vector<long long> alive_steps;
  for (std::size_t i = 0; i < n; ++i) alive_steps.push_back(click[i] < 0 ? 0 : click[i]);
  out.survival = survival_from_clicks(alive_steps, grid_steps(steps, cfg.record_stride), cfg.dt);
  // Particles absorbed before the call never count as survivors.
  std::uint64_t absorbed = 0;
  for (long long c : click) absorbed += c < 0 ? 1 : 0;
  for (auto& s : out.survival.survivors) s -= absorbed;

  ParticleEnsemble& ens = out.ensemble;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (click[i] != 0) continue;
    ens.particles.emplace_back(std::move(states[i]), Profile::Unchecked{});
    ens.weights.push_back(e.weights[i]);
    ens.ids.push_back(e.ids[i]);
    total += e.weights[i];
  }
  if (ens.particles.empty() || !(total > 0.0)) {
    throw Error(ErrorCode::Extinct, "every particle clicked before the horizon");
  }
  if (ens.size() != n) {
    for (double& w : ens.weights) w /= total;
  }
  ens.time = e.time + static_cast<double>(steps) * cfg.dt;
  ens.resample_events = e.resample_events;
  return out;
}

double FlemingViotRun::rate_in_window(double t_lo, double t_hi) const {
  const auto lo = static_cast<std::size_t>(std::max(0LL, std::llround(t_lo / dt)));
  const auto hi = std::min(restarts.size(), static_cast<std::size_t>(std::max(0LL, std::llround(t_hi / dt))));
  if (hi <= lo) throw Error(ErrorCode::WindowTooThin, "empty restart window");
  std::uint64_t count = 0;
  for (std::size_t s = lo; s < hi; ++s) count += restarts[s];
  return static_cast<double>(count) /
         (static_cast<double>(ensemble.size()) * static_cast<double>(hi - lo) * dt);
}

FlemingViotRun fleming_viot_evolve(const ParticleEnsemble& e, const Params& p, const IntegratorConfig& cfg,
                                   double horizon, const StreamFactory& streams, const FlemingViotOptions& options) {
  e.validate();
  check_cfg(cfg);
  if (e.size() < 2) throw Error(ErrorCode::InvalidArgument, "Fleming-Viot needs at least 2 particles");
  if (!(options.burn_in_fraction >= 0.0 && options.burn_in_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "burn_in_fraction must lie in [0, 1)");
  }
  if (options.batches < 1 || !(options.snapshot_interval > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "invalid batch or snapshot settings");
  }
  for (const Profile& x : e.particles) {
    check_dimension(x, p);
    if (!(x[0] > 0.0)) throw Error(ErrorCode::InvalidStart, "Fleming-Viot particles need x0 > 0");
  }

  const std::size_t n = e.size();
  const long long steps = steps_for(horizon, cfg.dt);
  const long long burn_steps = static_cast<long long>(std::floor(options.burn_in_fraction * static_cast<double>(steps)));
  const long long snap_every = std::max(1LL, std::llround(options.snapshot_interval / cfg.dt));
  const long long window_steps = steps - burn_steps;

  std::vector<std::vector<double>> x(n);
  std::vector<RandomStream> rng;
  std::vector<EulerStepper> steppers;
  rng.reserve(n);
  steppers.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = e.particles[i].vec();
    rng.push_back(streams.stream(0, e.ids[i]));
    steppers.emplace_back(p, cfg.scheme);
  }
  // Survivors are listed in id order so partner choice is label-invariant.
  std::vector<std::size_t> by_id(n);
  std::iota(by_id.begin(), by_id.end(), std::size_t{0});
  std::sort(by_id.begin(), by_id.end(), [&](std::size_t a, std::size_t b) { return e.ids[a] < e.ids[b]; });

  FlemingViotRun run;
  run.dt = cfg.dt;
  run.restarts.assign(static_cast<std::size_t>(steps), 0);
  std::vector<char> clicked(n, 0);
  std::vector<std::size_t> survivors;
  survivors.reserve(n);
  std::uint64_t events = e.resample_events;

  for (long long s = 1; s <= steps; ++s) {
    parallel_for(n, [&](std::size_t i) {
      clicked[i] = steppers[i].step(x[i], cfg.dt, rng[i]).pre_clip_x0 <= 0.0 ? 1 : 0;
    });
    survivors.clear();
    for (std::size_t i : by_id) {
      if (!clicked[i]) survivors.push_back(i);
    }
    std::uint32_t restarted = 0;
    if (survivors.size() < n) {
      if (survivors.empty()) {
        throw Error(ErrorCode::Extinct, "all particles clicked in step " + std::to_string(s));
      }
      for (std::size_t i = 0; i < n; ++i) {
        if (!clicked[i]) continue;
        x[i] = x[survivors[rng[i].below(survivors.size())]];
        ++restarted;
      }
    }
    run.restarts[static_cast<std::size_t>(s - 1)] = restarted;
    events += restarted;

    if (s > burn_steps && (s - burn_steps) % snap_every == 0) {
      const double frac = static_cast<double>(s - burn_steps - 1) / static_cast<double>(window_steps);
      const int batch = std::min(options.batches - 1, static_cast<int>(frac * options.batches));
      for (std::size_t i = 0; i < n; ++i) {
        run.pooled.emplace_back(x[i], Profile::Unchecked{});
        run.pooled_batch.push_back(batch);
      }
    }
  }

  std::vector<Profile> final_states;
  final_states.reserve(n);
  for (auto& v : x) final_states.emplace_back(std::move(v), Profile::Unchecked{});
  run.ensemble.particles = std::move(final_states);
  run.ensemble.weights.assign(n, 1.0 / static_cast<double>(n));
  run.ensemble.ids = e.ids;
  run.ensemble.time = e.time + static_cast<double>(steps) * cfg.dt;
  run.ensemble.resample_events = events;

  if (window_steps > 0) {
    const double t0 = static_cast<double>(burn_steps) * cfg.dt;
    const double t1 = static_cast<double>(steps) * cfg.dt;
    run.restart_rate.value = run.rate_in_window(t0, t1);
    const int b = options.batches;
    if (window_steps >= b) {
      for (int j = 0; j < b; ++j) {
        const double lo = t0 + (t1 - t0) * j / b;
        const double hi = t0 + (t1 - t0) * (j + 1) / b;
        run.batch_rates.push_back(run.rate_in_window(lo, hi));
      }
      run.restart_rate.stderr_ = stats::mean_estimate(run.batch_rates).stderr_;
    }
  }
  return run;
}

Estimate estimate_rho0(const SurvivalCurve& sc, double t_lo, double t_hi, RandomStream& rng, int resamples) {
  sc.validate();
  if (sc.total == 0) throw Error(ErrorCode::StatisticalFloor, "empty survival curve");

  auto fit = [&](std::span<const std::uint64_t> survivors, bool strict) -> std::optional<double> {
    std::vector<double> xs, ys, ws;
    bool floor_checked = false;
    const double total = static_cast<double>(sc.total);
    for (std::size_t i = 0; i < sc.times.size(); ++i) {
      if (sc.times[i] < t_lo - 1e-12 || sc.times[i] > t_hi + 1e-12) continue;
      if (!floor_checked) {
        floor_checked = true;
        if (survivors[i] < 50) {
          if (strict) throw Error(ErrorCode::StatisticalFloor, "fewer than 50 survivors at window start");
          return std::nullopt;
        }
      }
      if (survivors[i] == 0) continue;
      const double s = static_cast<double>(survivors[i]) / total;
      xs.push_back(sc.times[i]);
      ys.push_back(-std::log(s));
      ws.push_back(total * s / (1.0 - s + 1.0 / total));
    }
    if (xs.size() < 4) {
      if (strict) throw Error(ErrorCode::WindowTooThin, "fewer than 4 grid points in the fit window");
      return std::nullopt;
    }
    return stats::weighted_linear_fit(xs, ys, ws).slope;
  };

  Estimate est;
  est.value = *fit(sc.survivors, true);

  // Replicates fall into: clicked before the first grid time, clicked in a
  // grid interval, or alive at the end.
  std::vector<std::uint64_t> cells;
  cells.push_back(sc.total - sc.survivors.front());
  for (std::size_t i = 1; i < sc.survivors.size(); ++i) cells.push_back(sc.survivors[i - 1] - sc.survivors[i]);
  cells.push_back(sc.survivors.back());

  std::vector<double> slopes;
  std::vector<std::uint64_t> draw(cells.size());
  std::vector<std::uint64_t> boot(sc.survivors.size());
  for (int b = 0; b < resamples; ++b) {
    std::uint64_t left = sc.total;
    std::uint64_t mass_left = sc.total;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::uint64_t k =
          (c + 1 == cells.size() || mass_left == 0)
              ? left
              : rng.binomial(left, static_cast<double>(cells[c]) / static_cast<double>(mass_left));
      draw[c] = k;
      left -= k;
      mass_left -= cells[c];
    }
    std::uint64_t alive = sc.total - draw[0];
    for (std::size_t i = 0; i < boot.size(); ++i) {
      if (i > 0) alive -= draw[i];
      boot[i] = alive;
    }
    if (auto s = fit(boot, false)) slopes.push_back(*s);
  }
  if (slopes.size() >= 2) est.stderr_ = std::sqrt(stats::mean_estimate(slopes).variance);
  return est;
}

namespace {

// Click step (0 = none) for `replicates` runs from x over `steps` steps.
std::vector<long long> click_steps_from(const Profile& x, const Params& p, const IntegratorConfig& cfg,
                                        long long steps, std::size_t replicates, const StreamFactory& streams) {
  std::vector<long long> click(replicates, 0);
  parallel_for(replicates, [&](std::size_t r) {
    RandomStream rng = streams.stream(r);
    EulerStepper stepper(p, cfg.scheme);
    std::vector<double> state = x.vec();
    click[r] = advance(state, stepper, cfg.dt, steps, rng, true).value_or(0);
  });
  return click;
}

}  // namespace

EtaCurve estimate_eta(const Profile& x, const Params& p, double rho0, const IntegratorConfig& cfg,
                      std::size_t replicates, const StreamFactory& streams,
                      std::optional<std::array<double, 2>> plateau_window) {
  check_dimension(x, p);
  cfg.validate();
  if (!(rho0 >= 0.0)) throw Error(ErrorCode::InvalidArgument, "rho0 must be >= 0");
  if (!(x[0] > 0.0)) throw Error(ErrorCode::InvalidStart, "x0 must be > 0");
  const long long steps = cfg.steps();
  const auto click = click_steps_from(x, p, cfg, steps, replicates, streams);
  const SurvivalCurve sc = survival_from_clicks(click, grid_steps(steps, cfg.record_stride), cfg.dt);

  EtaCurve curve;
  curve.total = sc.total;
  const double n = static_cast<double>(sc.total);
  std::size_t last_valid = 0;
  for (std::size_t i = 0; i < sc.times.size(); ++i) {
    const double s = sc.fraction(i);
    const double growth = std::exp(rho0 * sc.times[i]);
    curve.times.push_back(sc.times[i]);
    curve.eta.push_back(growth * s);
    curve.stderr_.push_back(growth * std::sqrt(s * (1.0 - s) / n));
    curve.survivors.push_back(sc.survivors[i]);
    if (sc.survivors[i] >= 50) last_valid = i;
  }
  if (last_valid == 0) throw Error(ErrorCode::StatisticalFloor, "fewer than 50 survivors past t = 0");

  const double t_valid = curve.times[last_valid];
  curve.plateau_lo = plateau_window ? (*plateau_window)[0] : 0.5 * t_valid;
  curve.plateau_hi = plateau_window ? std::min((*plateau_window)[1], t_valid) : t_valid;
  double sum = 0.0, err = 0.0;
  int count = 0;
  for (std::size_t i = 0; i <= last_valid; ++i) {
    if (curve.times[i] < curve.plateau_lo - 1e-12 || curve.times[i] > curve.plateau_hi + 1e-12) continue;
    sum += curve.eta[i];
    err += curve.stderr_[i];
    ++count;
  }
  if (count == 0) throw Error(ErrorCode::StatisticalFloor, "plateau window holds no usable grid point");
  curve.plateau.value = sum / count;
  // Grid points share their paths, so errors are averaged rather than pooled.
  curve.plateau.stderr_ = err / count;
  return curve;
}

std::vector<Profile> QProcessSample::final_states() const {
  std::vector<Profile> out;
  out.reserve(paths.size());
  for (const auto& path : paths) out.push_back(path.states.back());
  return out;
}

QProcessSample sample_qprocess(const Profile& x0, const Params& p, double t, double guard,
                               const IntegratorConfig& cfg, std::size_t replicates, const StreamFactory& streams) {
  check_dimension(x0, p);
  check_cfg(cfg);
  if (!(guard >= 0.0) || !(t >= 0.0)) throw Error(ErrorCode::InvalidArgument, "t and guard must be >= 0");
  if (!(x0[0] > 0.0)) throw Error(ErrorCode::InvalidStart, "x0 must be > 0");
  const long long keep_steps = steps_for(t, cfg.dt);
  const long long total_steps = steps_for(t + guard, cfg.dt);

  std::vector<std::optional<Trajectory>> slots(replicates);
  parallel_for(replicates, [&](std::size_t r) {
    RandomStream rng = streams.stream(r);
    EulerStepper stepper(p, cfg.scheme);
    std::vector<double> x = x0.vec();
    Trajectory path;
    path.times.push_back(0.0);
    path.states.push_back(x0);
    for (long long s = 1; s <= total_steps; ++s) {
      if (stepper.step(x, cfg.dt, rng).pre_clip_x0 <= 0.0) return;
      if (s <= keep_steps && (s % cfg.record_stride == 0 || s == keep_steps)) {
        path.times.push_back(static_cast<double>(s) * cfg.dt);
        path.states.emplace_back(x, Profile::Unchecked{});
      }
    }
    slots[r] = std::move(path);
  });

  QProcessSample out;
  out.attempted = replicates;
  for (auto& s : slots) {
    if (s) out.paths.push_back(std::move(*s));
  }
  out.acceptance_rate = replicates == 0 ? 0.0 : static_cast<double>(out.paths.size()) / static_cast<double>(replicates);
  if (out.paths.size() < 50) {
    throw Error(ErrorCode::StatisticalFloor, "only " + std::to_string(out.paths.size()) + " accepted paths");
  }
  return out;
}

QsdEstimate estimate_qsd(const Params& p, const IntegratorConfig& cfg, const QsdOptions& options,
                         const StreamFactory& streams) {
  const Profile start = options.initial ? *options.initial
                                        : (p.alpha > 0.0 ? poisson_profile(p) : Profile::point_mass(p.d, 0));
  const FlemingViotRun run = fleming_viot_evolve(ParticleEnsemble::replicate(start, options.particles), p, cfg,
                                                 options.horizon, streams, options.fv);
  if (run.pooled.empty()) throw Error(ErrorCode::StatisticalFloor, "no snapshots after burn-in");

  QsdEstimate q;
  q.ensemble = ParticleEnsemble::uniform(run.pooled);
  q.ensemble.time = run.ensemble.time;
  q.ensemble.resample_events = run.ensemble.resample_events;
  q.batch = run.pooled_batch;
  q.batches = options.fv.batches;
  q.rho0 = run.restart_rate;
  q.run_time = options.horizon;

  for (int k = 1; k <= 4; ++k) {
    std::vector<double> sum(static_cast<std::size_t>(q.batches), 0.0), count(static_cast<std::size_t>(q.batches), 0.0);
    double all = 0.0;
    for (std::size_t i = 0; i < q.ensemble.size(); ++i) {
      const double m = moment(q.ensemble.particles[i].freqs(), k);
      all += m;
      sum[static_cast<std::size_t>(q.batch[i])] += m;
      count[static_cast<std::size_t>(q.batch[i])] += 1.0;
    }
    std::vector<double> means;
    for (std::size_t b = 0; b < sum.size(); ++b) {
      if (count[b] > 0.0) means.push_back(sum[b] / count[b]);
    }
    q.moments[static_cast<std::size_t>(k - 1)] = {all / static_cast<double>(q.ensemble.size()),
                                                  stats::mean_estimate(means).stderr_};
  }
  return q;
}

Estimate moment_quantile(const QsdEstimate& q, int k, double level) {
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorCode::InvalidArgument, "quantile level must lie in (0, 1)");
  std::vector<double> all;
  std::vector<std::vector<double>> per_batch(static_cast<std::size_t>(std::max(q.batches, 1)));
  for (std::size_t i = 0; i < q.ensemble.size(); ++i) {
    const double m = moment(q.ensemble.particles[i].freqs(), k);
    all.push_back(m);
    per_batch[static_cast<std::size_t>(q.batch.empty() ? 0 : q.batch[i])].push_back(m);
  }
  if (all.empty()) throw Error(ErrorCode::StatisticalFloor, "empty QSD sample");
  std::vector<double> batch_q;
  for (auto& b : per_batch) {
    if (!b.empty()) batch_q.push_back(stats::quantile(std::move(b), level));
  }
  return {stats::quantile(std::move(all), level), stats::mean_estimate(batch_q).stderr_};
}

ClickSample sample_click_times(std::span<const Profile> starts, const Params& p, const IntegratorConfig& cfg,
                               std::size_t replicates, const StreamFactory& streams) {
  if (starts.empty()) throw Error(ErrorCode::InvalidArgument, "no starting states");
  cfg.validate();
  const long long steps = cfg.steps();
  std::vector<long long> click(replicates, 0);
  parallel_for(replicates, [&](std::size_t r) {
    RandomStream rng = streams.stream(r);
    const Profile& x0 = starts[rng.below(starts.size())];
    EulerStepper stepper(p, cfg.scheme);
    std::vector<double> x = x0.vec();
    click[r] = x[0] > 0.0 ? advance(x, stepper, cfg.dt, steps, rng, true).value_or(0) : 0;
  });
  ClickSample out;
  for (long long c : click) {
    if (c > 0) {
      out.click_times.push_back(static_cast<double>(c) * cfg.dt);
    } else {
      ++out.censored;
    }
  }
  out.survival = survival_from_clicks(click, grid_steps(steps, cfg.record_stride), cfg.dt);
  return out;
}

stats::Summary2D summarize_profiles(std::span<const Profile> xs, std::span<const double> weights) {
  stats::Summary2D s;
  s.x.reserve(xs.size());
  s.y.reserve(xs.size());
  for (const Profile& x : xs) {
    s.x.push_back(x[0]);
    s.y.push_back(moment(x.freqs(), 1));
  }
  s.w.assign(weights.begin(), weights.end());
  return s;
}

PushforwardReport pushforward_check(const ParticleEnsemble& e, const Params& p, double delta_t,
                                    const IntegratorConfig& cfg, const StreamFactory& streams, int bins) {
  e.validate();
  if (e.size() < 1000) throw Error(ErrorCode::StatisticalFloor, "pushforward check needs >= 1000 particles");
  PushforwardReport rep;
  rep.delta_t = delta_t;
  rep.bins = bins;
  rep.input_size = e.size();
  const stats::Summary2D before = summarize_profiles(e.particles, e.weights);
  if (delta_t == 0.0) {
    rep.survivors = e.size();
    rep.tv = stats::binned_tv(before, before, bins);
    return rep;
  }
  const ConditionedEvolution evolved = conditioned_ensemble_evolve(e, p, cfg, delta_t, streams);
  rep.survivors = evolved.ensemble.size();
  const stats::Summary2D after = summarize_profiles(evolved.ensemble.particles, evolved.ensemble.weights);
  rep.tv = stats::binned_tv(before, after, bins);
  return rep;
}

PushforwardReport qsd_pushforward_check(const QsdEstimate& q, const Params& p, double delta_t,
                                        const IntegratorConfig& cfg, const StreamFactory& streams, int bins) {
  return pushforward_check(q.ensemble, p, delta_t, cfg, streams, bins);
}

std::vector<double> beta_weights(const ParticleEnsemble& nu, const Params& p, const IntegratorConfig& cfg,
                                 double horizon, std::size_t runs_per_particle, const StreamFactory& streams) {
  nu.validate();
  if (runs_per_particle < 1) throw Error(ErrorCode::InvalidArgument, "runs_per_particle must be >= 1");
  const long long steps = steps_for(horizon, cfg.dt);
  std::vector<double> w(nu.size(), 0.0);
  parallel_for(nu.size(), [&](std::size_t i) {
    std::size_t alive = 0;
    for (std::size_t r = 0; r < runs_per_particle; ++r) {
      RandomStream rng = streams.stream(r, nu.ids[i]);
      EulerStepper stepper(p, cfg.scheme);
      std::vector<double> x = nu.particles[i].vec();
      if (x[0] > 0.0 && !advance(x, stepper, cfg.dt, steps, rng, true)) ++alive;
    }
    w[i] = nu.weights[i] * static_cast<double>(alive) / static_cast<double>(runs_per_particle);
  });
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  if (!(total > 0.0)) throw Error(ErrorCode::Extinct, "no QSD sample point survived the horizon");
  for (double& v : w) v /= total;
  return w;
}

}  // namespace ratchet
