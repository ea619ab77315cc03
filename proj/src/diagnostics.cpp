#include "ratchet/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ratchet/error.hpp"
#include "ratchet/parallel.hpp"

namespace ratchet {

namespace {

std::vector<long long> steps_of_grid(std::span<const double> t_grid, double dt) {
  if (t_grid.empty()) throw Error(ErrorCode::InvalidArgument, "empty time grid");
  std::vector<long long> steps;
  for (std::size_t j = 0; j < t_grid.size(); ++j) {
    if (!(t_grid[j] >= 0.0) || (j > 0 && !(t_grid[j] > t_grid[j - 1]))) {
      throw Error(ErrorCode::InvalidArgument, "time grid must be nonnegative and increasing");
    }
    steps.push_back(std::llround(t_grid[j] / dt));
  }
  return steps;
}

}  // namespace

std::optional<double> CorrelationSeries::crossing_time(std::span<const double> times, double threshold) const {
  for (std::size_t j = 0; j < corr.size() && j < times.size(); ++j) {
    if (std::abs(corr[j]) < threshold) return times[j];
  }
  return std::nullopt;
}

CorrelationReport correlation_decay(const QsdEstimate& q, const Params& p, std::span<const int> ks,
                                    std::span<const double> t_grid, const IntegratorConfig& cfg,
                                    std::size_t replicates, const StreamFactory& streams, double min_survival,
                                    int bootstrap) {
  if (replicates < 1000) throw Error(ErrorCode::StatisticalFloor, "correlation decay needs >= 1000 replicates");
  if (q.ensemble.size() == 0) throw Error(ErrorCode::InvalidArgument, "empty QSD sample");
  for (int k : ks) {
    if (k < 0 || k > p.d) throw Error(ErrorCode::InvalidArgument, "class index out of range");
  }
  const auto grid = steps_of_grid(t_grid, cfg.dt);
  const std::size_t nk = ks.size();
  const std::size_t ng = grid.size();

  // values[r][j * nk + c]: X_{ks[c]} at grid point j; alive[r] = grid points reached alive.
  std::vector<std::vector<double>> values(replicates);
  std::vector<double> start_x0(replicates);
  std::vector<std::size_t> alive(replicates, 0);
  parallel_for(replicates, [&](std::size_t r) {
    RandomStream rng = streams.stream(r);
    const Profile& x0 = q.ensemble.particles[rng.below(q.ensemble.size())];
    std::vector<double> x = x0.vec();
    start_x0[r] = x[0];
    values[r].assign(ng * nk, 0.0);
    EulerStepper stepper(p, cfg.scheme);
    long long at = 0;
    for (std::size_t j = 0; j < ng; ++j) {
      if (grid[j] > at && advance(x, stepper, cfg.dt, grid[j] - at, rng, true)) return;
      at = grid[j];
      for (std::size_t c = 0; c < nk; ++c) values[r][j * nk + c] = x[static_cast<std::size_t>(ks[c])];
      alive[r] = j + 1;
    }
  });

  CorrelationReport rep;
  std::size_t usable = 0;
  for (std::size_t j = 0; j < ng; ++j) {
    std::size_t count = 0;
    for (std::size_t r = 0; r < replicates; ++r) count += alive[r] > j ? 1 : 0;
    const double s = static_cast<double>(count) / static_cast<double>(replicates);
    if (s < min_survival) break;
    rep.times.push_back(t_grid[j]);
    rep.survival.push_back(s);
    usable = j + 1;
  }
  if (usable == 0) throw Error(ErrorCode::StatisticalFloor, "survival below the gate at the first grid time");
  rep.gate_time = rep.times.back();

  RandomStream boot_rng = streams.stream(0, 0, 1);
  for (std::size_t c = 0; c < nk; ++c) {
    CorrelationSeries series;
    series.k = ks[c];
    for (std::size_t j = 0; j < usable; ++j) {
      std::vector<double> a, b;
      for (std::size_t r = 0; r < replicates; ++r) {
        if (alive[r] > j) {
          a.push_back(values[r][j * nk + c]);
          b.push_back(start_x0[r]);
        }
      }
      if (a.size() < 2) throw Error(ErrorCode::StatisticalFloor, "fewer than 2 survivors at a grid time");
      series.corr.push_back(stats::correlation(a, b));
      std::vector<double> boots;
      std::vector<double> ra(a.size()), rb(b.size());
      for (int bidx = 0; bidx < bootstrap; ++bidx) {
        for (std::size_t i = 0; i < a.size(); ++i) {
          const std::size_t pick = boot_rng.below(a.size());
          ra[i] = a[pick];
          rb[i] = b[pick];
        }
        boots.push_back(stats::correlation(ra, rb));
      }
      if (boots.empty()) {
        series.band_lo.push_back(series.corr.back());
        series.band_hi.push_back(series.corr.back());
      } else {
        std::sort(boots.begin(), boots.end());
        series.band_lo.push_back(stats::quantile_sorted(boots, 0.025));
        series.band_hi.push_back(stats::quantile_sorted(boots, 0.975));
      }
    }
    rep.series.push_back(std::move(series));
  }
  return rep;
}

Estimate RelaxationFit::relaxation_time() const {
  return {1.0 / gamma.value, gamma.stderr_ / (gamma.value * gamma.value)};
}

namespace {

struct SummaryPaths {
  // (x0, m1) per replicate per grid point, valid for j < alive[r].
  std::vector<std::vector<std::pair<double, double>>> points;
  std::vector<std::size_t> alive;
};

SummaryPaths record_summaries(const Profile& start, const Params& p, const std::vector<long long>& grid,
                              const IntegratorConfig& cfg, std::size_t replicates, const StreamFactory& streams,
                              std::uint64_t lane) {
  const double dt = cfg.dt;
  SummaryPaths out;
  out.points.resize(replicates);
  out.alive.assign(replicates, 0);
  parallel_for(replicates, [&](std::size_t r) {
    RandomStream rng = streams.stream(r, lane);
    EulerStepper stepper(p, cfg.scheme);
    std::vector<double> x = start.vec();
    long long at = 0;
    for (std::size_t j = 0; j < grid.size(); ++j) {
      if (grid[j] > at && advance(x, stepper, dt, grid[j] - at, rng, true)) return;
      at = grid[j];
      out.points[r].emplace_back(x[0], moment(x, 1));
      out.alive[r] = j + 1;
    }
  });
  return out;
}

stats::Summary2D survivors_at(const SummaryPaths& s, std::size_t j, std::span<const std::size_t> picks) {
  stats::Summary2D out;
  for (std::size_t r : picks) {
    if (s.alive[r] > j) {
      out.x.push_back(s.points[r][j].first);
      out.y.push_back(s.points[r][j].second);
    }
  }
  return out;
}

double fit_rate(std::span<const double> times, std::span<const double> tv, std::span<const std::size_t> window) {
  std::vector<double> xs, ys, ws;
  for (std::size_t j : window) {
    if (!(tv[j] > 0.0)) continue;
    xs.push_back(times[j]);
    ys.push_back(std::log(tv[j]));
    ws.push_back(1.0);
  }
  if (xs.size() < 2) return std::nan("");
  return -stats::weighted_linear_fit(xs, ys, ws).slope;
}

}  // namespace

RelaxationFit relaxation_rate_fit(const Profile& x_a, const Profile& x_b, const Params& p,
                                  std::span<const double> t_grid, const IntegratorConfig& cfg,
                                  std::size_t replicates, const StreamFactory& streams, int bins, int bootstrap) {
  check_dimension(x_a, p);
  check_dimension(x_b, p);
  if (!(x_a[0] > 0.0) || !(x_b[0] > 0.0)) throw Error(ErrorCode::InvalidStart, "initial profiles need x0 > 0");
  const auto grid = steps_of_grid(t_grid, cfg.dt);
  const SummaryPaths a = record_summaries(x_a, p, grid, cfg, replicates, streams, 0);
  const SummaryPaths b = record_summaries(x_b, p, grid, cfg, replicates, streams, 1);

  std::vector<std::size_t> all(replicates);
  std::iota(all.begin(), all.end(), std::size_t{0});
  RandomStream rng = streams.stream(0, 2);

  RelaxationFit fit;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    stats::Summary2D sa = survivors_at(a, j, all);
    stats::Summary2D sb = survivors_at(b, j, all);
    if (sa.x.size() < 50 || sb.x.size() < 50) break;
    fit.times.push_back(t_grid[j]);
    fit.survivors_a.push_back(sa.x.size());
    fit.survivors_b.push_back(sb.x.size());
    fit.tv.push_back(stats::binned_tv(sa, sb, bins));

    // Null TV for the same sample sizes: random relabelling of the pool.
    stats::Summary2D pool = sa;
    pool.x.insert(pool.x.end(), sb.x.begin(), sb.x.end());
    pool.y.insert(pool.y.end(), sb.y.begin(), sb.y.end());
    std::vector<std::size_t> perm(pool.x.size());
    double floor = 0.0;
    constexpr int kPermutations = 4;
    for (int rep = 0; rep < kPermutations; ++rep) {
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
      stats::Summary2D pa, pb;
      for (std::size_t i = 0; i < perm.size(); ++i) {
        auto& dst = i < sa.x.size() ? pa : pb;
        dst.x.push_back(pool.x[perm[i]]);
        dst.y.push_back(pool.y[perm[i]]);
      }
      floor += stats::binned_tv(pa, pb, bins);
    }
    fit.noise_floor.push_back(floor / kPermutations);
  }
  if (fit.times.empty()) throw Error(ErrorCode::StatisticalFloor, "fewer than 50 survivors at the first grid time");

  for (std::size_t j = 0; j < fit.times.size(); ++j) {
    if (fit.tv[j] >= 0.02 && fit.tv[j] <= 0.5 && fit.tv[j] > 2.0 * fit.noise_floor[j]) fit.window.push_back(j);
  }
  if (fit.window.size() < 3) throw Error(ErrorCode::NoDecayWindow, "fewer than 3 grid points in the decay window");
  fit.gamma.value = fit_rate(fit.times, fit.tv, fit.window);
  if (!(fit.gamma.value > 0.0)) throw Error(ErrorCode::NoDecayWindow, "TV does not decay on the fit window");

  std::vector<double> rates;
  std::vector<std::size_t> pa(replicates), pb(replicates);
  std::vector<double> tv_boot(fit.times.size(), 0.0);
  for (int bidx = 0; bidx < bootstrap; ++bidx) {
    for (std::size_t i = 0; i < replicates; ++i) {
      pa[i] = rng.below(replicates);
      pb[i] = rng.below(replicates);
    }
    bool ok = true;
    for (std::size_t j : fit.window) {
      stats::Summary2D sa = survivors_at(a, j, pa);
      stats::Summary2D sb = survivors_at(b, j, pb);
      if (sa.x.empty() || sb.x.empty()) {
        ok = false;
        break;
      }
      tv_boot[j] = stats::binned_tv(sa, sb, bins);
    }
    if (!ok) continue;
    const double g = fit_rate(fit.times, tv_boot, fit.window);
    if (std::isfinite(g)) rates.push_back(g);
  }
  if (rates.size() >= 2) fit.gamma.stderr_ = std::sqrt(stats::mean_estimate(rates).variance);
  return fit;
}

std::vector<TightnessRow> moment_tightness_scan(const Params& p_base, std::span<const int> d_list, int k,
                                                double level, const IntegratorConfig& cfg,
                                                const QsdOptions& options, const StreamFactory& streams) {
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorCode::InvalidArgument, "quantile level must lie in (0, 1)");
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "moment order must be >= 1");
  for (std::size_t i = 0; i < d_list.size(); ++i) {
    if (d_list[i] < 1 || (i > 0 && d_list[i] <= d_list[i - 1])) {
      throw Error(ErrorCode::InvalidArgument, "d_list must be increasing and >= 1");
    }
  }
  std::vector<TightnessRow> rows;
  for (int d : d_list) {
    const Params p = Params::make(p_base.alpha, p_base.lambda, d);
    QsdOptions opt = options;
    opt.initial.reset();
    const QsdEstimate q = estimate_qsd(p, cfg, opt, streams.with_tag(streams.tag() ^ (static_cast<std::uint64_t>(d) << 20)));
    TightnessRow row;
    row.d = d;
    row.quantile = moment_quantile(q, k, level);
    row.rho0 = q.rho0;
    row.mean_m1 = q.moments[0];
    row.samples = q.ensemble.size();
    for (const Profile& x : q.ensemble.particles) {
      const double m1 = moment(x.freqs(), 1);
      const double bound = std::pow(moment(x.freqs(), k), 1.0 / k);
      if (m1 > bound * (1.0 + 1e-12) + 1e-12) ++row.holder_violations;
    }
    rows.push_back(row);
  }
  return rows;
}

AutonomyReport pi_k_autonomy_test(std::span<const double> head, std::span<const double> tail_a,
                                  std::span<const double> tail_b, const Params& p, int k, double t,
                                  const IntegratorConfig& cfg, std::size_t replicates,
                                  const StreamFactory& streams, bool aggregated) {
  check_k(k, p.d);
  if (head.size() != static_cast<std::size_t>(k)) throw Error(ErrorCode::InvalidArgument, "head must have k entries");
  const std::size_t tail_len = static_cast<std::size_t>(p.d - k + 1);
  if (tail_a.size() != tail_len || tail_b.size() != tail_len) {
    throw Error(ErrorCode::InvalidArgument, "tails must cover classes k..d");
  }
  if (replicates < 50) throw Error(ErrorCode::StatisticalFloor, "autonomy test needs >= 50 replicates");
  auto assemble = [&](std::span<const double> tail) {
    std::vector<double> v(head.begin(), head.end());
    v.insert(v.end(), tail.begin(), tail.end());
    return validate_profile(v);
  };
  const Profile a = assemble(tail_a);
  const Profile b = assemble(tail_b);
  const long long steps = std::llround(t / cfg.dt);
  const int drift_k = aggregated ? k : p.d;
  const std::size_t n_obs = static_cast<std::size_t>(k) + 2;

  auto run = [&](const Profile& start, std::uint64_t lane) {
    std::vector<std::vector<double>> obs(n_obs, std::vector<double>(replicates));
    parallel_for(replicates, [&](std::size_t r) {
      RandomStream rng = streams.stream(r, lane);
      EulerStepper stepper(p, drift_k, cfg.scheme);
      std::vector<double> x = start.vec();
      advance(x, stepper, cfg.dt, steps, rng, false);
      double head_mass = 0.0;
      for (int i = 0; i < k; ++i) {
        obs[static_cast<std::size_t>(i)][r] = x[static_cast<std::size_t>(i)];
        head_mass += x[static_cast<std::size_t>(i)];
      }
      obs[static_cast<std::size_t>(k)][r] = std::max(0.0, 1.0 - head_mass);
      obs[static_cast<std::size_t>(k) + 1][r] = aggregated_mean(x, k);
    });
    return obs;
  };
  const auto obs_a = run(a, 0);
  const auto obs_b = run(b, 1);

  AutonomyReport rep;
  for (int i = 0; i < k; ++i) rep.labels.push_back("x" + std::to_string(i));
  rep.labels.push_back("tail");
  rep.labels.push_back("m1_aggregated");
  for (std::size_t c = 0; c < n_obs; ++c) {
    rep.tests.push_back(stats::ks_two_sample(obs_a[c], obs_b[c]));
    rep.min_p = std::min(rep.min_p, rep.tests.back().p_value);
  }
  rep.corrected_min_p = std::min(1.0, rep.min_p * static_cast<double>(n_obs));
  return rep;
}

DiscretePopulation population_from_profile(const Profile& x, std::uint64_t n) {
  std::vector<std::uint64_t> counts(x.size(), 0);
  std::vector<std::pair<double, std::size_t>> remainder;
  std::uint64_t assigned = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double exact = x[i] * static_cast<double>(n);
    counts[i] = static_cast<std::uint64_t>(std::floor(exact));
    assigned += counts[i];
    remainder.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(remainder.begin(), remainder.end(), [](const auto& l, const auto& r) { return l.first > r.first; });
  for (std::size_t j = 0; assigned < n; ++j, ++assigned) ++counts[remainder[j % remainder.size()].second];
  return DiscretePopulation::from_counts(std::move(counts));
}

namespace {

ModelMoments collect(const std::vector<double>& m1, const std::vector<double>& x0) {
  ModelMoments m;
  m.m1 = stats::mean_estimate(m1);
  m.x0 = stats::mean_estimate(x0);
  m.m1_variance = m.m1.variance;
  m.x0_variance = m.x0.variance;
  return m;
}

Estimate relative_gap(const stats::MeanEstimate& a, const stats::MeanEstimate& b) {
  const double scale = std::abs(b.mean) > 1e-12 ? std::abs(b.mean) : 1.0;
  return {std::abs(a.mean - b.mean) / scale, std::hypot(a.stderr_, b.stderr_) / scale};
}

}  // namespace

CompareReport discrete_vs_diffusion_compare(std::uint64_t n, const Params& p, double t, const Profile& x0,
                                            const IntegratorConfig& cfg, std::size_t replicates,
                                            const StreamFactory& streams) {
  check_dimension(x0, p);
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "population size must be >= 1");
  if (replicates < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 replicates");
  const double scale = static_cast<double>(n);
  const DiscreteParams dp = DiscreteParams::make(p.alpha / scale, p.lambda / scale, n, p.d);
  const long long generations = std::llround(scale * t);
  const long long steps = std::llround(t / cfg.dt);
  const DiscretePopulation pop0 = population_from_profile(x0, n);

  std::vector<double> dm1(replicates), dx0(replicates), fm1(replicates), fx0(replicates);
  parallel_for(replicates, [&](std::size_t r) {
    RandomStream rng = streams.stream(r, 0);
    DiscretePopulation pop = pop0;
    for (long long g = 0; g < generations; ++g) pop = step_generation(pop, dp, rng);
    const GenerationSummary s = summarize(pop, generations);
    dm1[r] = s.m1;
    dx0[r] = s.x0;
  });
  parallel_for(replicates, [&](std::size_t r) {
    RandomStream rng = streams.stream(r, 1);
    EulerStepper stepper(p, cfg.scheme);
    std::vector<double> x = x0.vec();
    advance(x, stepper, cfg.dt, steps, rng, false);
    fm1[r] = moment(x, 1);
    fx0[r] = x[0];
  });

  CompareReport rep;
  rep.n = n;
  rep.generations = generations;
  rep.discrete = collect(dm1, dx0);
  rep.diffusion = collect(fm1, fx0);
  rep.m1_relative_gap = relative_gap(rep.discrete.m1, rep.diffusion.m1);
  rep.x0_relative_gap = relative_gap(rep.discrete.x0, rep.diffusion.x0);
  const double v = rep.diffusion.m1_variance;
  rep.m1_variance_relative_gap = v > 0.0 ? std::abs(rep.discrete.m1_variance - v) / v : 0.0;
  return rep;
}

ClickStatsReport click_statistics(std::span<const double> click_times, std::optional<double> relaxation_time) {
  if (click_times.size() < 100) throw Error(ErrorCode::StatisticalFloor, "need >= 100 click observations");
  std::vector<double> sorted(click_times.begin(), click_times.end());
  std::sort(sorted.begin(), sorted.end());
  ClickStatsReport rep;
  rep.n = sorted.size();
  rep.mean = stats::mean_estimate(sorted).mean;
  rep.median = stats::quantile_sorted(sorted, 0.5);
  for (double level : {0.1, 0.25, 0.5, 0.75, 0.9}) rep.quantiles.emplace_back(level, stats::quantile_sorted(sorted, level));
  const double rate = rep.mean > 0.0 ? 1.0 / rep.mean : 0.0;
  rep.exponential_fit = stats::ks_one_sample(sorted, [rate](double t) { return t <= 0.0 ? 0.0 : 1.0 - std::exp(-rate * t); });
  rep.relaxation_time = relaxation_time;
  rep.metastable = relaxation_time && *relaxation_time < rep.mean / 10.0;
  return rep;
}

ClickStatsReport click_statistics(std::span<const Trajectory> paths, std::optional<double> relaxation_time) {
  std::vector<double> times;
  for (const Trajectory& tr : paths) {
    if (tr.click_time) times.push_back(*tr.click_time);
  }
  return click_statistics(times, relaxation_time);
}

}  // namespace ratchet
