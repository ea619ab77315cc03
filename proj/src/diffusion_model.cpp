#include "ratchet/diffusion_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ratchet/error.hpp"
#include "ratchet/parallel.hpp"

namespace ratchet {

void IntegratorConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorCode::InvalidArgument, "dt must be > 0");
  if (!(t_max >= dt)) throw Error(ErrorCode::InvalidArgument, "t_max must be >= dt");
  if (record_stride < 1) throw Error(ErrorCode::InvalidArgument, "record_stride must be >= 1");
}

long long IntegratorConfig::steps() const { return std::llround(t_max / dt); }

EulerStepper::EulerStepper(const Params& p, int k, Scheme scheme)
    : params_(p), k_(k), scheme_(scheme), drift_(p.size()), root_(p.size()), normals_(p.size()) {
  check_k(k, p.d);
}

namespace {

// Smallest n with P(N > n) <= q for N ~ Poisson(mu).
double poisson_upper_quantile(double mu, double q) {
  if (!(mu > 0.0)) return 0.0;
  double pmf = std::exp(-mu);
  double tail = -std::expm1(-mu);
  double n = 0.0;
  while (tail > q && n < 10000.0) {
    n += 1.0;
    pmf *= mu / n;
    tail -= pmf;
  }
  return n;
}

}  // namespace

void EulerStepper::raw_increment(std::span<const double> x, double dt, std::span<const double> normals,
                                 std::span<double> out) {
  const std::size_t n = x.size();
  drift_into(x, params_, k_, drift_);
  double w = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    root_[i] = std::sqrt(std::max(x[i], 0.0));
    w += root_[i] * normals[i];
  }
  const double sdt = std::sqrt(dt);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = drift_[i] * dt + sdt * (root_[i] * normals[i] - x[i] * w);
  }
}

StepReport EulerStepper::step_with_normals(std::span<double> x, double dt, std::span<const double> normals) {
  const std::size_t n = x.size();
  const double mean = aggregated_mean(x, k_);
  const double alpha = params_.alpha;
  const double lambda = params_.lambda;
  const auto kk = static_cast<std::size_t>(k_);
  const double sdt = std::sqrt(dt);
  const bool hybrid = scheme_ == Scheme::Hybrid;
  const double small = hybrid ? kSmallClass * dt : 0.0;

  // Shared factor over the Gaussian block; dividing by its mass keeps the
  // block's increments summing to zero.
  double w = 0.0;
  double block = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    root_[i] = std::sqrt(x[i]);
    if (x[i] >= small) {
      w += root_[i] * normals[i];
      block += x[i];
    }
  }
  if (hybrid) w = block > 0.0 ? w / block : 0.0;

  StepReport report;
  double prev = 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = x[i];
    const double capped = static_cast<double>(std::min(i, kk));
    const double outflow = (i + 1 < n) ? xi : 0.0;
    const double drift = alpha * (mean - capped) * xi + lambda * (prev - outflow);
    double next = xi + drift * dt;
    if (xi >= small) {
      next += sdt * (root_[i] * normals[i] - xi * w);
      if (next < 0.0) {
        if (xi >= 1e-8) report.clipped = true;
        if (next < kRoundoffFloor) ++report.instability;
      }
    } else {
      const double q = 0.5 * std::erfc(normals[i] * M_SQRT1_2);
      next = dt * poisson_upper_quantile(next / dt, q);
    }
    if (i == 0) report.pre_clip_x0 = next;
    if (next < 0.0) {
      next = 0.0;
    } else if (next > 1.0) {
      next = 1.0;
    }
    prev = xi;
    x[i] = next;
    sum += next;
  }
  if (sum > 0.0) {
    const double inv = 1.0 / sum;
    for (std::size_t i = 0; i < n; ++i) x[i] *= inv;
  }
  return report;
}

StepReport EulerStepper::step(std::span<double> x, double dt, RandomStream& rng) {
  rng.fill_normal(std::span<double>(normals_.data(), x.size()));
  return step_with_normals(x, dt, normals_);
}

std::pair<Profile, double> euler_step(const Profile& x, const Params& p, double dt, RandomStream& rng,
                                     Scheme scheme) {
  check_dimension(x, p);
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "dt must be > 0");
  EulerStepper stepper(p, scheme);
  std::vector<double> state = x.vec();
  const StepReport r = stepper.step(state, dt, rng);
  return {Profile(std::move(state), Profile::Unchecked{}), r.pre_clip_x0};
}

std::optional<long long> advance(std::span<double> x, EulerStepper& stepper, double dt, long long steps,
                                 RandomStream& rng, bool stop_at_click, StepStats* stats) {
  std::optional<long long> click;
  for (long long s = 1; s <= steps; ++s) {
    const StepReport r = stepper.step(x, dt, rng);
    if (stats) stats->add(r);
    if (!click && r.pre_clip_x0 <= 0.0) {
      click = s;
      if (stop_at_click) break;
    }
  }
  return click;
}

namespace {

Trajectory run_path(const Profile& x0, const Params& p, int k, const IntegratorConfig& cfg, RandomStream& rng,
                    StepStats* stats) {
  check_dimension(x0, p);
  cfg.validate();
  if (!(x0[0] > 0.0)) throw Error(ErrorCode::InvalidStart, "initial x0[0] must be > 0");
  EulerStepper stepper(p, k, cfg.scheme);
  const long long steps = cfg.steps();
  std::vector<double> x = x0.vec();

  Trajectory traj;
  traj.times.push_back(0.0);
  traj.states.push_back(x0);
  for (long long s = 1; s <= steps; ++s) {
    const StepReport r = stepper.step(x, cfg.dt, rng);
    if (stats) stats->add(r);
    const double t = static_cast<double>(s) * cfg.dt;
    if (r.pre_clip_x0 <= 0.0) {
      traj.click_time = t;
      traj.times.push_back(t);
      traj.states.emplace_back(x, Profile::Unchecked{});
      return traj;
    }
    if (s % cfg.record_stride == 0 || s == steps) {
      traj.times.push_back(t);
      traj.states.emplace_back(x, Profile::Unchecked{});
    }
  }
  return traj;
}

}  // namespace

Trajectory simulate_path(const Profile& x0, const Params& p, const IntegratorConfig& cfg, RandomStream& rng,
                         StepStats* stats) {
  return run_path(x0, p, p.d, cfg, rng, stats);
}

Trajectory simulate_aggregated_path(const Profile& x0, const Params& p, int k, const IntegratorConfig& cfg,
                                    RandomStream& rng, StepStats* stats) {
  check_k(k, p.d);
  return run_path(x0, p, k, cfg, rng, stats);
}

double moment_drift(const Profile& x, const Params& p, int k) {
  check_dimension(x, p);
  const int d = p.d;
  const double m1 = moment(x.freqs(), 1);
  const double mk = moment(x.freqs(), k);
  const double mk1 = moment(x.freqs(), k + 1);
  double source = 0.0;
  for (int l = 0; l < d; ++l) source += std::pow(static_cast<double>(l + 1), k) * x[static_cast<std::size_t>(l)];
  const double saturated = std::pow(static_cast<double>(d), k) * x[static_cast<std::size_t>(d)];
  return p.alpha * (m1 * mk - mk1) + p.lambda * source - p.lambda * (mk - saturated);
}

double moment_quadratic_variation(const Profile& x, int k) {
  const double mk = moment(x.freqs(), k);
  return moment(x.freqs(), 2 * k) - mk * mk;
}

double MomentDriftReport::drift_z() const {
  const double diff = empirical_drift - analytic_drift;
  if (std::abs(diff) <= 1e-9 * (1.0 + std::abs(analytic_drift))) return 0.0;
  return drift_stderr > 0.0 ? diff / drift_stderr : INFINITY;
}

double MomentDriftReport::qv_z() const {
  const double diff = empirical_qv - analytic_qv;
  if (std::abs(diff) <= 1e-9 * (1.0 + std::abs(analytic_qv))) return 0.0;
  return qv_stderr > 0.0 ? diff / qv_stderr : INFINITY;
}

MomentDriftReport moment_drift_check(const Profile& x, const Params& p, int k, std::size_t replicates, double dt,
                                     const StreamFactory& streams, Scheme scheme) {
  check_dimension(x, p);
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "moment order must be >= 1");
  if (replicates < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 replicates");
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "dt must be > 0");

  const double base = moment(x.freqs(), k);
  std::vector<double> increments(replicates);
  parallel_for(replicates, [&](std::size_t r) {
    RandomStream rng = streams.stream(r);
    EulerStepper stepper(p, scheme);
    std::vector<double> state = x.vec();
    stepper.step(state, dt, rng);
    increments[r] = moment(state, k) - base;
  });

  const double n = static_cast<double>(replicates);
  double mean = 0.0;
  for (double v : increments) mean += v;
  mean /= n;
  double m2 = 0.0, m4 = 0.0;
  for (double v : increments) {
    const double c = (v - mean) * (v - mean);
    m2 += c;
    m4 += c * c;
  }
  const double var = m2 / (n - 1.0);
  m4 /= n;
  const double pop_var = m2 / n;

  MomentDriftReport rep;
  rep.k = k;
  rep.replicates = replicates;
  rep.dt = dt;
  rep.analytic_drift = moment_drift(x, p, k);
  rep.empirical_drift = mean / dt;
  rep.drift_stderr = std::sqrt(var / n) / dt;
  rep.analytic_qv = moment_quadratic_variation(x, k);
  rep.empirical_qv = var / dt;
  rep.qv_stderr = std::sqrt(std::max(m4 - pop_var * pop_var, 0.0) / n) / dt;
  return rep;
}

}  // namespace ratchet
