#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ratchet/core.hpp"
#include "ratchet/diffusion_model.hpp"
#include "ratchet/rng.hpp"
#include "ratchet/stats.hpp"

namespace ratchet {

/// Weighted particle approximation of a conditioned law. `ids` name each
/// particle's random substream and travel with the particle, so reordering
/// the ensemble does not change what happens to any particle.
struct ParticleEnsemble {
  std::vector<Profile> particles;
  std::vector<double> weights;
  std::vector<std::uint64_t> ids;
  double time = 0.0;
  std::uint64_t resample_events = 0;

  static ParticleEnsemble uniform(std::vector<Profile> particles);
  static ParticleEnsemble replicate(const Profile& x, std::size_t n);

  std::size_t size() const { return particles.size(); }
  void validate() const;
};

/// Number of replicates still unclicked at each grid time.
struct SurvivalCurve {
  std::vector<double> times;
  std::vector<std::uint64_t> survivors;
  std::uint64_t total = 0;

  void validate() const;
  double fraction(std::size_t i) const { return static_cast<double>(survivors[i]) / static_cast<double>(total); }
};

struct Estimate {
  double value = 0.0;
  double stderr_ = 0.0;
};

struct ConditionedEvolution {
  ParticleEnsemble ensemble;
  SurvivalCurve survival;
};

/// Evolves every particle independently; clicked particles are dropped and
/// the surviving weights renormalized. Survival is logged every
/// cfg.record_stride steps. Throws Extinct if nothing survives.
ConditionedEvolution conditioned_ensemble_evolve(const ParticleEnsemble& e, const Params& p,
                                                 const IntegratorConfig& cfg, double horizon,
                                                 const StreamFactory& streams);

struct FlemingViotOptions {
  double burn_in_fraction = 0.5;
  double snapshot_interval = 0.5;  // pooled QSD sample cadence after burn-in
  int batches = 20;                // batch means for standard errors
};

struct FlemingViotRun {
  ParticleEnsemble ensemble;                 // particle states at the horizon
  std::vector<std::uint32_t> restarts;       // restarts per step
  double dt = 0.0;
  std::vector<Profile> pooled;               // snapshots after burn-in
  std::vector<int> pooled_batch;             // batch index of each pooled state
  Estimate restart_rate;                     // per particle per unit time, after burn-in
  std::vector<double> batch_rates;

  /// Restarts per particle per unit time over [t_lo, t_hi).
  double rate_in_window(double t_lo, double t_hi) const;
};

/// Fleming-Viot particle system: a clicking particle restarts from the
/// post-step state of a survivor chosen uniformly by its own substream.
/// Throws Extinct if all particles click within the same step.
FlemingViotRun fleming_viot_evolve(const ParticleEnsemble& e, const Params& p, const IntegratorConfig& cfg,
                                   double horizon, const StreamFactory& streams,
                                   const FlemingViotOptions& options = {});

/// Survival-slope estimate of the clicking rate on [t_lo, t_hi]: weighted
/// least squares of -log(survivors/total) against time, bootstrap stderr
/// from resampling replicates through the curve's click-time histogram.
Estimate estimate_rho0(const SurvivalCurve& sc, double t_lo, double t_hi, RandomStream& rng, int resamples = 200);

struct EtaCurve {
  std::vector<double> times;
  std::vector<double> eta;
  std::vector<double> stderr_;
  std::vector<std::uint64_t> survivors;
  std::uint64_t total = 0;
  double plateau_lo = 0.0;
  double plateau_hi = 0.0;
  Estimate plateau;
};

/// eta_t(x) = e^{rho0 t} P_x(t < click) on the recording grid of cfg, with
/// binomial stderr. The plateau window defaults to the second half of the
/// range where at least 50 replicates survive.
EtaCurve estimate_eta(const Profile& x, const Params& p, double rho0, const IntegratorConfig& cfg,
                      std::size_t replicates, const StreamFactory& streams,
                      std::optional<std::array<double, 2>> plateau_window = std::nullopt);

struct QProcessSample {
  std::vector<Trajectory> paths;  // accepted, restricted to [0, t]
  std::size_t attempted = 0;
  double acceptance_rate = 0.0;

  std::vector<Profile> final_states() const;
};

/// Rejection sampler for the process conditioned to survive: simulate to
/// t + guard, keep survivors, cut at t. Throws StatisticalFloor below 50
/// accepted paths.
QProcessSample sample_qprocess(const Profile& x0, const Params& p, double t, double guard,
                               const IntegratorConfig& cfg, std::size_t replicates, const StreamFactory& streams);

struct QsdOptions {
  std::size_t particles = 2000;
  double horizon = 40.0;
  FlemingViotOptions fv;
  std::optional<Profile> initial;  // default: Poisson profile (or delta_0 when alpha = 0)
};

struct QsdEstimate {
  ParticleEnsemble ensemble;       // pooled QSD sample, uniform weights
  std::vector<int> batch;          // batch index of each pooled state
  int batches = 0;
  Estimate rho0;                   // Fleming-Viot restart rate
  std::array<Estimate, 4> moments; // M_1..M_4 under the pooled sample, batch-means stderr
  std::vector<EtaCurve> eta_curve; // filled on demand
  double run_time = 0.0;

  double t_c() const { return 1.0 / rho0.value; }
};

QsdEstimate estimate_qsd(const Params& p, const IntegratorConfig& cfg, const QsdOptions& options,
                         const StreamFactory& streams);

/// Quantile of M_k under the pooled QSD sample; stderr from batch quantiles.
Estimate moment_quantile(const QsdEstimate& q, int k, double level);

struct ClickSample {
  std::vector<double> click_times;  // clicked replicates only
  std::size_t censored = 0;
  SurvivalCurve survival;
};

/// Independent runs from starts drawn uniformly from `starts`, up to cfg.t_max.
ClickSample sample_click_times(std::span<const Profile> starts, const Params& p, const IntegratorConfig& cfg,
                               std::size_t replicates, const StreamFactory& streams);

struct PushforwardReport {
  double delta_t = 0.0;
  double tv = 0.0;
  std::size_t input_size = 0;
  std::size_t survivors = 0;
  int bins = 20;
};

/// Evolves the pooled QSD sample by delta_t conditioned on survival and
/// compares (X_0, M_1) histograms with the input. Needs >= 1000 particles.
PushforwardReport qsd_pushforward_check(const QsdEstimate& q, const Params& p, double delta_t,
                                        const IntegratorConfig& cfg, const StreamFactory& streams, int bins = 20);
PushforwardReport pushforward_check(const ParticleEnsemble& e, const Params& p, double delta_t,
                                    const IntegratorConfig& cfg, const StreamFactory& streams, int bins = 20);

/// Weights proportional to single-run survival over `horizon` for each
/// QSD sample point: a Monte Carlo version of eta * nu, normalized.
std::vector<double> beta_weights(const ParticleEnsemble& nu, const Params& p, const IntegratorConfig& cfg,
                                 double horizon, std::size_t runs_per_particle, const StreamFactory& streams);

stats::Summary2D summarize_profiles(std::span<const Profile> xs, std::span<const double> weights = {});

}  // namespace ratchet
