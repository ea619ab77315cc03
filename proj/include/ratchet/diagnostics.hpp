#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ratchet/core.hpp"
#include "ratchet/diffusion_model.hpp"
#include "ratchet/discrete_model.hpp"
#include "ratchet/qsd.hpp"
#include "ratchet/rng.hpp"
#include "ratchet/stats.hpp"

namespace ratchet {

/// Named scalar results with uncertainty plus pass/fail flags; the digest
/// identifies the configuration that produced them.
struct ExperimentReport {
  std::string name;
  std::string config_digest;
  std::map<std::string, Estimate> scalars;
  std::map<std::string, bool> flags;
};

// ---------------------------------------------------------------------------
// Correlation decay under the QSD

struct CorrelationSeries {
  int k = 0;
  std::vector<double> corr;
  std::vector<double> band_lo;  // bootstrap 2.5% / 97.5%
  std::vector<double> band_hi;

  /// First grid time with |corr| < threshold, if any.
  std::optional<double> crossing_time(std::span<const double> times, double threshold) const;
};

struct CorrelationReport {
  std::vector<double> times;
  std::vector<double> survival;  // fraction of replicates alive at each time
  std::vector<CorrelationSeries> series;
  double gate_time = 0.0;        // last grid time with survival >= min_survival
};

/// corr(X_k(t), X_0(0)) over replicates started from the QSD sample that are
/// still alive at t. The grid is cut where survival drops below
/// min_survival.
CorrelationReport correlation_decay(const QsdEstimate& q, const Params& p, std::span<const int> ks,
                                    std::span<const double> t_grid, const IntegratorConfig& cfg,
                                    std::size_t replicates, const StreamFactory& streams,
                                    double min_survival = 0.9, int bootstrap = 200);

// ---------------------------------------------------------------------------
// Relaxation between two initial conditions

struct RelaxationFit {
  std::vector<double> times;
  std::vector<double> tv;
  std::vector<double> noise_floor;  // permutation TV at matched sample sizes
  std::vector<std::size_t> survivors_a;
  std::vector<std::size_t> survivors_b;
  std::vector<std::size_t> window;  // grid indices used in the fit
  Estimate gamma;

  /// 1/gamma with delta-method stderr; an upper-bound proxy for t_R.
  Estimate relaxation_time() const;
};

/// Binned TV between the survivor laws from x_a and x_b on t_grid, and an
/// exponential fit on the points with TV in [0.02, 0.5] that also sit above
/// twice the permutation noise floor. Throws NoDecayWindow with fewer than 3
/// such points or a non-positive rate.
RelaxationFit relaxation_rate_fit(const Profile& x_a, const Profile& x_b, const Params& p,
                                  std::span<const double> t_grid, const IntegratorConfig& cfg,
                                  std::size_t replicates, const StreamFactory& streams, int bins = 20,
                                  int bootstrap = 100);

// ---------------------------------------------------------------------------
// Uniformity in the truncation dimension

struct TightnessRow {
  int d = 0;
  Estimate quantile;
  Estimate rho0;
  Estimate mean_m1;
  std::size_t holder_violations = 0;  // samples with M_1 > M_k^{1/k}
  std::size_t samples = 0;
};

std::vector<TightnessRow> moment_tightness_scan(const Params& p_base, std::span<const int> d_list, int k,
                                                double level, const IntegratorConfig& cfg,
                                                const QsdOptions& options, const StreamFactory& streams);

// ---------------------------------------------------------------------------
// Autonomy of the aggregated projection

struct AutonomyReport {
  std::vector<std::string> labels;  // x_0..x_{k-1}, tail, M1^(k)
  std::vector<stats::KsResult> tests;
  double min_p = 1.0;
  double corrected_min_p = 1.0;  // Bonferroni

  bool rejects(double level) const { return corrected_min_p < level; }
};

/// Two-sample KS comparison of pi_k(X_t) and M_1^(k)(X_t) for two starts that
/// share coordinates 0..k-1. `aggregated` = false runs the full dynamics as a
/// control. Paths continue through a click.
AutonomyReport pi_k_autonomy_test(std::span<const double> head, std::span<const double> tail_a,
                                  std::span<const double> tail_b, const Params& p, int k, double t,
                                  const IntegratorConfig& cfg, std::size_t replicates,
                                  const StreamFactory& streams, bool aggregated = true);

// ---------------------------------------------------------------------------
// Discrete model against the diffusion

struct ModelMoments {
  stats::MeanEstimate m1;
  stats::MeanEstimate x0;
  double m1_variance = 0.0;
  double x0_variance = 0.0;
};

struct CompareReport {
  std::uint64_t n = 0;
  long long generations = 0;
  ModelMoments discrete;
  ModelMoments diffusion;
  Estimate m1_relative_gap;
  Estimate x0_relative_gap;
  double m1_variance_relative_gap = 0.0;
};

/// Runs N*t discrete generations with per-generation rates alpha/N and
/// lambda/N against diffusion time t, both unconditioned.
CompareReport discrete_vs_diffusion_compare(std::uint64_t n, const Params& p, double t, const Profile& x0,
                                            const IntegratorConfig& cfg, std::size_t replicates,
                                            const StreamFactory& streams);

/// Closest population of size n to a profile (largest-remainder rounding).
DiscretePopulation population_from_profile(const Profile& x, std::uint64_t n);

// ---------------------------------------------------------------------------
// Inter-click statistics

struct ClickStatsReport {
  std::size_t n = 0;
  double mean = 0.0;
  double median = 0.0;
  std::vector<std::pair<double, double>> quantiles;  // (level, value)
  stats::KsResult exponential_fit;
  std::optional<double> relaxation_time;
  bool metastable = false;  // t_R < t_C / 10
};

ClickStatsReport click_statistics(std::span<const double> click_times,
                                  std::optional<double> relaxation_time = std::nullopt);
ClickStatsReport click_statistics(std::span<const Trajectory> paths,
                                  std::optional<double> relaxation_time = std::nullopt);

}  // namespace ratchet
