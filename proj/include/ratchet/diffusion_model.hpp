#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "ratchet/core.hpp"
#include "ratchet/rng.hpp"

namespace ratchet {

enum class ClickMode {
  // Click when coordinate 0 is <= 0 before clipping; time = end of that step.
  PreClipSign,
};

enum class Scheme {
  // Gaussian step on every coordinate, then clip negatives and renormalize.
  EulerClip,
  // Gaussian step on coordinates >= kSmallClass * dt. Smaller coordinates
  // take dt * Poisson(mean / dt) with the Euler mean, drawn by inversion from
  // the same normal, so they can reach 0 without clipping.
  Hybrid,
};

inline constexpr double kSmallClass = 20.0;

struct IntegratorConfig {
  double dt = 1e-3;
  double t_max = 1.0;
  int record_stride = 1;
  ClickMode click_mode = ClickMode::PreClipSign;
  Scheme scheme = Scheme::Hybrid;

  void validate() const;
  long long steps() const;  // round(t_max / dt)
};

// Pre-clip values below this are treated as roundoff and clipped silently.
inline constexpr double kRoundoffFloor = -1e-8;

struct StepReport {
  double pre_clip_x0 = 0.0;
  // Some coordinate that started the step at >= 1e-8 went negative.
  bool clipped = false;
  // Number of coordinates whose pre-clip value fell below kRoundoffFloor.
  int instability = 0;
};

struct StepStats {
  std::uint64_t steps = 0;
  std::uint64_t clipped_steps = 0;
  std::uint64_t instability_events = 0;

  void add(const StepReport& r) {
    ++steps;
    clipped_steps += r.clipped ? 1 : 0;
    instability_events += static_cast<std::uint64_t>(r.instability);
  }
  StepStats& operator+=(const StepStats& o) {
    steps += o.steps;
    clipped_steps += o.clipped_steps;
    instability_events += o.instability_events;
    return *this;
  }
  double clipped_fraction() const {
    return steps == 0 ? 0.0 : static_cast<double>(clipped_steps) / static_cast<double>(steps);
  }
};

/// Euler-Maruyama for the Wright-Fisher system with a shared noise factor
/// w = sum_j sqrt(x_j) xi_j, followed by clip-and-renormalize. The selection
/// term uses sum_i min(i, k) x_i, so k = d gives the full dynamics and k < d
/// the aggregated one.
class EulerStepper {
 public:
  EulerStepper(const Params& p, int k, Scheme scheme = Scheme::Hybrid);
  explicit EulerStepper(const Params& p, Scheme scheme = Scheme::Hybrid) : EulerStepper(p, p.d, scheme) {}

  const Params& params() const { return params_; }
  int k() const { return k_; }
  Scheme scheme() const { return scheme_; }

  // In-place step; x must have d+1 entries on the simplex.
  StepReport step(std::span<double> x, double dt, RandomStream& rng);
  StepReport step_with_normals(std::span<double> x, double dt, std::span<const double> normals);

  // Raw increment before clipping, for invariant checks.
  void raw_increment(std::span<const double> x, double dt, std::span<const double> normals,
                     std::span<double> out);

 private:
  Params params_;
  int k_;
  Scheme scheme_;
  std::vector<double> drift_;
  std::vector<double> root_;
  std::vector<double> normals_;
};

/// One step of the full dynamics. Returns the new profile and the pre-clip
/// value of coordinate 0.
std::pair<Profile, double> euler_step(const Profile& x, const Params& p, double dt, RandomStream& rng,
                                     Scheme scheme = Scheme::Hybrid);

/// Runs until the first click or t_max. Throws InvalidStart if x0[0] <= 0.
Trajectory simulate_path(const Profile& x0, const Params& p, const IntegratorConfig& cfg, RandomStream& rng,
                         StepStats* stats = nullptr);
Trajectory simulate_aggregated_path(const Profile& x0, const Params& p, int k, const IntegratorConfig& cfg,
                                    RandomStream& rng, StepStats* stats = nullptr);

/// Advances x in place by `steps` steps. Returns the step index (1-based) of
/// the first click, if any; with stop_at_click = false the path continues
/// through the absorbed state.
std::optional<long long> advance(std::span<double> x, EulerStepper& stepper, double dt, long long steps,
                                 RandomStream& rng, bool stop_at_click = true, StepStats* stats = nullptr);

/// Finite-variation part of dM_k for the truncated system:
/// alpha (M_1 M_k - M_{k+1}) + lambda sum_{l<d} (l+1)^k x_l - lambda (M_k - d^k x_d).
double moment_drift(const Profile& x, const Params& p, int k);

/// Density of the quadratic variation of M_k: M_{2k} - M_k^2.
double moment_quadratic_variation(const Profile& x, int k);

struct MomentDriftReport {
  int k = 1;
  std::size_t replicates = 0;
  double dt = 0.0;
  double analytic_drift = 0.0;
  double empirical_drift = 0.0;
  double drift_stderr = 0.0;
  double analytic_qv = 0.0;
  double empirical_qv = 0.0;
  double qv_stderr = 0.0;

  double drift_z() const;
  double qv_z() const;
};

MomentDriftReport moment_drift_check(const Profile& x, const Params& p, int k, std::size_t replicates, double dt,
                                     const StreamFactory& streams, Scheme scheme = Scheme::Hybrid);

}  // namespace ratchet
