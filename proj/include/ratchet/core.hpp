#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace ratchet {

// Tolerance for exact algebraic identities evaluated in double precision.
inline constexpr double kIdentityTol = 1e-12;
// Tolerance for accepting user-supplied simplex vectors.
inline constexpr double kValidationTol = 1e-9;

/// Model constants of the ratchet diffusion: selection per mutation, mutation
/// rate and the truncation dimension (classes 0..d are tracked).
///
/// Zero rates are accepted so that neutral and mutation-free control runs can
/// be expressed; quantities that need lambda/alpha check for it themselves.
struct Params {
  double alpha = 1.0;
  double lambda = 1.0;
  int d = 15;

  static Params make(double alpha, double lambda, int d);

  double n_star() const;
  std::size_t size() const { return static_cast<std::size_t>(d) + 1; }
};

/// A point of the truncated simplex: frequencies x_0..x_d of individuals
/// carrying i deleterious mutations.
class Profile {
 public:
  struct Unchecked {};

  Profile() = default;
  // Caller guarantees the simplex invariants.
  Profile(std::vector<double> freqs, Unchecked) : freqs_(std::move(freqs)) {}

  static Profile point_mass(int d, int j);

  std::span<const double> freqs() const { return freqs_; }
  const std::vector<double>& vec() const { return freqs_; }
  double operator[](std::size_t i) const { return freqs_[i]; }
  std::size_t size() const { return freqs_.size(); }
  int dim() const { return static_cast<int>(freqs_.size()) - 1; }

  friend bool operator==(const Profile&, const Profile&) = default;

 private:
  std::vector<double> freqs_;
};

/// Rejects (never repairs) vectors with negative entries or a sum off 1.
Profile validate_profile(std::span<const double> freqs);

struct MomentSpec {
  int order = 1;
  explicit MomentSpec(int k);
};

/// M_k(x) = sum_i i^k x_i. Order 0 gives the total mass.
double moment(std::span<const double> x, int k);
inline double moment(const Profile& x, MomentSpec k) { return moment(x.freqs(), k.order); }

/// Truncated first moment sum_i min(i, k) x_i used by the aggregated dynamics.
double aggregated_mean(std::span<const double> x, int k);

std::vector<double> drift_full(const Profile& x, const Params& p);
std::vector<double> drift_aggregated(const Profile& x, const Params& p, int k);

// Raw kernels on spans. k = d reproduces the full drift.
void drift_into(std::span<const double> x, const Params& p, int k, std::span<double> out);

/// Instantaneous covariance of the Wright-Fisher noise: x_i delta_ij - x_i x_j.
Eigen::MatrixXd wf_covariance(const Profile& x);

/// Poisson(lambda/alpha) weights for classes below d, tail mass saturated in d.
Profile poisson_profile(const Params& p);

struct Trajectory {
  std::vector<double> times;
  std::vector<Profile> states;
  std::optional<double> click_time;  // nullopt when censored

  bool clicked() const { return click_time.has_value(); }
};

/// Noise-free flow integrated with classical RK4, renormalized each step.
Trajectory deterministic_flow(const Profile& x0, const Params& p, double t_end, double dt);

/// Aggregation of classes >= k into class k (result has k+1 entries).
Profile project_pi_k(const Profile& x, int k);

void check_dimension(const Profile& x, const Params& p);
void check_k(int k, int d);

}  // namespace ratchet
