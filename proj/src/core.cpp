#include "ratchet/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ratchet/error.hpp"

namespace ratchet {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NegativeEntry: return "NegativeEntry";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidK: return "InvalidK";
    case ErrorCode::StepTooLarge: return "StepTooLarge";
    case ErrorCode::InvalidStart: return "InvalidStart";
    case ErrorCode::Extinct: return "Extinct";
    case ErrorCode::WindowTooThin: return "WindowTooThin";
    case ErrorCode::StatisticalFloor: return "StatisticalFloor";
    case ErrorCode::NoDecayWindow: return "NoDecayWindow";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Params Params::make(double alpha, double lambda, int d) {
  if (!std::isfinite(alpha) || alpha < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "alpha must be finite and >= 0");
  }
  if (!std::isfinite(lambda) || lambda < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "lambda must be finite and >= 0");
  }
  if (d < 1) throw Error(ErrorCode::InvalidArgument, "d must be >= 1");
  return Params{alpha, lambda, d};
}

double Params::n_star() const {
  if (alpha <= 0.0) throw Error(ErrorCode::InvalidArgument, "n_star needs alpha > 0");
  return lambda / alpha;
}

Profile Profile::point_mass(int d, int j) {
  if (d < 0 || j < 0 || j > d) throw Error(ErrorCode::InvalidArgument, "point mass index out of range");
  std::vector<double> v(static_cast<std::size_t>(d) + 1, 0.0);
  v[static_cast<std::size_t>(j)] = 1.0;
  return Profile(std::move(v), Profile::Unchecked{});
}

Profile validate_profile(std::span<const double> freqs) {
  if (freqs.empty()) throw Error(ErrorCode::InvalidArgument, "profile must be nonempty");
  double sum = 0.0;
  for (std::size_t i = 0; i < freqs.size(); ++i) {
    if (!std::isfinite(freqs[i])) throw Error(ErrorCode::InvalidArgument, "non-finite entry");
    if (freqs[i] < 0.0) {
      throw Error(ErrorCode::NegativeEntry, "entry " + std::to_string(i) + " is negative");
    }
    if (freqs[i] > 1.0 + kValidationTol) {
      throw Error(ErrorCode::NotNormalized, "entry " + std::to_string(i) + " exceeds 1");
    }
    sum += freqs[i];
  }
  if (std::abs(sum - 1.0) > kValidationTol) {
    throw Error(ErrorCode::NotNormalized, "entries sum to " + std::to_string(sum));
  }
  return Profile(std::vector<double>(freqs.begin(), freqs.end()), Profile::Unchecked{});
}

MomentSpec::MomentSpec(int k) : order(k) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "moment order must be >= 1");
}

double moment(std::span<const double> x, int k) {
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double w = 1.0;
    const double di = static_cast<double>(i);
    for (int e = 0; e < k; ++e) w *= di;
    m += w * x[i];
  }
  return m;
}

double aggregated_mean(std::span<const double> x, int k) {
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    m += static_cast<double>(std::min<std::size_t>(i, static_cast<std::size_t>(k))) * x[i];
  }
  return m;
}

void check_dimension(const Profile& x, const Params& p) {
  if (x.size() != p.size()) {
    throw Error(ErrorCode::DimensionMismatch, "profile has " + std::to_string(x.size()) +
                                                  " entries, params expect " + std::to_string(p.size()));
  }
}

void check_k(int k, int d) {
  if (k < 1 || k > d) {
    throw Error(ErrorCode::InvalidK, "k = " + std::to_string(k) + " outside [1, " + std::to_string(d) + "]");
  }
}

void drift_into(std::span<const double> x, const Params& p, int k, std::span<double> out) {
  const std::size_t n = x.size();
  const std::size_t kk = static_cast<std::size_t>(k);
  const double mean = aggregated_mean(x, k);
  double prev = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double capped = static_cast<double>(std::min(i, kk));
    const double outflow = (i + 1 < n) ? x[i] : 0.0;
    out[i] = p.alpha * (mean - capped) * x[i] + p.lambda * (prev - outflow);
    prev = x[i];
  }
}

std::vector<double> drift_full(const Profile& x, const Params& p) {
  check_dimension(x, p);
  std::vector<double> out(x.size());
  drift_into(x.freqs(), p, p.d, out);
  return out;
}

std::vector<double> drift_aggregated(const Profile& x, const Params& p, int k) {
  check_dimension(x, p);
  check_k(k, p.d);
  std::vector<double> out(x.size());
  drift_into(x.freqs(), p, k, out);
  return out;
}

Eigen::MatrixXd wf_covariance(const Profile& x) {
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::Map<const Eigen::VectorXd> v(x.vec().data(), n);
  Eigen::MatrixXd c = -v * v.transpose();
  c.diagonal() += v;
  return c;
}

Profile poisson_profile(const Params& p) {
  const double mean = p.n_star();
  std::vector<double> x(p.size(), 0.0);
  double weight = std::exp(-mean);
  double head = 0.0;
  for (int i = 0; i < p.d; ++i) {
    x[static_cast<std::size_t>(i)] = weight;
    head += weight;
    weight *= mean / static_cast<double>(i + 1);
  }
  x.back() = std::max(0.0, 1.0 - head);
  return Profile(std::move(x), Profile::Unchecked{});
}

namespace {

// Clips roundoff negatives and rescales onto the simplex.
void renormalize(std::vector<double>& x) {
  double sum = 0.0;
  for (double& v : x) {
    v = std::clamp(v, 0.0, 1.0);
    sum += v;
  }
  for (double& v : x) v /= sum;
}

}  // namespace

Trajectory deterministic_flow(const Profile& x0, const Params& p, double t_end, double dt) {
  check_dimension(x0, p);
  if (!(dt > 0.0) || !(t_end >= dt)) {
    throw Error(ErrorCode::InvalidArgument, "need dt > 0 and t_end >= dt");
  }
  const auto steps = static_cast<long long>(std::llround(t_end / dt));
  const std::size_t n = x0.size();
  std::vector<double> x = x0.vec(), k1(n), k2(n), k3(n), k4(n), tmp(n);

  Trajectory traj;
  traj.times.reserve(static_cast<std::size_t>(steps) + 1);
  traj.states.reserve(static_cast<std::size_t>(steps) + 1);
  traj.times.push_back(0.0);
  traj.states.push_back(x0);

  auto stage = [&](const std::vector<double>& base, const std::vector<double>& slope, double h) {
    for (std::size_t i = 0; i < n; ++i) tmp[i] = base[i] + h * slope[i];
  };
  for (long long s = 1; s <= steps; ++s) {
    drift_into(x, p, p.d, k1);
    stage(x, k1, 0.5 * dt);
    drift_into(tmp, p, p.d, k2);
    stage(x, k2, 0.5 * dt);
    drift_into(tmp, p, p.d, k3);
    stage(x, k3, dt);
    drift_into(tmp, p, p.d, k4);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      if (x[i] < -1e-6) {
        throw Error(ErrorCode::StepTooLarge, "coordinate " + std::to_string(i) + " fell to " +
                                                 std::to_string(x[i]) + " at step " + std::to_string(s));
      }
    }
    renormalize(x);
    traj.times.push_back(static_cast<double>(s) * dt);
    traj.states.emplace_back(x, Profile::Unchecked{});
  }
  return traj;
}

Profile project_pi_k(const Profile& x, int k) {
  check_k(k, x.dim());
  std::vector<double> out(static_cast<std::size_t>(k) + 1, 0.0);
  double head = 0.0;
  for (int i = 0; i < k; ++i) {
    out[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)];
    head += x[static_cast<std::size_t>(i)];
  }
  out.back() = std::max(0.0, 1.0 - head);
  return Profile(std::move(out), Profile::Unchecked{});
}

}  // namespace ratchet
