// Acceptance run: one line per criterion, nonzero exit if any fails.

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ratchet/core.hpp"
#include "ratchet/diagnostics.hpp"
#include "ratchet/diffusion_model.hpp"
#include "ratchet/error.hpp"
#include "ratchet/parallel.hpp"
#include "ratchet/qsd.hpp"
#include "ratchet/rng.hpp"
#include "ratchet/stats.hpp"

#ifndef RATCHET_QSD_BINARY
#define RATCHET_QSD_BINARY "ratchet-qsd"
#endif

using namespace ratchet;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string pm(const Estimate& e) { return fmt("%.4g", e.value) + " +- " + fmt("%.2g", e.stderr_); }

bool agree(const Estimate& a, const Estimate& b, double sigmas = 2.0) {
  return std::abs(a.value - b.value) <= sigmas * std::hypot(a.stderr_, b.stderr_);
}

// Random simplex point with a mix of dense, sparse and tiny coordinates.
std::vector<double> random_state(std::mt19937_64& gen, int d) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(static_cast<std::size_t>(d) + 1);
  const int mode = static_cast<int>(gen() % 3);
  double s = 0.0;
  for (auto& e : v) {
    double w = -std::log(1.0 - u(gen));
    if (mode == 1 && u(gen) < 0.5) w = 0.0;
    if (mode == 2) w *= std::pow(10.0, -12.0 * u(gen));
    e = w;
    s += w;
  }
  if (s == 0.0) {
    v[0] = 1.0;
    s = 1.0;
  }
  for (auto& e : v) e /= s;
  return v;
}

// 1. ---------------------------------------------------------------------
Verdict algebraic_invariants() {
  std::mt19937_64 gen(20240601);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> normal;
  double drift_sum = 0.0, noise_sum = 0.0, simplex = 0.0, holder = 0.0, min_eig = 0.0;
  bool negative = false;
  const int states = 100000;
  for (int n = 0; n < states; ++n) {
    const int d = 1 + static_cast<int>(gen() % 30);
    const Params p = Params::make(2.0 * u(gen), 3.0 * u(gen), d);
    const std::vector<double> raw = random_state(gen, d);
    const Profile x = validate_profile(raw);
    const int k = 1 + static_cast<int>(gen() % static_cast<unsigned>(d));

    const auto full = drift_full(x, p);
    const auto agg = drift_aggregated(x, p, k);
    double s1 = 0.0, s2 = 0.0;
    for (double v : full) s1 += v;
    for (double v : agg) s2 += v;
    drift_sum = std::max({drift_sum, std::abs(s1), std::abs(s2)});

    std::vector<double> normals(x.size()), inc(x.size());
    for (auto& z : normals) z = normal(gen);
    EulerStepper stepper(p, k);
    stepper.raw_increment(x.freqs(), 1e-3, normals, inc);
    double s3 = 0.0;
    for (double v : inc) s3 += v;
    noise_sum = std::max(noise_sum, std::abs(s3));

    std::vector<double> y = x.vec();
    stepper.step_with_normals(y, 1e-3, normals);
    double s4 = 0.0;
    for (double v : y) {
      negative = negative || v < 0.0;
      s4 += v;
    }
    simplex = std::max(simplex, std::abs(s4 - 1.0));

    const double m1 = moment(x.freqs(), 1);
    for (int j = 1; j <= 3; ++j) {
      const double lhs = m1 * moment(x.freqs(), j);
      const double rhs = moment(x.freqs(), j + 1);
      holder = std::max(holder, (lhs - rhs) / (1.0 + std::abs(rhs)));
    }

    const Eigen::MatrixXd c = wf_covariance(x);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c, Eigen::EigenvaluesOnly);
    min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
  }
  const double tol = 1e-12;
  Verdict v;
  v.pass = drift_sum <= tol && noise_sum <= tol && simplex <= tol && !negative && holder <= tol && min_eig >= -tol;
  v.detail = "states=100000 max|sum drift|=" + fmt("%.1e", drift_sum) + " max|sum raw increment|=" +
             fmt("%.1e", noise_sum) + " max|sum-1|=" + fmt("%.1e", simplex) + (negative ? " negative entry" : "") +
             " holder excess=" + fmt("%.1e", holder) + " min eigenvalue=" + fmt("%.1e", min_eig);
  return v;
}

// 2. ---------------------------------------------------------------------
Verdict deterministic_equilibrium() {
  const Params p = Params::make(1.0, 2.0, 40);
  const Profile x0 = validate_profile(std::vector<double>(41, 1.0 / 41.0));
  const Trajectory flow = deterministic_flow(x0, p, 200.0, 0.01);
  const Profile target = poisson_profile(p);
  double sup = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) sup = std::max(sup, std::abs(flow.states.back()[i] - target[i]));
  double residual = 0.0;
  for (double v : drift_full(target, p)) residual = std::max(residual, std::abs(v));
  return {sup < 1e-5 && residual < 1e-6,
          "sup|x(200) - poisson|=" + fmt("%.2e", sup) + " drift residual=" + fmt("%.2e", residual)};
}

// 3. ---------------------------------------------------------------------
Verdict ito_structure() {
  const Params p = Params::make(1.0, 1.0, 3);
  const std::vector<std::vector<double>> states{
      {0.4, 0.3, 0.2, 0.1}, {0.25, 0.25, 0.25, 0.25}, {0.6, 0.1, 0.2, 0.1}};
  const double dt = 1e-3;
  const std::size_t reps = 100000;
  double worst_mean = 0.0, worst_cov = 0.0, worst_moment = 0.0;
  for (std::size_t s = 0; s < states.size(); ++s) {
    const Profile x = validate_profile(states[s]);
    const StreamFactory f(303, s);
    std::vector<std::vector<double>> inc(reps);
    parallel_for(reps, [&](std::size_t r) {
      RandomStream rng = f.stream(r);
      EulerStepper stepper(p);
      std::vector<double> y = x.vec();
      stepper.step(y, dt, rng);
      for (std::size_t i = 0; i < y.size(); ++i) y[i] -= x[i];
      inc[r] = std::move(y);
    });
    const std::size_t n = x.size();
    const auto drift = drift_full(x, p);
    const Eigen::MatrixXd cov = wf_covariance(x) * dt;
    std::vector<double> mean(n, 0.0);
    for (const auto& v : inc)
      for (std::size_t i = 0; i < n; ++i) mean[i] += v[i];
    for (auto& m : mean) m /= static_cast<double>(reps);
    for (std::size_t i = 0; i < n; ++i) {
      double var = 0.0;
      for (const auto& v : inc) var += (v[i] - mean[i]) * (v[i] - mean[i]);
      var /= static_cast<double>(reps - 1);
      worst_mean = std::max(worst_mean, std::abs(mean[i] - drift[i] * dt) / std::sqrt(var / reps));
      for (std::size_t j = i; j < n; ++j) {
        std::vector<double> prod(reps);
        for (std::size_t r = 0; r < reps; ++r) prod[r] = (inc[r][i] - mean[i]) * (inc[r][j] - mean[j]);
        const auto m = stats::mean_estimate(prod);
        worst_cov = std::max(worst_cov, std::abs(m.mean - cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) /
                                            m.stderr_);
      }
    }
    for (int k : {1, 2}) {
      const auto rep = moment_drift_check(x, p, k, reps, dt, StreamFactory(304, s * 10 + static_cast<std::size_t>(k)));
      worst_moment = std::max({worst_moment, std::abs(rep.drift_z()), std::abs(rep.qv_z())});
    }
  }
  return {worst_mean < 5 && worst_cov < 5 && worst_moment < 5,
          "max z: mean=" + fmt("%.2f", worst_mean) + " covariance=" + fmt("%.2f", worst_cov) +
              " moment drift/qv=" + fmt("%.2f", worst_moment)};
}

// 4. ---------------------------------------------------------------------
stats::MeanEstimate mean_m1_at(double dt, const Params& p, std::size_t reps, const StreamFactory& f) {
  const Profile x0 = poisson_profile(p);
  const long long steps = std::llround(1.0 / dt);
  std::vector<double> m1(reps);
  parallel_for(reps, [&](std::size_t r) {
    RandomStream rng = f.stream(r);
    EulerStepper stepper(p);
    std::vector<double> x = x0.vec();
    advance(x, stepper, dt, steps, rng, false);
    m1[r] = moment(x, 1);
  });
  return stats::mean_estimate(m1);
}

Verdict weak_order() {
  const Params p = Params::make(1.0, 1.0, 15);
  const auto coarse = mean_m1_at(1e-3, p, 10000, StreamFactory(404, 1));
  const auto fine = mean_m1_at(5e-4, p, 10000, StreamFactory(404, 2));
  const double diff = std::abs(coarse.mean - fine.mean);
  const double se = std::hypot(coarse.stderr_, fine.stderr_);
  return {diff < se, "E[M1](1) dt=1e-3: " + fmt("%.5f", coarse.mean) + ", dt=5e-4: " + fmt("%.5f", fine.mean) +
                         ", |diff|=" + fmt("%.2e", diff) + " combined stderr=" + fmt("%.2e", se)};
}

// 5, 6, 9 share Fleming-Viot runs. ---------------------------------------
QsdOptions fv_options() {
  QsdOptions o;
  o.particles = 2000;
  o.horizon = 40.0;
  o.fv.snapshot_interval = 0.25;
  return o;
}

Verdict qsd_self_consistency(const QsdEstimate& q, const Params& p) {
  IntegratorConfig cfg;
  const auto pf = qsd_pushforward_check(q, p, 1.0, cfg, StreamFactory(505, 2));

  IntegratorConfig long_cfg;
  long_cfg.t_max = 30.0;
  long_cfg.record_stride = 50;
  const ClickSample cs = sample_click_times(q.ensemble.particles, p, long_cfg, 10000, StreamFactory(505, 3));
  const double hi = std::min(3.0 * q.t_c(), cs.survival.times.back());
  RandomStream boot = StreamFactory(505, 4).stream(0);
  const Estimate slope = estimate_rho0(cs.survival, 0.0, hi, boot);
  const double rate = q.rho0.value;
  const auto ks = stats::ks_one_sample(cs.click_times, [rate](double t) { return t <= 0 ? 0.0 : 1.0 - std::exp(-rate * t); });

  const bool ok = pf.tv < 0.05 && agree(slope, q.rho0) && ks.p_value > 0.01 && cs.censored == 0;
  return {ok, "pushforward TV=" + fmt("%.4f", pf.tv) + " restart rate=" + pm(q.rho0) + " survival slope=" +
                  pm(slope) + " KS p=" + fmt("%.3f", ks.p_value) + " censored=" + std::to_string(cs.censored)};
}

Verdict d_robustness(const QsdEstimate& q15, const QsdEstimate& q30) {
  const Estimate a = moment_quantile(q15, 3, 0.95);
  const Estimate b = moment_quantile(q30, 3, 0.95);
  return {agree(q15.rho0, q30.rho0) && agree(a, b),
          "rho0 d=15: " + pm(q15.rho0) + " d=30: " + pm(q30.rho0) + "; q95(M3) d=15: " + pm(a) + " d=30: " + pm(b)};
}

Verdict metastability(const QsdEstimate& q, const Params& p) {
  IntegratorConfig cfg;
  std::vector<double> grid;
  for (int i = 0; i <= 30; ++i) grid.push_back(0.1 * i);
  const RelaxationFit fit = relaxation_rate_fit(Profile::point_mass(p.d, 0), poisson_profile(p), p, grid, cfg, 10000,
                                                StreamFactory(909, 1));
  const Estimate tr = fit.relaxation_time();
  const double tc = q.t_c();
  const double tc_se = q.rho0.stderr_ / (q.rho0.value * q.rho0.value);
  const bool ordered = tr.value + 2.0 * std::hypot(tr.stderr_, tc_se) < tc;

  std::vector<double> cgrid;
  for (int i = 0; i <= 40; ++i) cgrid.push_back(0.05 * i);
  const std::vector<int> ks{0, 1, 2, 3};
  const CorrelationReport rep = correlation_decay(q, p, ks, cgrid, cfg, 40000, StreamFactory(909, 2), 0.5, 200);
  bool crosses = true;
  std::string cross_text;
  for (const auto& s : rep.series) {
    const auto c = s.crossing_time(rep.times, 0.1);
    crosses = crosses && c && *c < tc / 2.0;
    cross_text += " k" + std::to_string(s.k) + "=" + (c ? fmt("%.2f", *c) : std::string("none"));
  }
  return {ordered && crosses, "1/gamma=" + pm(tr) + " t_C=" + fmt("%.3f", tc) + " +- " + fmt("%.2g", tc_se) +
                                  "; |corr|<0.1 at" + cross_text + " (t_C/2=" + fmt("%.3f", tc / 2.0) + ")"};
}

// 7. ---------------------------------------------------------------------
Verdict autonomy() {
  const Params p = Params::make(1.0, 1.0, 12);
  const int k = 3;
  IntegratorConfig cfg;
  const Profile pois = poisson_profile(p);
  std::vector<double> head(pois.freqs().begin(), pois.freqs().begin() + k);
  double tail_mass = 1.0;
  for (double h : head) tail_mass -= h;
  std::vector<double> tail_a(static_cast<std::size_t>(p.d - k + 1), 0.0), tail_b = tail_a;
  tail_a.front() = tail_mass;
  tail_b.back() = tail_mass;

  const AutonomyReport rep = pi_k_autonomy_test(head, tail_a, tail_b, p, k, 1.0, cfg, 10000, StreamFactory(707, 1));
  const AutonomyReport control =
      pi_k_autonomy_test(head, tail_a, tail_b, p, k, 1.0, cfg, 10000, StreamFactory(707, 1), false);

  int rejections = 0;
  const int repeats = 200;
  for (int r = 0; r < repeats; ++r) {
    const AutonomyReport null =
        pi_k_autonomy_test(head, tail_a, tail_a, p, k, 1.0, cfg, 2000, StreamFactory(708, static_cast<std::uint64_t>(r)));
    rejections += null.rejects(0.01) ? 1 : 0;
  }
  const double rate = static_cast<double>(rejections) / repeats;
  return {!rep.rejects(0.01) && rate <= 0.03,
          "aggregated corrected p=" + fmt("%.3f", rep.corrected_min_p) + " (full-drift control p=" +
              fmt("%.2e", control.corrected_min_p) + ") null rejection rate=" + fmt("%.3f", rate) + " over 200"};
}

// 8. ---------------------------------------------------------------------
Verdict discrete_scaling() {
  const Params p = Params::make(1.0, 1.0, 15);
  IntegratorConfig cfg;
  const Profile x0 = Profile::point_mass(p.d, 0);
  const auto a = discrete_vs_diffusion_compare(1000, p, 1.0, x0, cfg, 4000, StreamFactory(808, 1));
  const auto b = discrete_vs_diffusion_compare(2000, p, 1.0, x0, cfg, 4000, StreamFactory(808, 2));
  const bool ok = a.m1_relative_gap.value < 0.1 &&
                  b.m1_relative_gap.value <= a.m1_relative_gap.value +
                                                 2.0 * std::hypot(a.m1_relative_gap.stderr_, b.m1_relative_gap.stderr_);
  return {ok, "relative M1 gap N=1000: " + pm(a.m1_relative_gap) + ", N=2000: " + pm(b.m1_relative_gap)};
}

// 10. --------------------------------------------------------------------
std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct CliCase {
  std::string experiment;
  std::string config;
};

Verdict cli_reproducibility(const fs::path& work) {
  const std::string base = R"("alpha": 1, "lambda": 1, "seed": 77, )";
  const std::vector<CliCase> cases{
      {"simulate", R"({"model": "diffusion", "d": 10, )" + base + R"("replicates": 64, "t_max": 1, "record_stride": 100})"},
      {"simulate", R"({"model": "discrete", "alpha": 0.01, "lambda": 0.01, "d": 10, "seed": 77, "replicates": 16, "population_size": 200, "generations": 300, "record_stride": 50})"},
      {"qsd", R"({"model": "diffusion", "d": 10, )" + base + R"("particles": 200, "horizon": 4, "snapshot_interval": 0.1, "delta_t": 0.5})"},
      {"eta", R"({"model": "diffusion", "d": 10, )" + base + R"("rho0": 0.43, "replicates": 400, "t_max": 2, "record_stride": 100})"},
      {"qprocess", R"({"model": "diffusion", "d": 10, )" + base + R"("replicates": 100, "t_max": 0.5, "guard": 0.5, "record_stride": 100})"},
      {"correlations", R"({"model": "diffusion", "d": 10, )" + base + R"("particles": 200, "horizon": 4, "replicates": 1000, "t_max": 0.3, "grid_step": 0.1, "bootstrap": 20})"},
      {"relaxation", R"({"model": "diffusion", "d": 10, )" + base + R"("replicates": 3000, "t_max": 2, "grid_step": 0.1, "bootstrap": 10})"},
      {"tightness", R"({"model": "diffusion", "d": 10, )" + base + R"("particles": 100, "horizon": 4, "d_list": [6, 10]})"},
      {"autonomy", R"({"model": "aggregated", "k": 3, "d": 10, )" + base + R"("replicates": 300, "t_max": 0.5})"},
      {"compare", R"({"model": "diffusion", "d": 10, )" + base + R"("population_sizes": [100, 200], "replicates": 200, "t_max": 0.5})"},
      {"clickstats", R"({"model": "diffusion", "d": 10, )" + base + R"("particles": 200, "horizon": 4, "replicates": 500, "t_max": 30, "record_stride": 50})"},
  };
  fs::remove_all(work);
  fs::create_directories(work);
  std::size_t files = 0;
  std::string failure;
  for (std::size_t c = 0; c < cases.size(); ++c) {
    const fs::path cfg = work / ("case" + std::to_string(c) + ".json");
    std::ofstream(cfg) << cases[c].config;
    std::vector<fs::path> outs;
    std::vector<int> codes;
    for (int threads : {1, 4, 8, 1}) {
      const fs::path out = work / ("case" + std::to_string(c) + "_t" + std::to_string(threads) + "_" +
                                   std::to_string(outs.size()));
      const std::string cmd = std::string("\"") + RATCHET_QSD_BINARY + "\" " + cases[c].experiment + " --config \"" +
                              cfg.string() + "\" --out \"" + out.string() + "\" --threads " +
                              std::to_string(threads) + " > /dev/null 2>&1";
      codes.push_back(std::system(cmd.c_str()));
      outs.push_back(out);
    }
    if (codes[0] != 0) failure += " " + cases[c].experiment + "#" + std::to_string(c) + " exit " + std::to_string(codes[0]);
    for (std::size_t i = 1; i < outs.size(); ++i) {
      if (codes[i] != codes[0]) failure += " " + cases[c].experiment + " exit codes differ";
      for (const auto& entry : fs::directory_iterator(outs[0])) {
        const fs::path other = outs[i] / entry.path().filename();
        if (!fs::exists(other) || slurp(entry.path()) != slurp(other)) {
          failure += " " + cases[c].experiment + "/" + entry.path().filename().string();
        }
        ++files;
      }
    }
  }
  return {failure.empty(), std::to_string(cases.size()) + " runs x threads {1,4,8} + rerun, " +
                               std::to_string(files) + " file comparisons" +
                               (failure.empty() ? std::string() : "; mismatches:" + failure)};
}

}  // namespace

int main(int argc, char** argv) {
  set_thread_count(0);
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "ratchet_acceptance";
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Verdict()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = body();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += v.pass ? 0 : 1;
    std::printf("criterion %2d %s  %s  [%s; %.0f s]\n", id, v.pass ? "PASS" : "FAIL", name, v.detail.c_str(), secs);
    std::fflush(stdout);
  };

  report(1, "algebraic invariants", algebraic_invariants);
  report(2, "deterministic equilibrium", deterministic_equilibrium);
  report(3, "Ito structure", ito_structure);
  report(4, "weak-order consistency", weak_order);

  const Params p15 = Params::make(1.0, 1.0, 15);
  const Params p30 = Params::make(1.0, 1.0, 30);
  IntegratorConfig cfg;
  std::optional<QsdEstimate> q15, q30;
  std::string fv_error;
  try {
    q15 = estimate_qsd(p15, cfg, fv_options(), StreamFactory(505, 1));
    q30 = estimate_qsd(p30, cfg, fv_options(), StreamFactory(606, 1));
  } catch (const std::exception& e) {
    fv_error = e.what();
  }
  auto need_fv = [&](const std::function<Verdict()>& f) -> std::function<Verdict()> {
    return [&, f] { return q15 && q30 ? f() : Verdict{false, "Fleming-Viot run failed: " + fv_error}; };
  };

  report(5, "QSD self-consistency", need_fv([&] { return qsd_self_consistency(*q15, p15); }));
  report(6, "d-robustness", need_fv([&] { return d_robustness(*q15, *q30); }));
  report(7, "pi_k autonomy", autonomy);
  report(8, "discrete-diffusion scaling", discrete_scaling);
  report(9, "metastability ordering", need_fv([&] { return metastability(*q15, p15); }));
  report(10, "reproducibility", [&] { return cli_reproducibility(work); });

  std::printf("%d of 10 criteria passed\n", 10 - failures);
  return failures == 0 ? 0 : 1;
}
