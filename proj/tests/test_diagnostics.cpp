#include <doctest.h>

#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "ratchet/diagnostics.hpp"
#include "ratchet/error.hpp"

using namespace ratchet;

namespace {

QsdEstimate fake_qsd(const Params& p, std::size_t n) {
  RandomStream rng(StreamKey{100, 1});
  std::vector<Profile> xs;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v(p.size(), 0.0);
    double s = 0.0;
    for (std::size_t j = 0; j < 4; ++j) s += (v[j] = rng.uniform() + 0.05);
    for (auto& e : v) e /= s;
    xs.push_back(validate_profile(v));
  }
  QsdEstimate q;
  q.ensemble = ParticleEnsemble::uniform(std::move(xs));
  q.batch.assign(n, 0);
  q.batches = 1;
  q.rho0 = {0.4, 0.01};
  return q;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::IoError;
}

}  // namespace

TEST_CASE("correlation series at time zero") {
  const Params p = Params::make(1.0, 1.0, 8);
  IntegratorConfig cfg;
  const QsdEstimate q = fake_qsd(p, 500);
  const std::vector<int> ks{0, 1, 2};
  const std::vector<double> grid{0.0, 0.05, 0.1};
  const auto rep = correlation_decay(q, p, ks, grid, cfg, 2000, StreamFactory(1, 1), 0.9, 20);
  REQUIRE(rep.series.size() == 3);
  CHECK(rep.series[0].corr[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.survival[0] == 1.0);
  for (const auto& s : rep.series) {
    for (std::size_t j = 0; j < s.corr.size(); ++j) {
      CHECK(std::abs(s.corr[j]) <= 1.0);
      CHECK(s.band_lo[j] <= s.band_hi[j]);
    }
  }
  CHECK(rep.series[1].corr[0] < 0.0);

  CHECK(code_of([&] { correlation_decay(q, p, ks, grid, cfg, 999, StreamFactory(1, 2)); }) ==
        ErrorCode::StatisticalFloor);
  const std::vector<int> bad{9};
  CHECK_THROWS_AS(correlation_decay(q, p, bad, grid, cfg, 1000, StreamFactory(1, 3)), Error);
}

TEST_CASE("crossing time") {
  CorrelationSeries s;
  s.corr = {1.0, 0.5, 0.2, -0.05, 0.3};
  const std::vector<double> t{0, 1, 2, 3, 4};
  CHECK(s.crossing_time(t, 0.1) == 3.0);
  CHECK_FALSE(s.crossing_time(t, 0.01));
}

TEST_CASE("relaxation fit needs two different starts") {
  const Params p = Params::make(1.0, 1.0, 10);
  IntegratorConfig cfg;
  std::vector<double> grid;
  for (int i = 0; i <= 10; ++i) grid.push_back(0.1 * i);
  const Profile x = poisson_profile(p);
  CHECK(code_of([&] { relaxation_rate_fit(x, x, p, grid, cfg, 2000, StreamFactory(2, 1), 20, 5); }) ==
        ErrorCode::NoDecayWindow);
  CHECK(code_of([&] {
          relaxation_rate_fit(Profile::point_mass(10, 1), x, p, grid, cfg, 2000, StreamFactory(2, 2));
        }) == ErrorCode::InvalidStart);
}

TEST_CASE("tightness scan input checks and truncation bias") {
  const Params p = Params::make(1.0, 3.0, 10);
  IntegratorConfig cfg;
  QsdOptions opt;
  opt.particles = 300;
  opt.horizon = 8.0;
  const std::vector<int> bad{10, 5};
  CHECK_THROWS_AS(moment_tightness_scan(p, bad, 1, 0.5, cfg, opt, StreamFactory(3, 1)), Error);
  const std::vector<int> ok{2, 10};
  CHECK_THROWS_AS(moment_tightness_scan(p, ok, 1, 1.0, cfg, opt, StreamFactory(3, 1)), Error);

  const auto rows = moment_tightness_scan(p, ok, 1, 0.5, cfg, opt, StreamFactory(3, 2));
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].d == 2);
  CHECK(rows[0].holder_violations == 0);
  CHECK(rows[1].holder_violations == 0);
  CHECK(rows[0].quantile.value <= 2.0);
  CHECK(rows[0].quantile.value < rows[1].quantile.value);
}

TEST_CASE("autonomy test inputs") {
  const Params p = Params::make(1.0, 1.0, 6);
  IntegratorConfig cfg;
  const std::vector<double> head{0.4, 0.3};
  const std::vector<double> tail_a{0.3, 0, 0, 0, 0};
  const std::vector<double> tail_b{0, 0, 0, 0, 0.3};
  const auto rep = pi_k_autonomy_test(head, tail_a, tail_b, p, 2, 0.2, cfg, 300, StreamFactory(4, 1));
  CHECK(rep.tests.size() == 4);
  CHECK(rep.labels.back() == "m1_aggregated");
  CHECK(rep.corrected_min_p == doctest::Approx(std::min(1.0, 4 * rep.min_p)));

  const std::vector<double> short_tail{0.3, 0, 0, 0};
  CHECK_THROWS_AS(pi_k_autonomy_test(head, short_tail, tail_b, p, 2, 0.2, cfg, 300, StreamFactory(4, 2)), Error);
  const std::vector<double> heavy_tail{0.5, 0, 0, 0, 0};
  CHECK_THROWS_AS(pi_k_autonomy_test(head, heavy_tail, tail_b, p, 2, 0.2, cfg, 300, StreamFactory(4, 3)), Error);
}

TEST_CASE("population rounding") {
  const Profile x = validate_profile(std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3});
  const auto pop = population_from_profile(x, 100);
  CHECK(pop.n() == 100);
  CHECK(pop.counts() == std::vector<std::uint64_t>{34, 33, 33});
  CHECK(population_from_profile(Profile::point_mass(4, 2), 7) == DiscretePopulation::monomorphic(7, 2));
}

TEST_CASE("neutral models both preserve the mean mutation load") {
  const Params p = Params::make(0.0, 0.0, 4);
  IntegratorConfig cfg;
  const Profile x = validate_profile(std::vector<double>{0.4, 0.3, 0.2, 0.1, 0.0});
  const auto rep = discrete_vs_diffusion_compare(200, p, 0.5, x, cfg, 2000, StreamFactory(5, 1));
  CHECK(rep.generations == 100);
  const double m1 = moment(x, MomentSpec{1});
  CHECK(std::abs(rep.discrete.m1.mean - m1) < 4 * rep.discrete.m1.stderr_);
  CHECK(std::abs(rep.diffusion.m1.mean - m1) < 4 * rep.diffusion.m1.stderr_);
  CHECK(std::abs(rep.discrete.m1.mean - rep.diffusion.m1.mean) <
        4 * std::hypot(rep.discrete.m1.stderr_, rep.diffusion.m1.stderr_));
}

TEST_CASE("click statistics") {
  std::vector<double> few(99, 1.0);
  CHECK(code_of([&] { click_statistics(few); }) == ErrorCode::StatisticalFloor);

  const std::vector<double> flat(500, 2.0);
  const auto det = click_statistics(flat);
  CHECK(det.exponential_fit.p_value < 1e-6);
  CHECK(det.mean == 2.0);
  CHECK(det.median == 2.0);

  int passes = 0;
  for (std::uint64_t rep = 0; rep < 100; ++rep) {
    RandomStream rng(StreamKey{6, rep});
    std::vector<double> t(400);
    for (auto& v : t) v = -std::log(1.0 - rng.uniform()) * 3.0;
    const auto r = click_statistics(t, 0.1);
    passes += r.exponential_fit.p_value > 0.01 ? 1 : 0;
    CHECK(r.metastable);
  }
  CHECK(passes >= 95);

  std::vector<Trajectory> paths(150);
  for (std::size_t i = 0; i < paths.size(); ++i) {
    if (i % 2) paths[i].click_time = 1.0 + static_cast<double>(i) * 0.01;
  }
  CHECK(code_of([&] { click_statistics(std::span<const Trajectory>(paths)); }) == ErrorCode::StatisticalFloor);
  paths.resize(300);
  for (std::size_t i = 150; i < 300; ++i) paths[i].click_time = 2.0;
  CHECK(click_statistics(std::span<const Trajectory>(paths)).n == 225);
}
