#include "ratchet/rng.hpp"

#include <array>
#include <cmath>
#include <random>

namespace ratchet {

namespace {

constexpr std::uint64_t kMul0 = 0xD2E7470EE14C6C93ULL;
constexpr std::uint64_t kMul1 = 0xCA5A826395121157ULL;
constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73BULL;

inline void mulhilo(std::uint64_t a, std::uint64_t b, std::uint64_t& hi, std::uint64_t& lo) {
  const unsigned __int128 prod = static_cast<unsigned __int128>(a) * b;
  hi = static_cast<std::uint64_t>(prod >> 64);
  lo = static_cast<std::uint64_t>(prod);
}

}  // namespace

Philox4x64::Counter Philox4x64::block(Counter ctr, Key key) {
  for (int round = 0; round < 10; ++round) {
    std::uint64_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

std::uint64_t RandomStream::below(std::uint64_t n) {
  unsigned __int128 m = static_cast<unsigned __int128>(engine_()) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(engine_()) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

namespace {

// 256-layer ziggurat for the standard normal (Marsaglia-Tsang layout,
// Doornik's acceptance test).
struct ZigguratTables {
  static constexpr int kLayers = 256;
  static constexpr double kTailStart = 3.6541528853610088;
  static constexpr double kLayerArea = 0.00492867323399;

  std::array<double, kLayers + 1> x{};
  std::array<double, kLayers> ratio{};

  ZigguratTables() {
    auto f = [](double v) { return std::exp(-0.5 * v * v); };
    x[0] = kLayerArea / f(kTailStart);
    x[1] = kTailStart;
    for (int i = 2; i < kLayers; ++i) x[i] = std::sqrt(-2.0 * std::log(kLayerArea / x[i - 1] + f(x[i - 1])));
    x[kLayers] = 0.0;
    for (int i = 0; i < kLayers; ++i) ratio[i] = x[i + 1] / x[i];
  }
};

const ZigguratTables& zig() {
  static const ZigguratTables tables;
  return tables;
}

}  // namespace

double RandomStream::normal() {
  const ZigguratTables& z = zig();
  for (;;) {
    const std::uint64_t bits = engine_();
    const int layer = static_cast<int>(bits & 0xFF);
    const double u = 2.0 * (static_cast<double>(bits >> 11) * 0x1.0p-53) - 1.0;
    if (std::abs(u) < z.ratio[layer]) return u * z.x[layer];
    if (layer == 0) {
      double a, b;
      do {
        a = std::log1p(-uniform()) / ZigguratTables::kTailStart;
        b = std::log1p(-uniform());
      } while (-2.0 * b < a * a);
      return u < 0.0 ? a - ZigguratTables::kTailStart : ZigguratTables::kTailStart - a;
    }
    const double v = u * z.x[layer];
    const double f0 = std::exp(-0.5 * (z.x[layer] * z.x[layer] - v * v));
    const double f1 = std::exp(-0.5 * (z.x[layer + 1] * z.x[layer + 1] - v * v));
    if (f1 + uniform() * (f0 - f1) < 1.0) return v;
  }
}

void RandomStream::fill_normal(std::span<double> out) {
  for (double& z : out) z = normal();
}

std::uint64_t RandomStream::poisson(double mean) {
  if (mean <= 0.0) return 0;
  std::poisson_distribution<std::uint64_t> dist(mean);
  return dist(engine_);
}

std::uint64_t RandomStream::binomial(std::uint64_t trials, double prob) {
  if (trials == 0 || prob <= 0.0) return 0;
  if (prob >= 1.0) return trials;
  std::binomial_distribution<std::uint64_t> dist(trials, prob);
  return dist(engine_);
}

}  // namespace ratchet
