#include "ratchet/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ratchet/error.hpp"

namespace ratchet::stats {

MeanEstimate mean_estimate(std::span<const double> values) {
  MeanEstimate e;
  e.n = values.size();
  if (values.empty()) return e;
  double sum = 0.0;
  for (double v : values) sum += v;
  e.mean = sum / static_cast<double>(e.n);
  if (e.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - e.mean) * (v - e.mean);
    e.variance = ss / static_cast<double>(e.n - 1);
    e.stderr_ = std::sqrt(e.variance / static_cast<double>(e.n));
  }
  return e;
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw Error(ErrorCode::InvalidArgument, "quantile of empty sample");
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double quantile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, q);
}

double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 1.18) {
    // Jacobi-transformed series converges fast for small arguments.
    const double pi2 = std::numbers::pi * std::numbers::pi;
    double cdf = 0.0;
    for (int j = 1; j <= 20; ++j) {
      const double odd = 2.0 * j - 1.0;
      cdf += std::exp(-odd * odd * pi2 / (8.0 * lambda * lambda));
    }
    cdf *= std::sqrt(2.0 * std::numbers::pi) / lambda;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double sum = 0.0;
  double sign = 1.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += sign * term;
    if (term < 1e-300) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

namespace {

double scaled_pvalue(double statistic, double effective_n) {
  const double en = std::sqrt(effective_n);
  return kolmogorov_survival((en + 0.12 + 0.11 / en) * statistic);
}

}  // namespace

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::InvalidArgument, "KS needs two nonempty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return {d, scaled_pvalue(d, na * nb / (na + nb))};
}

KsResult ks_one_sample(std::vector<double> sample, const std::function<double(double)>& cdf) {
  if (sample.empty()) throw Error(ErrorCode::InvalidArgument, "KS needs a nonempty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return {d, scaled_pvalue(d, n)};
}

LinearFit weighted_linear_fit(std::span<const double> x, std::span<const double> y, std::span<const double> w) {
  if (x.size() != y.size() || x.size() != w.size() || x.size() < 2) {
    throw Error(ErrorCode::InvalidArgument, "linear fit needs >= 2 matched points");
  }
  double sw = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sw += w[i];
    sx += w[i] * x[i];
    sy += w[i] * y[i];
  }
  const double mx = sx / sw, my = sy / sw;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += w[i] * (x[i] - mx) * (x[i] - mx);
    sxy += w[i] * (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw Error(ErrorCode::InvalidArgument, "linear fit with degenerate abscissae");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

double correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw Error(ErrorCode::InvalidArgument, "correlation size mismatch");
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double saa = 0, sbb = 0, sab = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
    sab += (a[i] - ma) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

Histogram2D::Histogram2D(std::vector<double> x_edges, std::vector<double> y_edges)
    : x_edges_(std::move(x_edges)), y_edges_(std::move(y_edges)) {
  auto strictly_increasing = [](const std::vector<double>& e) {
    if (e.size() < 2) return false;
    for (std::size_t i = 1; i < e.size(); ++i) {
      if (!(e[i] > e[i - 1])) return false;
    }
    return true;
  };
  if (!strictly_increasing(x_edges_) || !strictly_increasing(y_edges_)) {
    throw Error(ErrorCode::InvalidArgument, "histogram edges must be strictly increasing");
  }
  masses_.assign(x_bins() * y_bins(), 0.0);
}

namespace {

std::vector<double> quantile_edges(std::span<const double> values, int bins) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> edges;
  edges.push_back(sorted.front());
  for (int j = 1; j < bins; ++j) {
    const double e = quantile_sorted(sorted, static_cast<double>(j) / bins);
    if (e > edges.back()) edges.push_back(e);
  }
  const double top = sorted.back();
  if (top > edges.back()) {
    edges.push_back(top);
  } else {
    // Degenerate sample: a single bin around the atom.
    edges.push_back(edges.back() + std::max(1e-12, std::abs(edges.back()) * 1e-12));
  }
  return edges;
}

std::size_t locate(const std::vector<double>& edges, double v) {
  const auto inner_begin = edges.begin() + 1;
  const auto inner_end = edges.end() - 1;
  return static_cast<std::size_t>(std::upper_bound(inner_begin, inner_end, v) - inner_begin);
}

}  // namespace

Histogram2D Histogram2D::from_quantiles(std::span<const double> xs, std::span<const double> ys, int x_bins,
                                        int y_bins) {
  if (xs.empty() || xs.size() != ys.size()) throw Error(ErrorCode::InvalidArgument, "histogram sample mismatch");
  if (x_bins < 1 || y_bins < 1) throw Error(ErrorCode::InvalidArgument, "histogram needs >= 1 bin");
  return Histogram2D(quantile_edges(xs, x_bins), quantile_edges(ys, y_bins));
}

std::size_t Histogram2D::bin_of(double x, double y) const {
  return locate(x_edges_, x) * y_bins() + locate(y_edges_, y);
}

void Histogram2D::fill(std::span<const double> xs, std::span<const double> ys, std::span<const double> weights) {
  if (xs.size() != ys.size() || (!weights.empty() && weights.size() != xs.size())) {
    throw Error(ErrorCode::InvalidArgument, "histogram fill size mismatch");
  }
  std::fill(masses_.begin(), masses_.end(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    masses_[bin_of(xs[i], ys[i])] += w;
    total += w;
  }
  if (total > 0.0) {
    for (double& m : masses_) m /= total;
  }
}

double tv_distance(const Histogram2D& a, const Histogram2D& b) {
  if (a.x_edges() != b.x_edges() || a.y_edges() != b.y_edges()) {
    throw Error(ErrorCode::InvalidArgument, "TV needs histograms on identical edges");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.masses().size(); ++i) s += std::abs(a.masses()[i] - b.masses()[i]);
  return 0.5 * s;
}

double binned_tv(const Summary2D& a, const Summary2D& b, int bins) {
  std::vector<double> px(a.x), py(a.y);
  px.insert(px.end(), b.x.begin(), b.x.end());
  py.insert(py.end(), b.y.begin(), b.y.end());
  Histogram2D ha = Histogram2D::from_quantiles(px, py, bins, bins);
  Histogram2D hb = ha;
  ha.fill(a.x, a.y, a.w);
  hb.fill(b.x, b.y, b.w);
  return tv_distance(ha, hb);
}

}  // namespace ratchet::stats
