#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace ratchet::stats {

struct MeanEstimate {
  double mean = 0.0;
  double variance = 0.0;  // unbiased sample variance
  double stderr_ = 0.0;
  std::size_t n = 0;
};

MeanEstimate mean_estimate(std::span<const double> values);

/// Linear-interpolation quantile (Hyndman-Fan type 7) of an unsorted sample.
double quantile(std::vector<double> values, double q);
double quantile_sorted(std::span<const double> sorted, double q);

/// Survival function of the Kolmogorov distribution, P(K > lambda).
double kolmogorov_survival(double lambda);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);
KsResult ks_one_sample(std::vector<double> sample, const std::function<double(double)>& cdf);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Weighted least squares y ~ intercept + slope * x.
LinearFit weighted_linear_fit(std::span<const double> x, std::span<const double> y, std::span<const double> w);

/// Pearson correlation; 0 when either side has no spread.
double correlation(std::span<const double> a, std::span<const double> b);

/// Two-dimensional histogram on (X_0, M_1) summaries with quantile-adaptive
/// product bins. Edges are strictly increasing; values outside the outer
/// edges fall into the boundary bins.
class Histogram2D {
 public:
  Histogram2D(std::vector<double> x_edges, std::vector<double> y_edges);

  /// Edges at the pooled marginal quantiles j/bins, ties merged.
  static Histogram2D from_quantiles(std::span<const double> xs, std::span<const double> ys, int x_bins, int y_bins);

  std::size_t x_bins() const { return x_edges_.size() - 1; }
  std::size_t y_bins() const { return y_edges_.size() - 1; }
  const std::vector<double>& x_edges() const { return x_edges_; }
  const std::vector<double>& y_edges() const { return y_edges_; }
  const std::vector<double>& masses() const { return masses_; }

  /// Replaces the masses with the normalized (weighted) counts of a sample.
  void fill(std::span<const double> xs, std::span<const double> ys, std::span<const double> weights = {});

  std::size_t bin_of(double x, double y) const;

 private:
  std::vector<double> x_edges_;
  std::vector<double> y_edges_;
  std::vector<double> masses_;
};

/// Total variation 0.5 * sum |p - q| between histograms on the same edges.
double tv_distance(const Histogram2D& a, const Histogram2D& b);

struct Summary2D {
  std::vector<double> x;  // X_0
  std::vector<double> y;  // M_1
  std::vector<double> w;  // empty = uniform
};

/// Binned TV between two samples using edges fitted to the pooled sample.
double binned_tv(const Summary2D& a, const Summary2D& b, int bins);

}  // namespace ratchet::stats
