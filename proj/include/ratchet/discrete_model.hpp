#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ratchet/core.hpp"
#include "ratchet/rng.hpp"

namespace ratchet {

/// Parameters of the fixed-size, non-overlapping-generation model.
struct DiscreteParams {
  double alpha = 0.1;   // fitness factor (1 - alpha)^i per parent
  double lambda = 0.1;  // Poisson mean of new mutations per child
  std::uint64_t n = 100;
  std::optional<int> cap;  // truncation rank; children beyond it saturate

  static DiscreteParams make(double alpha, double lambda, std::uint64_t n, std::optional<int> cap = std::nullopt);
};

class DiscretePopulation {
 public:
  static DiscretePopulation from_counts(std::vector<std::uint64_t> counts);
  static DiscretePopulation monomorphic(std::uint64_t n, int mutations = 0);

  const std::vector<std::uint64_t>& counts() const { return counts_; }
  std::uint64_t n() const { return n_; }
  std::uint64_t count(std::size_t i) const { return i < counts_.size() ? counts_[i] : 0; }
  int max_class() const;

  friend bool operator==(const DiscretePopulation&, const DiscretePopulation&) = default;

 private:
  DiscretePopulation(std::vector<std::uint64_t> counts, std::uint64_t n) : counts_(std::move(counts)), n_(n) {}
  friend DiscretePopulation step_generation(const DiscretePopulation&, const DiscreteParams&, RandomStream&);

  std::vector<std::uint64_t> counts_;
  std::uint64_t n_ = 0;
};

/// One generation: parents drawn as a single multinomial over classes with
/// weights N_i (1 - alpha)^i, then each child's extra Poisson(lambda)
/// mutations drawn per parent class as a multinomial over offsets.
DiscretePopulation step_generation(const DiscretePopulation& pop, const DiscreteParams& p, RandomStream& rng);

struct GenerationSummary {
  long long generation = 0;
  double x0 = 0.0;
  double m1 = 0.0;
  double m2 = 0.0;
  double m3 = 0.0;
};

struct DiscreteClickResult {
  std::optional<long long> click_generation;  // nullopt = censored at max_gens
  long long generations_run = 0;
  std::vector<GenerationSummary> path;  // generation 0 included
  DiscretePopulation final_population = DiscretePopulation::monomorphic(1);
};

GenerationSummary summarize(const DiscretePopulation& pop, long long generation);

DiscreteClickResult simulate_until_click(const DiscretePopulation& pop0, const DiscreteParams& p, long long max_gens,
                                         RandomStream& rng);

/// x_i = counts_i / n for i < dim, tail mass saturated into x_dim.
Profile empirical_profile(const DiscretePopulation& pop, int dim);

}  // namespace ratchet
