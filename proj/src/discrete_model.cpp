#include "ratchet/discrete_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ratchet/error.hpp"

namespace ratchet {

DiscreteParams DiscreteParams::make(double alpha, double lambda, std::uint64_t n, std::optional<int> cap) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in [0, 1)");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error(ErrorCode::InvalidArgument, "lambda must be >= 0");
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "population size must be >= 1");
  if (cap && *cap < 1) throw Error(ErrorCode::InvalidArgument, "cap must be >= 1");
  return DiscreteParams{alpha, lambda, n, cap};
}

DiscretePopulation DiscretePopulation::from_counts(std::vector<std::uint64_t> counts) {
  const std::uint64_t n = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "population must be nonempty");
  while (counts.size() > 1 && counts.back() == 0) counts.pop_back();
  return DiscretePopulation(std::move(counts), n);
}

DiscretePopulation DiscretePopulation::monomorphic(std::uint64_t n, int mutations) {
  if (n < 1 || mutations < 0) throw Error(ErrorCode::InvalidArgument, "invalid monomorphic population");
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(mutations) + 1, 0);
  counts.back() = n;
  return DiscretePopulation(std::move(counts), n);
}

int DiscretePopulation::max_class() const {
  for (std::size_t i = counts_.size(); i-- > 0;) {
    if (counts_[i] > 0) return static_cast<int>(i);
  }
  return 0;
}

DiscretePopulation step_generation(const DiscretePopulation& pop, const DiscreteParams& p, RandomStream& rng) {
  const auto& counts = pop.counts();
  const std::size_t classes = counts.size();

  // Parent classes. Weights are taken relative to the fittest occupied class.
  std::size_t first = 0;
  while (counts[first] == 0) ++first;
  std::vector<double> weight(classes, 0.0);
  const double survival = 1.0 - p.alpha;
  double factor = 1.0;
  double total = 0.0;
  for (std::size_t i = first; i < classes; ++i) {
    weight[i] = static_cast<double>(counts[i]) * factor;
    total += weight[i];
    factor *= survival;
  }
  std::vector<std::uint64_t> parents(classes, 0);
  std::uint64_t remaining = pop.n();
  double remaining_weight = total;
  for (std::size_t i = first; i < classes && remaining > 0; ++i) {
    if (weight[i] <= 0.0) continue;
    const bool last = (i + 1 == classes) || weight[i] >= remaining_weight;
    const std::uint64_t c = last ? remaining : rng.binomial(remaining, weight[i] / remaining_weight);
    parents[i] = c;
    remaining -= c;
    remaining_weight -= weight[i];
  }
  if (remaining > 0) {
    // Weight residue lost to rounding; hand it to the last occupied class.
    std::size_t last = classes;
    while (last-- > 0 && counts[last] == 0) {}
    parents[last] += remaining;
  }

  // Mutation offsets per parent class, multinomial over Poisson(lambda) masses.
  std::vector<std::uint64_t> next(classes, 0);
  auto deposit = [&](std::size_t cls, std::uint64_t c) {
    if (p.cap) cls = std::min(cls, static_cast<std::size_t>(*p.cap));
    if (cls >= next.size()) next.resize(cls + 1, 0);
    next[cls] += c;
  };
  const double p0 = std::exp(-p.lambda);
  const std::size_t max_offset = 50 + static_cast<std::size_t>(10.0 * p.lambda);
  for (std::size_t i = first; i < classes; ++i) {
    std::uint64_t left = parents[i];
    if (left == 0) continue;
    if (p.lambda <= 0.0) {
      deposit(i, left);
      continue;
    }
    double mass = p0;
    double tail = 1.0;
    for (std::size_t j = 0; left > 0; ++j) {
      if (j >= max_offset || tail <= mass || tail <= 0.0) {
        deposit(i + j, left);
        break;
      }
      const std::uint64_t c = rng.binomial(left, mass / tail);
      if (c > 0) deposit(i + j, c);
      left -= c;
      tail -= mass;
      mass *= p.lambda / static_cast<double>(j + 1);
    }
  }
  while (next.size() > 1 && next.back() == 0) next.pop_back();
  return DiscretePopulation(std::move(next), pop.n());
}

GenerationSummary summarize(const DiscretePopulation& pop, long long generation) {
  GenerationSummary s;
  s.generation = generation;
  const double n = static_cast<double>(pop.n());
  const auto& c = pop.counts();
  s.x0 = static_cast<double>(c[0]) / n;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double f = static_cast<double>(c[i]) / n;
    const double di = static_cast<double>(i);
    s.m1 += di * f;
    s.m2 += di * di * f;
    s.m3 += di * di * di * f;
  }
  return s;
}

DiscreteClickResult simulate_until_click(const DiscretePopulation& pop0, const DiscreteParams& p, long long max_gens,
                                         RandomStream& rng) {
  if (pop0.count(0) == 0) throw Error(ErrorCode::InvalidStart, "class 0 is empty at the start");
  if (max_gens < 0) throw Error(ErrorCode::InvalidArgument, "max_gens must be >= 0");
  DiscreteClickResult out;
  DiscretePopulation pop = pop0;
  out.path.push_back(summarize(pop, 0));
  for (long long g = 1; g <= max_gens; ++g) {
    pop = step_generation(pop, p, rng);
    out.path.push_back(summarize(pop, g));
    out.generations_run = g;
    if (pop.count(0) == 0) {
      out.click_generation = g;
      break;
    }
  }
  out.final_population = std::move(pop);
  return out;
}

Profile empirical_profile(const DiscretePopulation& pop, int dim) {
  if (dim < 0) throw Error(ErrorCode::InvalidArgument, "dim must be >= 0");
  std::vector<double> x(static_cast<std::size_t>(dim) + 1, 0.0);
  const double n = static_cast<double>(pop.n());
  const auto& c = pop.counts();
  for (std::size_t i = 0; i < c.size(); ++i) {
    x[std::min(i, x.size() - 1)] += static_cast<double>(c[i]) / n;
  }
  return Profile(std::move(x), Profile::Unchecked{});
}

}  // namespace ratchet
