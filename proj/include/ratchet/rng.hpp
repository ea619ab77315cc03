#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>

namespace ratchet {

/// Philox4x64-10 counter-based generator. Each 256-bit counter value maps to
/// four 64-bit outputs under a 128-bit key; the engine walks word 0 of the
/// counter and leaves words 1..3 as the stream identity.
class Philox4x64 {
 public:
  using result_type = std::uint64_t;
  using Counter = std::array<std::uint64_t, 4>;
  using Key = std::array<std::uint64_t, 2>;

  Philox4x64(Key key, Counter counter) : key_(key), counter_(counter) {}

  static Counter block(Counter ctr, Key key);

  result_type operator()() {
    if (index_ == 4) {
      buffer_ = block(counter_, key_);
      ++counter_[0];
      index_ = 0;
    }
    return buffer_[index_++];
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

 private:
  Key key_;
  Counter counter_;
  Counter buffer_{};
  int index_ = 4;
};

/// Identity of an independent substream. Key = (seed, tag) and counter words
/// (replicate, particle, lane) are used verbatim, so distinct tuples can never
/// share a Philox input block.
struct StreamKey {
  std::uint64_t seed = 0;
  std::uint64_t tag = 0;
  std::uint64_t replicate = 0;
  std::uint64_t particle = 0;
  std::uint64_t lane = 0;
};

// Tags compose an experiment id with a phase inside that experiment.
constexpr std::uint64_t stream_tag(std::uint32_t experiment, std::uint32_t phase) {
  return (static_cast<std::uint64_t>(experiment) << 32) | phase;
}

class RandomStream {
 public:
  explicit RandomStream(const StreamKey& key)
      : engine_({key.seed, key.tag}, {0, key.replicate, key.particle, key.lane}) {}

  Philox4x64& engine() { return engine_; }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n), n > 0 (Lemire's multiply-shift with rejection).
  std::uint64_t below(std::uint64_t n);

  /// Standard normal (ziggurat).
  double normal();
  void fill_normal(std::span<double> out);

  std::uint64_t poisson(double mean);
  std::uint64_t binomial(std::uint64_t trials, double prob);

 private:
  Philox4x64 engine_;
};

/// Hands out substreams for one phase of one experiment.
class StreamFactory {
 public:
  StreamFactory(std::uint64_t seed, std::uint64_t tag) : seed_(seed), tag_(tag) {}

  RandomStream stream(std::uint64_t replicate, std::uint64_t particle = 0, std::uint64_t lane = 0) const {
    return RandomStream(StreamKey{seed_, tag_, replicate, particle, lane});
  }
  StreamFactory with_tag(std::uint64_t tag) const { return StreamFactory(seed_, tag); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t tag() const { return tag_; }

 private:
  std::uint64_t seed_;
  std::uint64_t tag_;
};

}  // namespace ratchet
