#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

namespace memqa {

// Counter-based random stream: output k is a pure function of (seed, k), so
// the whole state is two integers and can be checkpointed exactly.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0, std::uint64_t counter = 0)
      : seed_(seed), counter_(counter) {}

  std::uint64_t NextU64();
  // Uniform in [0, 1) with 53 random bits.
  double Uniform();
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }
  // Standard normal (Box-Muller, consumes two draws).
  double Normal();
  // Uniform integer in [0, n); n must be positive.
  std::size_t Below(std::size_t n);
  bool Bernoulli(double p) { return Uniform() < p; }

  // Independent child stream; does not advance this stream.
  RngStream Split(std::uint64_t stream_id) const;

  template <typename T>
  void Shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = Below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  friend bool operator==(const RngStream&, const RngStream&) = default;

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

std::uint64_t SplitMix64(std::uint64_t x);

}  // namespace memqa
