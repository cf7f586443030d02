#pragma once

// Counter-based random streams: stream (seed, path, neuron) is a pure
// function of its indices, so a path draws the same numbers no matter which
// worker runs it or in which order.

#include <cstdint>
#include <limits>

namespace neuromfg {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// UniformRandomBitGenerator over a Weyl sequence started at a mixed key.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng(std::uint64_t seed, std::uint64_t path, std::uint64_t neuron)
      : counter_(mix64(mix64(mix64(seed) ^ path) ^ (neuron * 0xd1b54a32d192ed03ULL))) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() {
    counter_ += 0x9e3779b97f4a7c15ULL;
    return mix64(counter_);
  }

 private:
  std::uint64_t counter_;
};

}  // namespace neuromfg
