#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace ddn {

/// SplitMix64 output function.
std::uint64_t mix64(std::uint64_t x);

/// Derives an independent stream seed from a parent seed and a key.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t key);

/// FNV-1a 64-bit hash.
std::uint64_t fnv1a64(std::string_view bytes);

/// Counter-based generator: draw i depends only on (seed, i), so any
/// element of a noise field can be regenerated independently and the
/// stream is identical on every platform (no std:: distributions involved).
class CounterRng {
public:
  explicit CounterRng(std::uint64_t seed) : key_(mix64(seed ^ 0x6a09e667f3bcc909ULL)) {}

  std::uint64_t bits(std::uint64_t counter) const;
  /// Uniform in (0, 1].
  double uniform(std::uint64_t counter) const;
  /// Standard normal via Box-Muller; draws 2k and 2k+1 share one uniform pair.
  double normal(std::uint64_t counter) const;

private:
  std::uint64_t key_;
};

/// Sequential wrapper over CounterRng.
class Rng {
public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_bits() { return gen_.bits(counter_++); }
  double uniform() { return gen_.uniform(counter_++); }
  double normal() { return normal_gen_.normal(normal_counter_++); }
  /// Unbiased integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

private:
  CounterRng gen_;
  CounterRng normal_gen_;
  std::uint64_t counter_ = 0;
  std::uint64_t normal_counter_ = 0;
};

/// Seeded Fisher-Yates permutation of [0, n).
std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed);

}  // namespace ddn
