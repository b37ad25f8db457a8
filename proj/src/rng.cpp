#include "ddn/rng.hpp"

#include <cmath>
#include <numbers>

namespace ddn {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t key) {
  return mix64(mix64(seed) ^ (key * 0xd1b54a32d192ed03ULL + 0x8cb92ba72f3d8dd7ULL));
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t CounterRng::bits(std::uint64_t counter) const {
  return mix64(key_ + counter * 0x9e3779b97f4a7c15ULL);
}

double CounterRng::uniform(std::uint64_t counter) const {
  return static_cast<double>((bits(counter) >> 11) + 1) * 0x1.0p-53;
}

double CounterRng::normal(std::uint64_t counter) const {
  const std::uint64_t pair = counter & ~std::uint64_t{1};
  const double radius = std::sqrt(-2.0 * std::log(uniform(pair)));
  const double angle = 2.0 * std::numbers::pi * uniform(pair + 1);
  return (counter & 1) ? radius * std::sin(angle) : radius * std::cos(angle);
}

Rng::Rng(std::uint64_t seed) : gen_(seed), normal_gen_(derive_seed(seed, 1)) {}

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound <= 1) return 0;
  // Reject the incomplete top bucket so the modulo is unbiased.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  std::uint64_t x;
  do {
    x = next_bits();
  } while (x >= limit);
  return x % bound;
}

std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.below(i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

}  // namespace ddn
