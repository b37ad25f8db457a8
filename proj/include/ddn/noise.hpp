#pragma once

#include <cstdint>

#include "ddn/tensor.hpp"

namespace ddn {

struct NoiseSpec {
  /// Standard deviation in 8-bit units (15, 25, 50 in the usual protocol).
  double sigma = 25.0;
  std::uint64_t seed = 0;
};

/// clean + (sigma / 255) * z, z_i = CounterRng(seed).normal(i). Not clipped.
/// sigma == 0 returns an exact copy.
template <typename T>
Tensor<T> add_awgn(const Tensor<T>& clean, const NoiseSpec& spec);

}  // namespace ddn
