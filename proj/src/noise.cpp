#include "ddn/noise.hpp"

#include <cmath>
#include <string>

#include "ddn/rng.hpp"

namespace ddn {

template <typename T>
Tensor<T> add_awgn(const Tensor<T>& clean, const NoiseSpec& spec) {
  if (!(spec.sigma >= 0.0) || !std::isfinite(spec.sigma))
    throw ConfigError("add_awgn: sigma must be finite and non-negative, got " +
                      std::to_string(spec.sigma));
  Tensor<T> noisy = clean.clone();
  if (spec.sigma == 0.0) return noisy;
  const CounterRng gen(spec.seed);
  const double stddev = spec.sigma / 255.0;
  T* y = noisy.ptr();
  for (std::size_t i = 0; i < noisy.numel(); ++i)
    y[i] = static_cast<T>(static_cast<double>(y[i]) + stddev * gen.normal(i));
  return noisy;
}

template Tensor<float> add_awgn(const Tensor<float>&, const NoiseSpec&);
template Tensor<double> add_awgn(const Tensor<double>&, const NoiseSpec&);

}  // namespace ddn
