#include "ddn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ddn/ops.hpp"

namespace ddn {

SsimParams SsimParams::for_loss() {
  SsimParams p;
  p.window_size = 7;
  p.scales = 3;
  p.scale_weights = {0.0448, 0.2856, 0.3001};
  return p;
}

void SsimParams::validate() const {
  if (window_size == 0 || window_size % 2 == 0)
    throw ConfigError("SsimParams: window_size must be odd and positive, got " +
                      std::to_string(window_size));
  if (!(window_sigma > 0.0)) throw ConfigError("SsimParams: window_sigma must be positive");
  if (!(dynamic_range > 0.0)) throw ConfigError("SsimParams: dynamic_range must be positive");
  if (scales == 0) throw ConfigError("SsimParams: scales must be at least 1");
  if (scale_weights.size() != scales)
    throw ConfigError("SsimParams: " + std::to_string(scale_weights.size()) +
                      " scale weights for " + std::to_string(scales) + " scales");
  for (double w : scale_weights)
    if (!(w > 0.0)) throw ConfigError("SsimParams: scale weights must be positive");
}

template <typename T>
Tensor<T> gaussian_window(std::size_t size, double sigma) {
  if (size == 0 || size % 2 == 0) throw ConfigError("gaussian_window: size must be odd");
  std::vector<double> g(size);
  const double c = static_cast<double>(size / 2);
  for (std::size_t i = 0; i < size; ++i) {
    const double d = static_cast<double>(i) - c;
    g[i] = std::exp(-d * d / (2.0 * sigma * sigma));
  }
  const double total = std::accumulate(g.begin(), g.end(), 0.0);
  Tensor<T> w(Shape{1, 1, size, size});
  for (std::size_t i = 0; i < size; ++i)
    for (std::size_t j = 0; j < size; ++j)
      w.data()[i * size + j] = static_cast<T>(g[i] * g[j] / (total * total));
  return w;
}

template <typename T>
double psnr(const Tensor<T>& reference, const Tensor<T>& test, double peak) {
  if (reference.shape() != test.shape())
    throw ShapeError("psnr", "image shapes differ", reference.shape(), test.shape());
  if (!(peak > 0.0)) throw ConfigError("psnr: peak must be positive");
  double sse = 0.0;
  const T* a = reference.ptr();
  const T* b = test.ptr();
  for (std::size_t i = 0; i < reference.numel(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sse += d * d;
  }
  if (sse == 0.0) return std::numeric_limits<double>::infinity();
  const double mse = sse / static_cast<double>(reference.numel());
  return 10.0 * std::log10(peak * peak / mse);
}

std::size_t ms_ssim_levels(const SsimParams& params, std::size_t height, std::size_t width) {
  std::size_t levels = 0;
  std::size_t h = height, w = width;
  while (levels < params.scales && h >= params.window_size && w >= params.window_size) {
    ++levels;
    h /= 2;
    w /= 2;
  }
  return levels;
}

namespace {

template <typename T>
void check_pair(const char* op, const Tensor<T>& a, const Tensor<T>& b, const SsimParams& p) {
  p.validate();
  if (a.shape() != b.shape()) throw ShapeError(op, "image shapes differ", a.shape(), b.shape());
  if (a.rank() != 4 || a.dim(1) != 1)
    throw ShapeError(std::string(op) + ": expected single-channel [N,1,H,W], got " +
                     to_string(a.shape()));
  if (a.dim(2) < p.window_size || a.dim(3) < p.window_size)
    throw ShapeError(std::string(op) + ": image " + to_string(a.shape()) +
                     " is smaller than the " + std::to_string(p.window_size) + "x" +
                     std::to_string(p.window_size) + " window");
}

/// Local luminance and contrast-structure maps over the valid region.
template <typename T>
struct SsimTerms {
  Tensor<T> luminance;
  Tensor<T> contrast_structure;
};

template <typename T>
SsimTerms<T> ssim_terms(const Tensor<T>& x, const Tensor<T>& y, const Tensor<T>& window,
                        const SsimParams& p) {
  const Tensor<T> none;
  const T c1 = static_cast<T>((p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range));
  const T c2 = static_cast<T>((p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range));

  Tensor<T> mu_x = conv2d(x, window, none, 0);
  Tensor<T> mu_y = conv2d(y, window, none, 0);
  Tensor<T> mu_xx = square(mu_x);
  Tensor<T> mu_yy = square(mu_y);
  Tensor<T> mu_xy = mul(mu_x, mu_y);
  Tensor<T> var_x = sub(conv2d(square(x), window, none, 0), mu_xx);
  Tensor<T> var_y = sub(conv2d(square(y), window, none, 0), mu_yy);
  Tensor<T> cov = sub(conv2d(mul(x, y), window, none, 0), mu_xy);

  SsimTerms<T> t;
  t.luminance = div(add_scalar(scale(mu_xy, T(2)), c1), add_scalar(add(mu_xx, mu_yy), c1));
  t.contrast_structure = div(add_scalar(scale(cov, T(2)), c2), add_scalar(add(var_x, var_y), c2));
  return t;
}

}  // namespace

template <typename T>
Tensor<T> ssim_per_sample(const Tensor<T>& reference, const Tensor<T>& test,
                          const SsimParams& params) {
  check_pair("ssim", reference, test, params);
  const Tensor<T> window = gaussian_window<T>(params.window_size, params.window_sigma);
  SsimTerms<T> t = ssim_terms(reference, test, window, params);
  return mean_per_sample(mul(t.luminance, t.contrast_structure));
}

template <typename T>
Tensor<T> ms_ssim_per_sample(const Tensor<T>& reference, const Tensor<T>& test,
                             const SsimParams& params) {
  check_pair("ms_ssim", reference, test, params);
  const std::size_t levels = ms_ssim_levels(params, reference.dim(2), reference.dim(3));
  const double weight_total =
      std::accumulate(params.scale_weights.begin(), params.scale_weights.begin() + levels, 0.0);
  const Tensor<T> window = gaussian_window<T>(params.window_size, params.window_sigma);

  Tensor<T> x = reference, y = test, product;
  for (std::size_t s = 0; s < levels; ++s) {
    if (s > 0) {
      x = avg_pool2(x);
      y = avg_pool2(y);
    }
    SsimTerms<T> t = ssim_terms(x, y, window, params);
    const bool coarsest = s + 1 == levels;
    Tensor<T> level = coarsest ? mean_per_sample(mul(t.luminance, t.contrast_structure))
                               : mean_per_sample(t.contrast_structure);
    const T exponent = static_cast<T>(params.scale_weights[s] / weight_total);
    Tensor<T> term = pow_positive(level, exponent);
    product = product.defined() ? mul(product, term) : term;
  }
  return product;
}

template <typename T>
double ssim(const Tensor<T>& reference, const Tensor<T>& test, const SsimParams& params) {
  NoGradScope<T> no_grad;
  return static_cast<double>(mean(ssim_per_sample(reference, test, params)).item());
}

template <typename T>
double ms_ssim(const Tensor<T>& reference, const Tensor<T>& test, const SsimParams& params) {
  NoGradScope<T> no_grad;
  return static_cast<double>(mean(ms_ssim_per_sample(reference, test, params)).item());
}

#define DDN_INSTANTIATE(T)                                                                    \
  template Tensor<T> gaussian_window<T>(std::size_t, double);                                 \
  template double psnr(const Tensor<T>&, const Tensor<T>&, double);                           \
  template Tensor<T> ssim_per_sample(const Tensor<T>&, const Tensor<T>&, const SsimParams&);  \
  template Tensor<T> ms_ssim_per_sample(const Tensor<T>&, const Tensor<T>&,                   \
                                        const SsimParams&);                                   \
  template double ssim(const Tensor<T>&, const Tensor<T>&, const SsimParams&);                \
  template double ms_ssim(const Tensor<T>&, const Tensor<T>&, const SsimParams&);

DDN_INSTANTIATE(float)
DDN_INSTANTIATE(double)
#undef DDN_INSTANTIATE

}  // namespace ddn
