#pragma once

#include <vector>

#include "ddn/tensor.hpp"

namespace ddn {

/// Parameters shared by SSIM and MS-SSIM. Images live in [0, dynamic_range].
struct SsimParams {
  std::size_t window_size = 11;
  double window_sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
  std::size_t scales = 5;
  /// Per-scale exponents, finest first. Renormalized to sum 1 whenever
  /// fewer scales than requested fit the image.
  std::vector<double> scale_weights = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

  /// Settings used inside the training loss: 7x7 window, 3 scales, so a
  /// 40x40 patch still has a 10x10 coarsest level.
  static SsimParams for_loss();
  void validate() const;
};

/// Normalized 2-D gaussian window, shape [1,1,k,k].
template <typename T>
Tensor<T> gaussian_window(std::size_t size, double sigma);

/// 10 log10(peak^2 / MSE); +infinity when the images are identical.
template <typename T>
double psnr(const Tensor<T>& reference, const Tensor<T>& test, double peak = 1.0);

/// Number of MS-SSIM levels that fit an H x W image (0 if none).
std::size_t ms_ssim_levels(const SsimParams& params, std::size_t height, std::size_t width);

/// Differentiable single-scale SSIM of each pair in a [N,1,H,W] batch -> [N].
/// Statistics use the gaussian window over the valid region only.
template <typename T>
Tensor<T> ssim_per_sample(const Tensor<T>& reference, const Tensor<T>& test,
                          const SsimParams& params = {});

/// Differentiable MS-SSIM of each pair -> [N]. Contrast-structure terms at
/// every level, luminance at the coarsest level only; negative terms are
/// clamped to zero before the fractional power.
template <typename T>
Tensor<T> ms_ssim_per_sample(const Tensor<T>& reference, const Tensor<T>& test,
                             const SsimParams& params = {});

/// Batch means of the above, evaluated without recording.
template <typename T>
double ssim(const Tensor<T>& reference, const Tensor<T>& test, const SsimParams& params = {});
template <typename T>
double ms_ssim(const Tensor<T>& reference, const Tensor<T>& test, const SsimParams& params = {});

}  // namespace ddn
