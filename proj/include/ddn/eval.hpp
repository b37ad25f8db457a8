#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ddn/metrics.hpp"
#include "ddn/model.hpp"
#include "ddn/noise.hpp"
#include "ddn/pgm.hpp"

namespace ddn {

struct EvalOptions {
  /// sigma plus the global seed; each image's noise seed is derived from
  /// (seed, hash of its filename).
  NoiseSpec noise;
  SsimParams ssim;
  /// When set, difference images (denoised vs clean) are written here.
  std::optional<std::filesystem::path> diff_dir;
  double diff_gain = 4.0;
  /// When set, clipped denoised images are written here.
  std::optional<std::filesystem::path> output_dir;
};

/// One evaluated image. PSNR columns use the clipped [0,1] images except
/// noisy_psnr_unclipped. A row that could not be evaluated carries `error`.
struct EvalRow {
  std::string filename;
  double sigma = 0.0;
  double noisy_psnr = 0.0;
  double noisy_psnr_unclipped = 0.0;
  double denoised_psnr = 0.0;
  double noisy_ssim = 0.0;
  double ssim = 0.0;
  double ms_ssim = 0.0;
  std::string error;

  bool ok() const { return error.empty(); }
};

struct MetricAverages {
  std::size_t images = 0;
  double noisy_psnr = 0.0;
  double noisy_psnr_unclipped = 0.0;
  double denoised_psnr = 0.0;
  double noisy_ssim = 0.0;
  double ssim = 0.0;
  double ms_ssim = 0.0;
};

struct MetricReport {
  std::string variant;
  std::string checkpoint_hash;
  std::size_t parameter_count = 0;
  double sigma = 0.0;
  std::uint64_t seed = 0;
  std::vector<EvalRow> rows;
  MetricAverages averages;
  std::vector<std::string> warnings;

  /// Aligned table with a header and an average line.
  std::string to_text() const;
  /// Tab-separated: a header line, one line per row, then an "AVERAGE" line.
  std::string to_delimited() const;
};

/// Arithmetic means over rows that evaluated successfully.
MetricAverages average_rows(const std::vector<EvalRow>& rows);

std::uint64_t image_noise_seed(std::uint64_t seed, const std::string& filename);

/// Corrupts every .pgm in `image_dir` (sorted by name), denoises the whole
/// image and scores it. Unreadable images become error rows.
MetricReport evaluate(Network<float>& net, const std::filesystem::path& image_dir,
                      const EvalOptions& options);

/// clip(0.5 + gain * (test - reference), 0, 1) as an 8-bit image.
template <typename T>
GrayImage diff_image(const Tensor<T>& reference, const Tensor<T>& test, double gain);

/// Element-wise clamp to [0,1] (export convention).
template <typename T>
Tensor<T> clip_unit(const Tensor<T>& t);

/// Total, per-layer breakdown and, when given, the reduction relative to
/// `reference_total`.
std::string parameter_report(const std::string& title, const ParameterCount& count,
                             std::optional<std::size_t> reference_total = std::nullopt);

}  // namespace ddn
