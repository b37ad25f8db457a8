#include "ddn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <sstream>

#include "ddn/checkpoint.hpp"
#include "ddn/dataset.hpp"
#include "ddn/rng.hpp"

namespace ddn {

template <typename T>
Tensor<T> clip_unit(const Tensor<T>& t) {
  Tensor<T> out = t.clone();
  for (T& v : out.data()) v = std::clamp(v, T(0), T(1));
  return out;
}

template <typename T>
GrayImage diff_image(const Tensor<T>& reference, const Tensor<T>& test, double gain) {
  if (reference.shape() != test.shape())
    throw ShapeError("diff_image", "image shapes differ", reference.shape(), test.shape());
  if (!(gain > 0.0)) throw ConfigError("diff_image: gain must be positive");
  Tensor<double> d(reference.shape());
  for (std::size_t i = 0; i < d.numel(); ++i)
    d.data()[i] = 0.5 + gain * (static_cast<double>(test.data()[i]) -
                                static_cast<double>(reference.data()[i]));
  return from_tensor(d);
}

MetricAverages average_rows(const std::vector<EvalRow>& rows) {
  MetricAverages a;
  for (const EvalRow& r : rows) {
    if (!r.ok()) continue;
    ++a.images;
    a.noisy_psnr += r.noisy_psnr;
    a.noisy_psnr_unclipped += r.noisy_psnr_unclipped;
    a.denoised_psnr += r.denoised_psnr;
    a.noisy_ssim += r.noisy_ssim;
    a.ssim += r.ssim;
    a.ms_ssim += r.ms_ssim;
  }
  if (a.images > 0) {
    const double n = static_cast<double>(a.images);
    a.noisy_psnr /= n;
    a.noisy_psnr_unclipped /= n;
    a.denoised_psnr /= n;
    a.noisy_ssim /= n;
    a.ssim /= n;
    a.ms_ssim /= n;
  }
  return a;
}

std::uint64_t image_noise_seed(std::uint64_t seed, const std::string& filename) {
  return derive_seed(seed, fnv1a64(filename));
}

namespace {

EvalRow evaluate_image(Network<float>& net, const std::filesystem::path& path,
                       const EvalOptions& options) {
  EvalRow row;
  row.filename = path.filename().string();
  row.sigma = options.noise.sigma;
  const GrayImage image = read_pgm(path);
  const Tensor<float> clean = to_tensor<float>(image);
  const Tensor<float> noisy =
      add_awgn(clean, NoiseSpec{options.noise.sigma, image_noise_seed(options.noise.seed, row.filename)});
  const Tensor<float> noisy_clipped = clip_unit(noisy);
  const Tensor<float> denoised = clip_unit(denoise(net, noisy));

  row.noisy_psnr_unclipped = psnr(clean, noisy);
  row.noisy_psnr = psnr(clean, noisy_clipped);
  row.denoised_psnr = psnr(clean, denoised);
  row.noisy_ssim = ssim(clean, noisy_clipped, options.ssim);
  row.ssim = ssim(clean, denoised, options.ssim);
  row.ms_ssim = ms_ssim(clean, denoised, options.ssim);

  if (options.output_dir) write_pgm(from_tensor(denoised), *options.output_dir / row.filename);
  if (options.diff_dir) {
    std::filesystem::path name = path.filename();
    name.replace_extension(".diff.pgm");
    write_pgm(diff_image(clean, denoised, options.diff_gain), *options.diff_dir / name);
  }
  return row;
}

std::string fmt(double v, int precision = 4) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

}  // namespace

MetricReport evaluate(Network<float>& net, const std::filesystem::path& image_dir,
                      const EvalOptions& options) {
  if (options.noise.sigma < 0.0) throw ConfigError("evaluate: sigma must be non-negative");
  MetricReport report;
  report.variant = std::string(to_string(net.config().variant));
  report.checkpoint_hash = checkpoint_hash(net);
  report.parameter_count = count_parameters(net).total;
  report.sigma = options.noise.sigma;
  report.seed = options.noise.seed;
  if (net.trained_sigma() > 0.0 && net.trained_sigma() != options.noise.sigma)
    report.warnings.push_back("model was trained for sigma " + fmt(net.trained_sigma(), 2) +
                              " but is evaluated at sigma " + fmt(options.noise.sigma, 2));

  for (const std::filesystem::path& path : list_images(image_dir)) {
    try {
      report.rows.push_back(evaluate_image(net, path, options));
    } catch (const Error& e) {
      EvalRow row;
      row.filename = path.filename().string();
      row.sigma = options.noise.sigma;
      row.error = e.what();
      report.rows.push_back(row);
    }
  }
  report.averages = average_rows(report.rows);
  return report;
}

std::string MetricReport::to_text() const {
  std::ostringstream os;
  os << "model " << variant << "  checkpoint " << checkpoint_hash << "  parameters "
     << parameter_count << "  sigma " << fmt(sigma, 2) << "  seed " << seed << '\n';
  std::size_t width = 8;
  for (const EvalRow& r : rows) width = std::max(width, r.filename.size());
  auto line = [&](const std::string& name, const std::vector<std::string>& cells) {
    os << std::left << std::setw(static_cast<int>(width)) << name;
    for (const std::string& c : cells) os << "  " << std::right << std::setw(12) << c;
    os << '\n';
  };
  line("image", {"noisy_psnr", "noisy_raw", "denoised", "noisy_ssim", "ssim", "ms_ssim"});
  for (const EvalRow& r : rows) {
    if (!r.ok()) {
      os << std::left << std::setw(static_cast<int>(width)) << r.filename << "  error: " << r.error
         << '\n';
      continue;
    }
    line(r.filename, {fmt(r.noisy_psnr), fmt(r.noisy_psnr_unclipped), fmt(r.denoised_psnr),
                      fmt(r.noisy_ssim), fmt(r.ssim), fmt(r.ms_ssim)});
  }
  const MetricAverages& a = averages;
  line("average", {fmt(a.noisy_psnr), fmt(a.noisy_psnr_unclipped), fmt(a.denoised_psnr),
                   fmt(a.noisy_ssim), fmt(a.ssim), fmt(a.ms_ssim)});
  for (const std::string& w : warnings) os << "warning: " << w << '\n';
  return os.str();
}

std::string MetricReport::to_delimited() const {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "filename\tsigma\tnoisy_psnr\tnoisy_psnr_unclipped\tdenoised_psnr\tnoisy_ssim\tssim\t"
        "ms_ssim\terror\n";
  for (const EvalRow& r : rows)
    os << r.filename << '\t' << r.sigma << '\t' << r.noisy_psnr << '\t' << r.noisy_psnr_unclipped
       << '\t' << r.denoised_psnr << '\t' << r.noisy_ssim << '\t' << r.ssim << '\t' << r.ms_ssim
       << '\t' << r.error << '\n';
  const MetricAverages& a = averages;
  os << "AVERAGE\t" << sigma << '\t' << a.noisy_psnr << '\t' << a.noisy_psnr_unclipped << '\t'
     << a.denoised_psnr << '\t' << a.noisy_ssim << '\t' << a.ssim << '\t' << a.ms_ssim << '\t'
     << '\n';
  return os.str();
}

std::string parameter_report(const std::string& title, const ParameterCount& count,
                             std::optional<std::size_t> reference_total) {
  std::ostringstream os;
  os << title << '\n';
  std::size_t width = 5;
  for (const LayerCount& l : count.breakdown) width = std::max(width, l.layer.size());
  for (const LayerCount& l : count.breakdown)
    os << "  " << std::left << std::setw(static_cast<int>(width)) << l.layer << "  " << std::right
       << std::setw(9) << l.count << '\n';
  os << "  " << std::left << std::setw(static_cast<int>(width)) << "total" << "  " << std::right
     << std::setw(9) << count.total << '\n';
  if (reference_total && *reference_total > 0) {
    const double reduction =
        1.0 - static_cast<double>(count.total) / static_cast<double>(*reference_total);
    os << "  reduction vs reference (" << *reference_total << "): " << fmt(reduction, 3) << '\n';
  }
  return os.str();
}

template Tensor<float> clip_unit(const Tensor<float>&);
template Tensor<double> clip_unit(const Tensor<double>&);
template GrayImage diff_image(const Tensor<float>&, const Tensor<float>&, double);
template GrayImage diff_image(const Tensor<double>&, const Tensor<double>&, double);

}  // namespace ddn
