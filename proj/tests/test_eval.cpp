#include <doctest.h>

#include <cmath>
#include <fstream>

#include "ddn/eval.hpp"
#include "ddn/ops.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace ddn;

namespace {

void write_set(const testutil::TempDir& dir) {
  write_pgm(testutil::synthetic_image(40, 36, 1), dir / "b.pgm");
  write_pgm(testutil::synthetic_image(48, 40, 2), dir / "a.pgm");
  write_pgm(testutil::synthetic_image(36, 44, 3), dir / "c.pgm");
}

Tensor<float> crop(const Tensor<float>& t, std::size_t r0, std::size_t c0, std::size_t h, std::size_t w) {
  Tensor<float> out(Shape{1, 1, h, w});
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j) out.at(0, 0, i, j) = t.at(0, 0, r0 + i, c0 + j);
  return out;
}

}  // namespace

TEST_SUITE("eval") {
  TEST_CASE("a zero-residual network scores the noisy PSNR on every row") {
    testutil::TempDir dir;
    write_set(dir);
    Network<float> net = Network<float>::build(ModelConfig::tiny(), 1);
    zero_final_layer(net);
    EvalOptions opt;
    opt.ssim.window_size = 7;
    const MetricReport r = evaluate(net, dir.path(), opt);
    REQUIRE(r.rows.size() == 3);
    CHECK(r.rows[0].filename == "a.pgm");
    for (const EvalRow& row : r.rows) {
      CHECK(row.ok());
      CHECK(row.denoised_psnr == doctest::Approx(row.noisy_psnr).epsilon(1e-9));
      CHECK(row.ssim == doctest::Approx(row.noisy_ssim).epsilon(1e-9));
      CHECK(row.noisy_psnr_unclipped < row.noisy_psnr);
      CHECK(std::abs(row.noisy_psnr_unclipped - 20.17) < 0.5);
    }
  }

  TEST_CASE("averages equal the mean of the rows") {
    testutil::TempDir dir;
    write_set(dir);
    Network<float> net = Network<float>::build(ModelConfig::tiny(), 2);
    EvalOptions opt;
    opt.ssim.window_size = 7;
    const MetricReport r = evaluate(net, dir.path(), opt);
    double psnr_sum = 0.0, ms_sum = 0.0;
    for (const EvalRow& row : r.rows) {
      psnr_sum += row.denoised_psnr;
      ms_sum += row.ms_ssim;
    }
    CHECK(std::abs(r.averages.denoised_psnr - psnr_sum / 3.0) <= 1e-9);
    CHECK(std::abs(r.averages.ms_ssim - ms_sum / 3.0) <= 1e-9);
    CHECK(r.averages.images == 3);
  }

  TEST_CASE("reports are deterministic and independent of directory listing order") {
    testutil::TempDir a, b;
    write_set(a);
    write_pgm(testutil::synthetic_image(36, 44, 3), b / "c.pgm");
    write_pgm(testutil::synthetic_image(48, 40, 2), b / "a.pgm");
    write_pgm(testutil::synthetic_image(40, 36, 1), b / "b.pgm");
    Network<float> net = Network<float>::build(ModelConfig::tiny(), 3);
    EvalOptions opt;
    opt.ssim.window_size = 7;
    const MetricReport r1 = evaluate(net, a.path(), opt);
    const MetricReport r2 = evaluate(net, a.path(), opt);
    const MetricReport r3 = evaluate(net, b.path(), opt);
    CHECK(r1.to_text() == r2.to_text());
    CHECK(r1.to_delimited() == r2.to_delimited());
    CHECK(r1.to_delimited() == r3.to_delimited());
    CHECK(image_noise_seed(0, "a.pgm") != image_noise_seed(0, "b.pgm"));
  }

  TEST_CASE("an unreadable image becomes an error row and the report continues") {
    testutil::TempDir dir;
    write_set(dir);
    std::ofstream(dir / "broken.pgm") << "P5\n10 10\n255\nshort";
    Network<float> net = Network<float>::build(ModelConfig::tiny(), 4);
    EvalOptions opt;
    opt.ssim.window_size = 7;
    const MetricReport r = evaluate(net, dir.path(), opt);
    REQUIRE(r.rows.size() == 4);
    std::size_t errors = 0;
    for (const EvalRow& row : r.rows) errors += !row.ok();
    CHECK(errors == 1);
    CHECK(r.averages.images == 3);
    CHECK(r.to_text().find("broken.pgm") != std::string::npos);
  }

  TEST_CASE("an empty directory is an error and a sigma mismatch only warns") {
    testutil::TempDir dir;
    Network<float> net = Network<float>::build(ModelConfig::tiny(), 5);
    CHECK_THROWS_AS(evaluate(net, dir.path(), {}), IoError);
    write_set(dir);
    net.set_trained_sigma(15.0);
    EvalOptions opt;
    opt.ssim.window_size = 7;
    const MetricReport r = evaluate(net, dir.path(), opt);
    CHECK(r.warnings.size() == 1);
  }

  TEST_CASE("output and diff images are written") {
    testutil::TempDir dir, out, diffs;
    write_set(dir);
    Network<float> net = Network<float>::build(ModelConfig::tiny(), 6);
    EvalOptions opt;
    opt.ssim.window_size = 7;
    opt.output_dir = out.path();
    opt.diff_dir = diffs.path();
    (void)evaluate(net, dir.path(), opt);
    const GrayImage o = read_pgm(out / "a.pgm");
    CHECK(o.width == 48);
    CHECK(o.height == 40);
    CHECK(std::filesystem::exists(diffs / "a.diff.pgm"));
  }
}

TEST_SUITE("diff_image") {
  TEST_CASE("equal images give uniform mid-gray") {
    const Tensor<double> a = oracle::uniform({1, 1, 5, 6}, 1);
    const GrayImage d = diff_image(a, a, 4.0);
    for (std::uint8_t v : d.pixels) CHECK(v == 128);
  }

  TEST_CASE("doubling the gain doubles the deviation before clipping") {
    const Tensor<double> ref(Shape{1, 1, 1, 3}, 0.5);
    const Tensor<double> test(Shape{1, 1, 1, 3}, std::vector<double>{0.5 + 10.0 / 255, 0.5 - 20.0 / 255, 0.5});
    const GrayImage g1 = diff_image(ref, test, 1.0);
    const GrayImage g2 = diff_image(ref, test, 2.0);
    for (std::size_t i = 0; i < 3; ++i)
      CHECK(std::abs((int(g2.pixels[i]) - 127.5) - 2.0 * (int(g1.pixels[i]) - 127.5)) <= 1.5);
    CHECK_THROWS_AS(diff_image(ref, test, 0.0), ConfigError);
    CHECK_THROWS_AS(diff_image(ref, Tensor<double>(Shape{1, 1, 1, 4}), 1.0), ShapeError);
  }

  TEST_CASE("diff image round trips through PGM") {
    testutil::TempDir dir;
    const GrayImage d = diff_image(oracle::uniform({1, 1, 9, 7}, 2), oracle::uniform({1, 1, 9, 7}, 3), 4.0);
    write_pgm(d, dir / "d.pgm");
    CHECK(read_pgm(dir / "d.pgm") == d);
  }

  TEST_CASE("clip_unit clamps into [0, 1]") {
    const Tensor<float> t(Shape{3}, std::vector<float>{-1.f, 0.25f, 2.f});
    const Tensor<float> c = clip_unit(t);
    CHECK(c.data()[0] == 0.f);
    CHECK(c.data()[1] == 0.25f);
    CHECK(c.data()[2] == 1.f);
  }
}

TEST_SUITE("consistency") {
  TEST_CASE("full-image denoising matches patchwise denoising away from borders") {
    // The tiny network sees at most 10 pixels in each direction; a 12 pixel
    // margin keeps the compared region free of padding effects.
    Network<float> net = Network<float>::build(ModelConfig::tiny(), 7);
    (void)net.forward(oracle::uniform({4, 1, 16, 16}, 8).cast<float>(), Mode::train);
    const Tensor<float> img = to_tensor<float>(testutil::synthetic_image(64, 56, 4));
    const Tensor<float> full = denoise(net, img);
    const std::size_t margin = 12, r0 = 10, c0 = 14, h = 36, w = 40;
    const Tensor<float> part = denoise(net, crop(img, r0, c0, h, w));
    double worst = 0.0;
    for (std::size_t i = margin; i < h - margin; ++i)
      for (std::size_t j = margin; j < w - margin; ++j)
        worst = std::max(worst, double(std::abs(part.at(0, 0, i, j) - full.at(0, 0, r0 + i, c0 + j))));
    CHECK(worst < 1e-4);
  }

  TEST_CASE("parameter report states the reduction against the reference") {
    const ParameterCount pc = count_parameters(Network<float>::build(ModelConfig::preset(Variant::v2)));
    const std::string text = parameter_report("v2", pc, 556032);
    CHECK(text.find("133569") != std::string::npos);
    CHECK(text.find("0.760") != std::string::npos);
  }
}
