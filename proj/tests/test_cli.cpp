#include <doctest.h>

#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "ddn/io.hpp"
#include "ddn/ops.hpp"
#include "ddn/pgm.hpp"
#include "test_util.hpp"

using namespace ddn;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run_cli(std::vector<std::string> args, const cli::Hooks& hooks = {}) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err, hooks);
  return {code, out.str(), err.str()};
}

/// Kernel flipped in both axes: true convolution instead of cross-correlation.
Tensor<double> flipped_conv(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b,
                            std::size_t p) {
  Tensor<double> f = w.clone();
  const std::size_t kh = w.dim(2), kw = w.dim(3);
  for (std::size_t o = 0; o < w.dim(0); ++o)
    for (std::size_t c = 0; c < w.dim(1); ++c)
      for (std::size_t u = 0; u < kh; ++u)
        for (std::size_t v = 0; v < kw; ++v) f.at(o, c, u, v) = w.at(o, c, kh - 1 - u, kw - 1 - v);
  return conv2d(x, f, b, p);
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("count-params reports totals and the reduction against the reference") {
    const Result v1 = run_cli({"count-params", "v1", "--expect", "382080"});
    CHECK(v1.code == 0);
    CHECK(v1.out.find("380673") != std::string::npos);
    const Result v2 = run_cli({"count-params", "v2"});
    CHECK(v2.code == 0);
    CHECK(v2.out.find("0.760") != std::string::npos);
    CHECK(run_cli({"count-params", "dncnn_ref", "--expect", "556032"}).code == 0);
    CHECK(run_cli({"count-params", "v1", "--expect", "300000"}).code == cli::kCheckFailed);
    CHECK(run_cli({"count-params", "v9"}).code == cli::kUsage);
  }

  TEST_CASE("the effective configuration is echoed") {
    const Result r = run_cli({"--threads", "1", "count-params", "v2"});
    CHECK(r.out.rfind("# effective configuration", 0) == 0);
    CHECK(r.out.find("[count-params]") != std::string::npos);
  }

  TEST_CASE("usage errors exit 2") {
    CHECK(run_cli({}).code == cli::kUsage);
    CHECK(run_cli({"frobnicate"}).code == cli::kUsage);
    CHECK(run_cli({"init"}).code == cli::kUsage);
  }

  TEST_CASE("stage 2 without a stage-1 checkpoint is refused") {
    testutil::TempDir dir;
    write_pgm(testutil::synthetic_image(48, 48, 1), dir / "a.pgm");
    const Result r = run_cli({"train", "--tiny", "--data", dir.path().string(), "--stage", "2", "--out",
                              (dir / "s2.ckpt").string()});
    CHECK(r.code == cli::kUsage);
    CHECK(r.err.find("resume") != std::string::npos);
    CHECK_FALSE(std::filesystem::exists(dir / "s2.ckpt"));
  }

  TEST_CASE("denoise with a zero-residual checkpoint and no noise reproduces the input bytes") {
    testutil::TempDir dir;
    const std::string ckpt = (dir / "id.ckpt").string();
    REQUIRE(run_cli({"init", "--tiny", "--zero-residual", "--out", ckpt}).code == 0);
    write_pgm(testutil::synthetic_image(64, 64, 2), dir / "in.pgm");
    const Result r = run_cli({"denoise", "--checkpoint", ckpt, "--in", (dir / "in.pgm").string(), "--out",
                              (dir / "out.pgm").string()});
    REQUIRE(r.code == 0);
    CHECK(read_file_bytes(dir / "in.pgm") == read_file_bytes(dir / "out.pgm"));
  }

  TEST_CASE("denoise with sigma 25 reports a noisy PSNR near 20.2 dB") {
    testutil::TempDir dir;
    const std::string ckpt = (dir / "id.ckpt").string();
    REQUIRE(run_cli({"init", "--tiny", "--zero-residual", "--out", ckpt}).code == 0);
    write_pgm(GrayImage(64, 64, 128), dir / "in.pgm");
    const Result r = run_cli({"denoise", "--checkpoint", ckpt, "--in", (dir / "in.pgm").string(), "--out",
                              (dir / "out.pgm").string(), "--sigma", "25", "--emit-diff",
                              (dir / "diff.pgm").string()});
    REQUIRE(r.code == 0);
    const auto pos = r.out.find("noisy PSNR ");
    REQUIRE(pos != std::string::npos);
    const double value = std::stod(r.out.substr(pos + 11));
    CHECK(std::abs(value - 20.17) < 0.2);
    CHECK(std::filesystem::exists(dir / "diff.pgm"));
  }

  TEST_CASE("a missing input fails without writing output") {
    testutil::TempDir dir;
    const std::string ckpt = (dir / "id.ckpt").string();
    REQUIRE(run_cli({"init", "--tiny", "--out", ckpt}).code == 0);
    const Result r = run_cli({"denoise", "--checkpoint", ckpt, "--in", (dir / "nope.pgm").string(), "--out",
                              (dir / "out.pgm").string()});
    CHECK(r.code != 0);
    CHECK_FALSE(std::filesystem::exists(dir / "out.pgm"));
    CHECK_FALSE(r.err.empty());
  }

  TEST_CASE("a corrupt checkpoint exits with the format code") {
    testutil::TempDir dir;
    std::ofstream(dir / "bad.ckpt") << "garbage";
    write_pgm(testutil::synthetic_image(16, 16, 3), dir / "in.pgm");
    const Result r = run_cli({"denoise", "--checkpoint", (dir / "bad.ckpt").string(), "--in",
                              (dir / "in.pgm").string(), "--out", (dir / "out.pgm").string()});
    CHECK(r.code == cli::kFormat);
  }

  TEST_CASE("config files set options and unknown keys are rejected") {
    testutil::TempDir dir;
    std::ofstream(dir / "good.ini") << "[count-params]\nexpect = 133248\n";
    CHECK(run_cli({"--config", (dir / "good.ini").string(), "count-params", "v2"}).code == 0);
    std::ofstream(dir / "bad.ini") << "[count-params]\nbogus_key = 3\n";
    CHECK(run_cli({"--config", (dir / "bad.ini").string(), "count-params", "v2"}).code == cli::kUsage);
  }

  TEST_CASE("make-dataset and a short train run produce a loadable checkpoint and log") {
    testutil::TempDir dir;
    write_pgm(testutil::synthetic_image(48, 48, 4), dir / "a.pgm");
    const Result m = run_cli({"make-dataset", "--data", dir.path().string(), "--patch", "16", "--stride", "16",
                              "--manifest", (dir / "m.txt").string()});
    CHECK(m.code == 0);
    CHECK(std::filesystem::exists(dir / "m.txt"));
    const std::string ckpt = (dir / "s1.ckpt").string();
    const Result t = run_cli({"--bit-exact", "train", "--tiny", "--data", dir.path().string(), "--patch", "16",
                              "--stride", "16", "--augment", "none", "--batch", "3", "--out", ckpt});
    REQUIRE(t.code == 0);
    CHECK(std::filesystem::exists(ckpt + ".log"));
    const Result s2 = run_cli({"train", "--stage", "2", "--resume", ckpt, "--data", dir.path().string(), "--patch",
                               "16", "--stride", "16", "--augment", "none", "--batch", "3", "--out",
                               (dir / "s2.ckpt").string()});
    CHECK(s2.code == 0);
    const Result e = run_cli({"eval", "--checkpoint", (dir / "s2.ckpt").string(), "--data", dir.path().string(),
                              "--window", "7"});
    CHECK(e.code == 0);
    CHECK(e.out.find("AVERAGE") != std::string::npos);
  }

  TEST_CASE("selftest passes and an injected convolution bug makes it fail") {
    const Result good = run_cli({"selftest"});
    CHECK(good.code == 0);
    CHECK(good.out.find("FAIL") == std::string::npos);
    cli::Hooks hooks;
    hooks.selftest_conv = flipped_conv;
    const Result bad = run_cli({"selftest"}, hooks);
    CHECK(bad.code == cli::kCheckFailed);
    CHECK(bad.out.find("FAIL") != std::string::npos);
  }
}
