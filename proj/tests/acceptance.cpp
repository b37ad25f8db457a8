// Acceptance runner: one PASS/FAIL line per primary criterion. Exit status is
// non-zero when any criterion fails. The desk training run dominates the
// runtime; --skip-desk reports it as FAIL without running it, for quick checks
// of the other criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "ddn/checkpoint.hpp"
#include "ddn/dataset.hpp"
#include "ddn/eval.hpp"
#include "ddn/io.hpp"
#include "ddn/metrics.hpp"
#include "ddn/noise.hpp"
#include "ddn/ops.hpp"
#include "ddn/pgm.hpp"
#include "ddn/selftest.hpp"
#include "ddn/trainer.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

#ifndef DDN_DATA_DIR
#error "DDN_DATA_DIR must point at the bundled image set"
#endif

using namespace ddn;
namespace fs = std::filesystem;

namespace {

const fs::path kTrainDir = fs::path(DDN_DATA_DIR) / "train";
const fs::path kTestDir = fs::path(DDN_DATA_DIR) / "test";

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

Outcome parameter_counts() {
  struct Row {
    Variant variant;
    double published;
  };
  std::ostringstream detail;
  bool ok = true;
  for (const Row& r : {Row{Variant::v1, 382080}, Row{Variant::v2, 133248}, Row{Variant::dncnn_ref, 556032}}) {
    const ParameterCount pc = count_parameters(Network<float>::build(ModelConfig::preset(r.variant)));
    std::size_t sum = 0;
    for (const LayerCount& l : pc.breakdown) sum += l.count;
    const double dev = (double(pc.total) - r.published) / r.published;
    ok = ok && std::abs(dev) <= 0.01 && sum == pc.total && !pc.breakdown.empty();
    detail << to_string(r.variant) << " " << pc.total << " (" << fmt(100 * dev, 3) << "%) ";
  }
  return {ok, detail.str()};
}

Outcome reduction_claim() {
  const ParameterCount v2 = count_parameters(Network<float>::build(ModelConfig::preset(Variant::v2)));
  const ParameterCount ref = count_parameters(Network<float>::build(ModelConfig::preset(Variant::dncnn_ref)));
  const std::string report = parameter_report("v2", v2, ref.total);
  const std::string published = fmt(1.0 - 133248.0 / 556032.0, 3);
  const std::string measured = fmt(1.0 - double(v2.total) / double(ref.total), 3);
  const bool in_report = report.find("reduction vs reference (" + std::to_string(ref.total) + "): " + measured) !=
                         std::string::npos;
  return {in_report && measured == "0.760" && published == "0.760",
          "reduction " + measured + " (published counts give " + published + ")"};
}

Outcome gradient_correctness() {
  ModelConfig c = ModelConfig::tiny();
  c.pairs = 2;
  c.base_channels = 8;
  c.growth_rate = 4;
  c.block_layers = 4;
  Network<double> net = Network<double>::build(c, 21);
  const Tensor<double> clean = oracle::uniform({2, 1, 16, 16}, 22);
  const Tensor<double> noisy = add_awgn(clean, {25.0, 23});
  std::ostringstream detail;
  bool ok = true;
  for (LossKind kind : {LossKind::mse_residual, LossKind::combined}) {
    const GradientCheck g = gradient_check(net, kind, clean, noisy, 1e-4);
    ok = ok && g.max_relative_error <= 1e-4 && g.checked > 0;
    detail << to_string(kind) << " " << g.checked << " scalars, max rel " << sci(g.max_relative_error) << " ("
           << g.reduced_step << " straddled a ReLU kink and used a smaller step); ";
  }
  return {ok, detail.str()};
}

Outcome conv_oracle() {
  std::mt19937_64 gen(77);
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen); };
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = pick(1, 4), cin = pick(1, 4), cout = pick(1, 4), h = pick(1, 8), w = pick(1, 8);
    const std::size_t k = std::size_t(2 * pick(0, 2) + 1);
    const std::size_t p = std::size_t(pick(0, int(k / 2)));
    if (h + 2 * p < k || w + 2 * p < k) {
      --i;
      continue;
    }
    const Tensor<double> x = oracle::uniform({n, cin, h, w}, gen(), -1, 1);
    const Tensor<double> wt = oracle::uniform({cout, cin, k, k}, gen(), -1, 1);
    const Tensor<double> b = pick(0, 1) ? oracle::uniform({cout}, gen(), -1, 1) : Tensor<double>();
    const Tensor<double> got = conv2d(x, wt, b, p);
    const Tensor<double> want = oracle::conv2d(x, wt, b, int(p));
    if (got.shape() != want.shape()) return {false, "shape mismatch on instance " + std::to_string(i)};
    for (std::size_t j = 0; j < got.numel(); ++j)
      worst = std::max(worst, std::abs(got.data()[j] - want.data()[j]));
  }
  return {worst <= 1e-10, "100 instances, max abs error " + sci(worst)};
}

Outcome metric_identities() {
  const Tensor<double> x = to_tensor<double>(read_pgm(kTestDir / "chelsea.pgm"));
  const Tensor<double> y = add_awgn(x, {25.0, 5});
  const double s_self = ssim(x, x), m_self = ms_ssim(x, x);
  const double asym = std::max(std::abs(ssim(x, y) - ssim(y, x)), std::abs(ms_ssim(x, y) - ms_ssim(y, x)));

  // Finite-difference check of the MS-SSIM gradient on a 32x32 crop, three scales.
  const SsimParams p = SsimParams::for_loss();
  Tensor<double> a(Shape{1, 1, 32, 32}), b(Shape{1, 1, 32, 32});
  for (std::size_t i = 0; i < 32; ++i)
    for (std::size_t j = 0; j < 32; ++j) {
      a.at(0, 0, i, j) = x.at(0, 0, 40 + i, 40 + j);
      b.at(0, 0, i, j) = y.at(0, 0, 40 + i, 40 + j);
    }
  b.set_requires_grad(true);
  Tape<double> tape;
  {
    TapeScope<double> scope(tape);
    tape.backward(mean(ms_ssim_per_sample(a, b, p)));
  }
  const std::vector<double> g(std::as_const(b).grad().begin(), std::as_const(b).grad().end());
  double worst = 0.0;
  for (std::size_t i = 0; i < b.numel(); ++i) {
    const double fd = oracle::central_difference(b, i, 1e-4, [&] { return ms_ssim(a, b, p); });
    worst = std::max(worst, oracle::relative_error(g[i], fd));
  }
  const bool ok = std::abs(s_self - 1) <= 1e-6 && std::abs(m_self - 1) <= 1e-6 && asym <= 1e-9 && worst <= 1e-4;
  return {ok, "ssim(x,x)-1 " + sci(s_self - 1) + ", ms_ssim(x,x)-1 " + sci(m_self - 1) + ", asymmetry " +
                  sci(asym) + ", ms_ssim grad max rel " + sci(worst)};
}

Outcome awgn_statistics() {
  const Tensor<double> x(Shape{1, 1, 256, 256}, 0.5);
  const Tensor<double> y = add_awgn(x, {25.0, 2024});
  double s = 0, ss = 0;
  for (std::size_t i = 0; i < y.numel(); ++i) {
    const double d = y.data()[i] - x.data()[i];
    s += d;
    ss += d * d;
  }
  const double n = double(y.numel());
  const double sd = std::sqrt(ss / n - (s / n) * (s / n));
  const double rel = std::abs(sd / (25.0 / 255.0) - 1.0);
  const double p = psnr(x, y);
  const double closed = 20.0 * std::log10(255.0 / 25.0);
  return {rel <= 0.02 && std::abs(p - closed) <= 0.3,
          "std " + fmt(sd * 255, 3) + "/255 (" + fmt(100 * rel, 2) + "% off), unclipped PSNR " + fmt(p, 3) +
              " dB vs " + fmt(closed, 3)};
}

bool same_state(const Network<float>& a, const Network<float>& b, bool skip_final) {
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (skip_final && pa[i]->name().starts_with(kFinalLayerPrefix)) continue;
    if (!identical(pa[i]->value(), pb[i]->value())) return false;
  }
  const auto ba = a.buffers();
  const auto bb = b.buffers();
  for (std::size_t i = 0; i < ba.size(); ++i)
    if (!identical(ba[i]->value, bb[i]->value)) return false;
  return true;
}

Outcome stage2_freeze() {
  const PatchSet data = make_dataset(kTrainDir, {25.0, 3}, {40, 40, Augment::none, 3, 48});
  Network<float> net = Network<float>::build(ModelConfig::tiny(), 3);
  TrainConfig s1 = TrainConfig::defaults(Stage::stage1_full_mse);
  s1.batch_size = 8;
  (void)train_stage1(net, data, s1);
  const Network<float> stage1 = deserialize_checkpoint(serialize_checkpoint(net));
  TrainConfig s2 = TrainConfig::defaults(Stage::stage2_lastlayer_combined);
  s2.batch_size = 8;
  s2.epochs = 2;
  (void)train_stage2(net, data, s2);
  const bool frozen_equal = same_state(net, stage1, true);
  const bool final_moved = !same_state(net, stage1, false);
  return {frozen_equal && final_moved, std::string("non-final parameters and running stats ") +
                                           (frozen_equal ? "bit-identical" : "CHANGED") + ", final conv " +
                                           (final_moved ? "updated" : "unchanged")};
}

// Desk-scale end-to-end run. Settings are recorded here and in the README.
constexpr std::size_t kDeskEpochs = 20;
constexpr std::size_t kDeskStage2Epochs = 5;

Outcome desk_training() {
  const PatchSet data = make_dataset(kTrainDir, {25.0, 0}, {40, 10, Augment::none, 0, 0});
  if (data.size() < 512) return {false, "only " + std::to_string(data.size()) + " patches"};
  Network<float> net = Network<float>::build(ModelConfig::tiny(), 0);
  TrainConfig s1 = TrainConfig::defaults(Stage::stage1_full_mse);
  s1.epochs = kDeskEpochs;
  s1.batch_size = 16;
  const TrainLog log1 = train_stage1(net, data, s1);
  net.set_trained_sigma(25.0);

  EvalOptions eo;
  eo.noise = {25.0, 0};
  // Fresh noise on the training images, reported for context only.
  EvalOptions train_eo;
  train_eo.noise = {25.0, 1};
  const MetricReport r1 = evaluate(net, kTestDir, eo);
  const MetricReport t1 = evaluate(net, kTrainDir, train_eo);
  const double gain = r1.averages.denoised_psnr - r1.averages.noisy_psnr;

  TrainConfig s2 = TrainConfig::defaults(Stage::stage2_lastlayer_combined);
  s2.epochs = kDeskStage2Epochs;
  s2.batch_size = 16;
  (void)train_stage2(net, data, s2);
  const MetricReport r2 = evaluate(net, kTestDir, eo);
  const MetricReport t2 = evaluate(net, kTrainDir, train_eo);
  const double dms = r2.averages.ms_ssim - r1.averages.ms_ssim;

  std::cout << "# desk stage 1 (" << data.size() << " patches, " << kDeskEpochs << " epochs, final mean loss "
            << fmt(log1.epochs.back().mean_loss, 4) << ")\n";
  std::istringstream s1_text(r1.to_text()), s2_text(r2.to_text());
  for (std::string line; std::getline(s1_text, line);) std::cout << "#   " << line << '\n';
  std::cout << "# desk stage 2 (" << kDeskStage2Epochs << " epochs)\n";
  for (std::string line; std::getline(s2_text, line);) std::cout << "#   " << line << '\n';
  std::cout << "# training images, fresh noise: MS-SSIM " << fmt(t1.averages.ms_ssim, 5) << " -> "
            << fmt(t2.averages.ms_ssim, 5) << ", PSNR " << fmt(t1.averages.denoised_psnr, 2) << " -> "
            << fmt(t2.averages.denoised_psnr, 2) << " dB\n";

  const bool ok = r1.averages.images == r1.rows.size() && gain >= 3.0 && dms >= 0.0;
  return {ok, "noisy " + fmt(r1.averages.noisy_psnr, 2) + " dB -> denoised " + fmt(r1.averages.denoised_psnr, 2) +
                  " dB (gain " + fmt(gain, 2) + "), stage-2 MS-SSIM " + fmt(r1.averages.ms_ssim, 5) + " -> " +
                  fmt(r2.averages.ms_ssim, 5) + " (delta " + sci(dms) + ") held out, " +
                  fmt(t1.averages.ms_ssim, 5) + " -> " + fmt(t2.averages.ms_ssim, 5) + " on training images"};
}

int cli_run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (code != 0) std::cerr << err.str();
  return code;
}

Outcome determinism() {
  testutil::TempDir dir;
  std::vector<std::vector<std::uint8_t>> ckpt, report, image;
  for (int run = 0; run < 2; ++run) {
    const std::string tag = std::to_string(run);
    const std::string ck = (dir / ("m" + tag + ".ckpt")).string();
    if (cli_run({"--bit-exact", "train", "--tiny", "--data", kTrainDir.string(), "--sigma", "25", "--augment",
                 "none", "--stride", "40", "--max-patches", "64", "--epochs", "1", "--batch", "8", "--seed", "9",
                 "--out", ck}) != 0)
      return {false, "training run " + tag + " failed"};
    const std::string rep = (dir / ("r" + tag + ".txt")).string();
    if (cli_run({"--bit-exact", "eval", "--checkpoint", ck, "--data", kTestDir.string(), "--report", rep}) != 0)
      return {false, "eval run " + tag + " failed"};
    const std::string img = (dir / ("d" + tag + ".pgm")).string();
    if (cli_run({"--bit-exact", "denoise", "--checkpoint", ck, "--in", (kTestDir / "rocket.pgm").string(),
                 "--sigma", "25", "--out", img}) != 0)
      return {false, "denoise run " + tag + " failed"};
    ckpt.push_back(read_file_bytes(ck));
    std::vector<std::uint8_t> r = read_file_bytes(rep);
    const std::vector<std::uint8_t> tsv = read_file_bytes(rep + ".tsv");
    r.insert(r.end(), tsv.begin(), tsv.end());
    report.push_back(r);
    image.push_back(read_file_bytes(img));
  }
  const bool a = ckpt[0] == ckpt[1], b = report[0] == report[1], c = image[0] == image[1];
  return {a && b && c, std::string("checkpoints ") + (a ? "identical" : "DIFFER") + ", reports " +
                           (b ? "identical" : "DIFFER") + ", denoised images " + (c ? "identical" : "DIFFER")};
}

Outcome format_round_trips() {
  testutil::TempDir dir;
  std::size_t images = 0;
  bool pgm_ok = true;
  for (const fs::path& p : list_images(kTestDir)) {
    const GrayImage img = read_pgm(p);
    write_pgm(img, dir / "x.pgm");
    pgm_ok = pgm_ok && read_pgm(dir / "x.pgm") == img && read_file_bytes(dir / "x.pgm") == read_file_bytes(p);
    ++images;
  }
  bool ckpt_ok = true;
  for (Variant v : {Variant::v1, Variant::v2, Variant::dncnn_ref}) {
    Network<float> net = Network<float>::build(ModelConfig::preset(v), 5);
    net.set_trained_sigma(25.0);
    save_checkpoint(net, dir / "a.ckpt");
    save_checkpoint(load_checkpoint(dir / "a.ckpt"), dir / "b.ckpt");
    ckpt_ok = ckpt_ok && read_file_bytes(dir / "a.ckpt") == read_file_bytes(dir / "b.ckpt");
  }
  return {pgm_ok && ckpt_ok && images > 0, std::to_string(images) + " PGM files " +
                                               (pgm_ok ? "byte-identical" : "DIFFER") + ", 3 checkpoints " +
                                               (ckpt_ok ? "byte-identical" : "DIFFER")};
}

}  // namespace

int main(int argc, char** argv) {
  bool skip_desk = false;
  for (int i = 1; i < argc; ++i)
    if (std::string(argv[i]) == "--skip-desk") skip_desk = true;

  struct Criterion {
    std::string name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"parameter counts within 1%", parameter_counts},
      {"v2 vs DnCNN reduction 0.760", reduction_claim},
      {"loss gradients vs finite differences", gradient_correctness},
      {"convolution vs direct summation", conv_oracle},
      {"metric identities", metric_identities},
      {"AWGN statistics", awgn_statistics},
      {"stage-2 freeze invariant", stage2_freeze},
      {"desk-scale training", desk_training},
      {"determinism", determinism},
      {"format round trips", format_round_trips},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    if (skip_desk && c.name == "desk-scale training") {
      std::cout << "FAIL " << c.name << ": not run (--skip-desk)" << std::endl;
      ++failures;
      continue;
    }
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (o.passed ? "PASS " : "FAIL ") << c.name << ": " << o.detail << " (" << fmt(s, 1) << " s)"
              << std::endl;
    failures += !o.passed;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria not passed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
