#include "ddn/selftest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "ddn/dataset.hpp"
#include "ddn/metrics.hpp"
#include "ddn/ops.hpp"
#include "ddn/pgm.hpp"
#include "ddn/rng.hpp"
#include "ddn/trainer.hpp"

namespace ddn {

Tensor<double> direct_conv2d(const Tensor<double>& input, const Tensor<double>& weight,
                             const Tensor<double>& bias, std::size_t padding) {
  const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const std::size_t F = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  const std::size_t OH = H + 2 * padding - kh + 1, OW = W + 2 * padding - kw + 1;
  Tensor<double> out(Shape{N, F, OH, OW});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t f = 0; f < F; ++f)
      for (std::size_t i = 0; i < OH; ++i)
        for (std::size_t j = 0; j < OW; ++j) {
          double acc = bias.defined() ? bias.data()[f] : 0.0;
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t u = 0; u < kh; ++u)
              for (std::size_t v = 0; v < kw; ++v) {
                const long long y = static_cast<long long>(i + u) - static_cast<long long>(padding);
                const long long x = static_cast<long long>(j + v) - static_cast<long long>(padding);
                if (y < 0 || x < 0 || y >= static_cast<long long>(H) ||
                    x >= static_cast<long long>(W))
                  continue;
                acc += input.at(n, c, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) *
                       weight.at(f, c, u, v);
              }
          out.at(n, f, i, j) = acc;
        }
  return out;
}

namespace {

Tensor<double> random_tensor(Rng& rng, Shape shape) {
  Tensor<double> t(std::move(shape));
  for (double& v : t.data()) v = 2.0 * rng.uniform() - 1.0;
  return t;
}

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

}  // namespace

double conv_oracle_max_error(const ConvFn& conv, std::size_t instances, std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0.0;
  for (std::size_t k = 0; k < instances; ++k) {
    const std::size_t N = pick(rng, 1, 4), C = pick(rng, 1, 4), F = pick(rng, 1, 4);
    const std::size_t H = pick(rng, 1, 8), W = pick(rng, 1, 8);
    const std::size_t kernel = 2 * pick(rng, 0, 2) + 1;
    const std::size_t padding = pick(rng, 0, kernel / 2);
    if (H + 2 * padding < kernel || W + 2 * padding < kernel) {
      --k;
      continue;
    }
    const Tensor<double> x = random_tensor(rng, {N, C, H, W});
    const Tensor<double> w = random_tensor(rng, {F, C, kernel, kernel});
    const Tensor<double> b = rng.below(2) ? random_tensor(rng, {F}) : Tensor<double>();
    const Tensor<double> expected = direct_conv2d(x, w, b, padding);
    const Tensor<double> got = conv(x, w, b, padding);
    if (got.shape() != expected.shape()) return std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < got.numel(); ++i)
      worst = std::max(worst, std::abs(got.data()[i] - expected.data()[i]));
  }
  return worst;
}

GradientCheck gradient_check(Network<double>& net, LossKind kind, const Tensor<double>& clean,
                             const Tensor<double>& noisy, double step) {
  net.zero_grad();
  {
    Tape<double> tape;
    TapeScope<double> scope(tape);
    tape.backward(compute_loss(kind, net, clean, noisy, Mode::train));
  }
  struct Sample {
    double loss;
    std::uint64_t fingerprint;
  };
  auto loss_at = [&] {
    NoGradScope<double> no_grad;
    KinkFingerprint fp;
    const double loss = compute_loss(kind, net, clean, noisy, Mode::train).item();
    return Sample{loss, fp.value()};
  };
  const std::uint64_t base = loss_at().fingerprint;

  GradientCheck result;
  result.smallest_step = step;
  for (Parameter<double>* p : net.parameters()) {
    if (p->frozen()) continue;
    Tensor<double>& value = p->value();
    const auto analytic = std::as_const(value).grad();
    for (std::size_t i = 0; i < value.numel(); ++i) {
      const double saved = value.data()[i];
      double h = step;
      double numeric = 0.0;
      for (int attempt = 0;; ++attempt) {
        value.data()[i] = saved + h;
        const Sample up = loss_at();
        value.data()[i] = saved - h;
        const Sample down = loss_at();
        value.data()[i] = saved;
        numeric = (up.loss - down.loss) / (2.0 * h);
        if ((up.fingerprint == base && down.fingerprint == base) || attempt == 4) break;
        h /= 10.0;
      }
      if (h < step) {
        ++result.reduced_step;
        result.smallest_step = std::min(result.smallest_step, h);
      }
      const double denom = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-6});
      const double rel = std::abs(numeric - analytic[i]) / denom;
      if (rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_parameter = p->name() + "[" + std::to_string(i) + "]";
      }
      ++result.checked;
    }
  }
  net.zero_grad();
  return result;
}

namespace {

using Clock = std::chrono::steady_clock;

ModelConfig micro_config() {
  ModelConfig c = ModelConfig::tiny();
  c.pairs = 1;
  c.base_channels = 4;
  c.growth_rate = 2;
  c.block_layers = 2;
  return c;
}

Tensor<double> random_image(std::uint64_t seed, Shape shape) {
  Rng rng(seed);
  Tensor<double> t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform();
  return t;
}

template <typename Fn>
CheckResult timed(const std::string& name, Fn&& fn) {
  const Clock::time_point start = Clock::now();
  CheckResult r;
  r.name = name;
  try {
    fn(r);
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return r;
}

std::string sci(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

}  // namespace

std::vector<CheckResult> run_selftest(const SelftestOptions& options) {
  const ConvFn conv = options.conv ? options.conv
                                   : ConvFn([](const Tensor<double>& x, const Tensor<double>& w,
                                               const Tensor<double>& b, std::size_t p) {
                                       return conv2d(x, w, b, p);
                                     });
  std::vector<CheckResult> results;

  results.push_back(timed("conv oracle", [&](CheckResult& r) {
    const double err = conv_oracle_max_error(conv, options.conv_instances, options.seed);
    r.passed = err <= 1e-10;
    r.detail = std::to_string(options.conv_instances) + " instances, max |diff| " + sci(err);
  }));

  for (LossKind kind : {LossKind::mse_residual, LossKind::combined}) {
    results.push_back(timed("gradient " + std::string(to_string(kind)), [&](CheckResult& r) {
      Network<double> net = Network<double>::build(micro_config(), options.seed);
      const Tensor<double> clean = random_image(options.seed + 1, {2, 1, 12, 12});
      Tensor<double> noisy = clean.clone();
      Rng rng(options.seed + 2);
      for (double& v : noisy.data()) v += 0.1 * rng.normal();
      const GradientCheck g = gradient_check(net, kind, clean, noisy);
      r.passed = g.max_relative_error <= 1e-4;
      r.detail = std::to_string(g.checked) + " scalars, max relative error " +
                 sci(g.max_relative_error) + " at " + g.worst_parameter + ", " +
                 std::to_string(g.reduced_step) + " checked with a reduced step";
    }));
  }

  results.push_back(timed("metric identities", [&](CheckResult& r) {
    const Tensor<double> a = random_image(options.seed + 3, {1, 1, 32, 32});
    const Tensor<double> b = random_image(options.seed + 4, {1, 1, 32, 32});
    SsimParams p;
    p.window_size = 7;
    const double self_ssim = ssim(a, a, p), self_ms = ms_ssim(a, a, p);
    const double asym = std::abs(ssim(a, b, p) - ssim(b, a, p)) +
                        std::abs(ms_ssim(a, b, p) - ms_ssim(b, a, p));
    r.passed = std::abs(self_ssim - 1.0) <= 1e-6 && std::abs(self_ms - 1.0) <= 1e-6 && asym <= 1e-9;
    r.detail = "ssim(x,x)-1 " + sci(self_ssim - 1.0) + ", ms_ssim(x,x)-1 " + sci(self_ms - 1.0) +
               ", asymmetry " + sci(asym);
  }));

  results.push_back(timed("freeze invariant", [&](CheckResult& r) {
    Network<float> net = Network<float>::build(micro_config(), options.seed);
    PatchSet data;
    data.patch_size = 12;
    data.clean = random_image(options.seed + 5, {4, 1, 12, 12}).cast<float>();
    data.noisy = add_awgn(data.clean, NoiseSpec{25.0, options.seed + 6});
    data.records.resize(4);
    const Network<float> before = net.clone();
    TrainConfig cfg = TrainConfig::defaults(Stage::stage2_lastlayer_combined);
    cfg.optimizer.learning_rate = 1e-2;
    cfg.batch_size = 2;
    train_stage2(net, data, cfg);
    std::size_t changed_frozen = 0, changed_final = 0;
    const auto pa = before.parameters();
    const auto pb = std::as_const(net).parameters();
    for (std::size_t i = 0; i < pa.size(); ++i) {
      const bool same = identical(pa[i]->value(), pb[i]->value());
      if (pa[i]->name().starts_with(kFinalLayerPrefix)) {
        changed_final += !same;
      } else {
        changed_frozen += !same;
      }
    }
    const auto ba = before.buffers();
    const auto bb = std::as_const(net).buffers();
    for (std::size_t i = 0; i < ba.size(); ++i) changed_frozen += !identical(ba[i]->value, bb[i]->value);
    r.passed = changed_frozen == 0 && changed_final > 0;
    r.detail = std::to_string(changed_frozen) + " non-final tensors changed, " +
               std::to_string(changed_final) + " final tensors updated";
  }));

  results.push_back(timed("pgm round trip", [&](CheckResult& r) {
    Rng rng(options.seed + 7);
    GrayImage image(37, 23);
    for (std::uint8_t& px : image.pixels) px = static_cast<std::uint8_t>(rng.below(256));
    const std::vector<std::uint8_t> bytes = encode_pgm(image);
    const GrayImage back = decode_pgm(bytes);
    const GrayImage via_tensor = from_tensor(to_tensor<float>(back));
    r.passed = back == image && encode_pgm(back) == bytes && via_tensor == image;
    r.detail = r.passed ? "37x23 image identical after encode/decode/normalize" : "mismatch";
  }));

  return results;
}

}  // namespace ddn
