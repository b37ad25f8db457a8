#include "cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>

#include "ddn/checkpoint.hpp"
#include "ddn/dataset.hpp"
#include "ddn/eval.hpp"
#include "ddn/io.hpp"
#include "ddn/metrics.hpp"
#include "ddn/parallel.hpp"
#include "ddn/pgm.hpp"
#include "ddn/trainer.hpp"

namespace ddn::cli {
namespace {

struct ModelOptions {
  std::string variant = "v1";
  bool tiny = false;
  std::optional<std::size_t> pairs, base_channels, growth_rate, block_layers, depth;
  bool no_skip = false;

  void add(CLI::App& app) {
    app.add_option("--variant", variant, "v1, v2 or dncnn_ref")->capture_default_str();
    app.add_flag("--tiny", tiny, "two dense-block/transition pairs");
    app.add_option("--pairs", pairs, "dense-block/transition pairs");
    app.add_option("--base-channels", base_channels, "width of the first layer and transitions");
    app.add_option("--growth", growth_rate, "dense-block growth rate");
    app.add_option("--block-layers", block_layers, "layers per dense block");
    app.add_option("--depth", depth, "dncnn_ref depth");
    app.add_flag("--no-skip", no_skip, "do not forward first-layer features to transitions");
  }

  ModelConfig build() const {
    ModelConfig c = tiny ? ModelConfig::tiny() : ModelConfig::preset(parse_variant(variant));
    c.variant = parse_variant(variant);
    if (pairs) c.pairs = *pairs;
    if (base_channels) c.base_channels = *base_channels;
    if (growth_rate) c.growth_rate = *growth_rate;
    if (block_layers) c.block_layers = *block_layers;
    if (depth) c.dncnn_depth = *depth;
    if (no_skip) c.skip_to_transitions = false;
    c.validate();
    return c;
  }
};

struct DataOptions {
  std::string dir;
  double sigma = 25.0;
  std::uint64_t noise_seed = 0;
  std::size_t patch = 40;
  std::size_t stride = 10;
  std::string augment = "dihedral";
  std::uint64_t shuffle_seed = 0;
  std::size_t max_patches = 0;

  void add(CLI::App& app, bool required) {
    auto* d = app.add_option("--data", dir, "directory of .pgm training images");
    if (required) d->required();
    app.add_option("--sigma", sigma, "noise level in 8-bit units")->capture_default_str();
    app.add_option("--noise-seed", noise_seed, "seed of the per-patch noise")->capture_default_str();
    app.add_option("--patch", patch, "patch size")->capture_default_str();
    app.add_option("--stride", stride, "patch stride")->capture_default_str();
    app.add_option("--augment", augment, "none or dihedral")->capture_default_str();
    app.add_option("--shuffle-seed", shuffle_seed, "seed of the patch order")->capture_default_str();
    app.add_option("--max-patches", max_patches, "keep this many patches (0 keeps all)")
        ->capture_default_str();
  }

  PatchSet load(const std::string& directory) const {
    DatasetOptions o;
    o.patch_size = patch;
    o.stride = stride;
    o.augment = parse_augment(augment);
    o.shuffle_seed = shuffle_seed;
    o.max_patches = max_patches;
    return make_dataset(directory, NoiseSpec{sigma, noise_seed}, o);
  }
};

std::string fixed(double v, int precision = 4) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

void echo_config(const CLI::App& sub, int threads, bool bit_exact, std::ostream& out) {
  out << "# effective configuration\n"
      << "#   threads=" << threads << "\n#   bit-exact=" << (bit_exact ? "true" : "false")
      << "\n#   [" << sub.get_name() << "]\n";
  std::istringstream lines(sub.config_to_str(true, false));
  for (std::string line; std::getline(lines, line);)
    if (!line.empty()) out << "#   " << line << '\n';
}

// ---------------------------------------------------------------- commands

struct CountParams {
  std::string variant;
  std::optional<double> expect;
  ModelOptions model;
};

int cmd_count_params(const CountParams& o, std::ostream& out) {
  ModelOptions m = o.model;
  m.variant = o.variant;
  const ModelConfig config = m.build();
  const Network<float> net = Network<float>::build(config);
  const ParameterCount count = count_parameters(net);
  std::optional<std::size_t> reference;
  if (config.variant != Variant::dncnn_ref)
    reference = count_parameters(build_dncnn_ref<float>()).total;
  out << parameter_report(describe(config), count, reference);
  if (o.expect) {
    const double deviation = (static_cast<double>(count.total) - *o.expect) / *o.expect;
    out << "expected " << static_cast<long long>(*o.expect) << ", deviation "
        << fixed(100.0 * deviation, 3) << "%\n";
    if (std::abs(deviation) > 0.01) return kCheckFailed;
  }
  return kOk;
}

struct Init {
  ModelOptions model;
  std::uint64_t seed = 0;
  bool zero_residual = false;
  double sigma = 0.0;
  std::string out;
};

int cmd_init(const Init& o, std::ostream& out) {
  Network<float> net = Network<float>::build(o.model.build(), o.seed);
  if (o.zero_residual) zero_final_layer(net);
  net.set_trained_sigma(o.sigma);
  save_checkpoint(net, o.out);
  out << "wrote " << o.out << " (" << describe(net.config()) << ", checkpoint "
      << checkpoint_hash(net) << ")\n";
  return kOk;
}

struct MakeDataset {
  DataOptions data;
  std::string manifest;
};

int cmd_make_dataset(const MakeDataset& o, std::ostream& out) {
  const PatchSet set = o.data.load(o.data.dir);
  out << "patches " << set.size() << " of " << set.patch_size << "x" << set.patch_size
      << ", manifest hash " << set.manifest_hash() << '\n';
  if (!o.manifest.empty()) {
    write_text_atomic(o.manifest, set.manifest());
    out << "wrote " << o.manifest << '\n';
  }
  return kOk;
}

struct Train {
  ModelOptions model;
  DataOptions data;
  std::string out;
  int stage = 1;
  std::string resume;
  std::size_t epochs = 1;
  std::size_t batch = 16;
  std::optional<double> lr;
  std::string optimizer = "adam";
  double momentum = 0.9;
  std::uint64_t seed = 0;
  std::string val_dir;
  std::size_t val_stride = 40;
  std::string log;
  bool retrain_all = false;
};

int cmd_train(const Train& o, std::ostream& out, std::ostream& err) {
  if (o.stage != 1 && o.stage != 2) {
    err << "error: --stage must be 1 or 2\n";
    return kUsage;
  }
  if (o.stage == 2 && o.resume.empty()) {
    err << "error: stage 2 requires --resume with a stage-1 checkpoint\n";
    return kUsage;
  }
  Network<float> net = o.resume.empty() ? Network<float>::build(o.model.build(), o.seed)
                                        : load_checkpoint(o.resume);
  const Stage stage = o.stage == 1 ? Stage::stage1_full_mse : Stage::stage2_lastlayer_combined;
  TrainConfig config = TrainConfig::defaults(stage);
  config.optimizer.kind = parse_optimizer(o.optimizer);
  config.optimizer.momentum = o.momentum;
  if (o.lr) config.optimizer.learning_rate = *o.lr;
  config.batch_size = o.batch;
  config.epochs = o.epochs;
  config.seed = o.seed;
  config.retrain_all = o.retrain_all;
  config.validate();

  const PatchSet data = o.data.load(o.data.dir);
  out << "model " << describe(net.config()) << '\n'
      << "patches " << data.size() << ", manifest hash " << data.manifest_hash() << '\n';
  std::optional<PatchSet> validation;
  if (!o.val_dir.empty()) {
    DataOptions v = o.data;
    v.stride = o.val_stride;
    v.augment = "none";
    v.max_patches = 0;
    validation = v.load(o.val_dir);
    out << "validation patches " << validation->size() << '\n';
  }

  const TrainLog log = stage == Stage::stage1_full_mse
                           ? train_stage1(net, data, config, validation ? &*validation : nullptr)
                           : train_stage2(net, data, config, validation ? &*validation : nullptr);
  net.set_trained_sigma(o.data.sigma);
  for (const EpochLog& e : log.epochs) {
    out << "epoch " << e.epoch << " mean_loss " << std::setprecision(6) << e.mean_loss;
    if (e.validated)
      out << " val_psnr " << fixed(e.val_psnr) << " val_ssim " << fixed(e.val_ssim)
          << " val_ms_ssim " << fixed(e.val_ms_ssim);
    out << " (" << fixed(e.seconds, 1) << " s)\n";
  }
  save_checkpoint(net, o.out);
  const std::string log_path = o.log.empty() ? o.out + ".log" : o.log;
  write_text_atomic(log_path, log.to_text());
  out << "wrote " << o.out << " (checkpoint " << checkpoint_hash(net) << ") and " << log_path
      << '\n';
  return kOk;
}

struct Denoise {
  std::string checkpoint, in, out;
  std::optional<double> sigma;
  std::uint64_t seed = 0;
  std::string emit_diff;
  double gain = 4.0;
};

int cmd_denoise(const Denoise& o, std::ostream& out) {
  Network<float> net = load_checkpoint(o.checkpoint);
  const GrayImage input = read_pgm(o.in);
  const Tensor<float> clean = to_tensor<float>(input);
  Tensor<float> noisy = clean;
  if (o.sigma) {
    const std::string name = std::filesystem::path(o.in).filename().string();
    noisy = add_awgn(clean, NoiseSpec{*o.sigma, image_noise_seed(o.seed, name)});
  }
  const Tensor<float> denoised = clip_unit(denoise(net, noisy));
  if (o.sigma) {
    out << "noisy PSNR " << fixed(psnr(clean, noisy)) << " dB (unclipped), "
        << fixed(psnr(clean, clip_unit(noisy))) << " dB (clipped)\n"
        << "denoised PSNR " << fixed(psnr(clean, denoised)) << " dB, SSIM "
        << fixed(ssim(clean, denoised)) << '\n';
  }
  if (!o.emit_diff.empty()) write_pgm(diff_image(o.sigma ? clean : noisy, denoised, o.gain), o.emit_diff);
  write_pgm(from_tensor(denoised), o.out);
  out << "wrote " << o.out << '\n';
  return kOk;
}

struct Eval {
  std::string checkpoint, data;
  double sigma = 25.0;
  std::uint64_t seed = 0;
  std::size_t window = 11;
  std::string diff_dir, out_dir, report;
  double gain = 4.0;
};

int cmd_eval(const Eval& o, std::ostream& out, std::ostream& err) {
  Network<float> net = load_checkpoint(o.checkpoint);
  EvalOptions options;
  options.noise = NoiseSpec{o.sigma, o.seed};
  options.ssim.window_size = o.window;
  options.diff_gain = o.gain;
  if (!o.diff_dir.empty()) {
    std::filesystem::create_directories(o.diff_dir);
    options.diff_dir = o.diff_dir;
  }
  if (!o.out_dir.empty()) {
    std::filesystem::create_directories(o.out_dir);
    options.output_dir = o.out_dir;
  }
  const MetricReport report = evaluate(net, o.data, options);
  for (const std::string& w : report.warnings) err << "warning: " << w << '\n';
  out << report.to_text() << '\n' << report.to_delimited();
  if (!o.report.empty()) {
    write_text_atomic(o.report, report.to_text());
    write_text_atomic(o.report + ".tsv", report.to_delimited());
  }
  return kOk;
}

int cmd_selftest(const Hooks& hooks, std::ostream& out) {
  SelftestOptions options;
  options.conv = hooks.selftest_conv;
  bool ok = true;
  for (const CheckResult& r : run_selftest(options)) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << " ("
        << fixed(r.seconds, 2) << " s)\n";
    ok = ok && r.passed;
  }
  return ok ? kOk : kCheckFailed;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const Hooks& hooks) {
  CLI::App app("Dense-block residual denoising network", args.empty() ? "ddn" : args[0]);
  app.require_subcommand(1);
  app.set_config("--config", "", "INI file; [section] names select subcommands");
  app.allow_config_extras(CLI::config_extras_mode::error);

  int threads = 0;
  bool bit_exact = false;
  app.add_option("--threads", threads, "worker threads (0 = all cores)")->capture_default_str();
  app.add_flag("--bit-exact", bit_exact, "single-threaded execution for reproducible runs");

  CountParams count;
  auto* c_count = app.add_subcommand("count-params", "print parameter totals and breakdown");
  c_count->add_option("variant", count.variant, "v1, v2 or dncnn_ref")->required();
  c_count->add_option("--expect", count.expect, "fail if the total deviates by more than 1%");
  {
    // The positional names the variant; the remaining model overrides apply.
    auto& m = count.model;
    c_count->add_flag("--tiny", m.tiny, "two dense-block/transition pairs");
    c_count->add_option("--pairs", m.pairs, "dense-block/transition pairs");
    c_count->add_option("--base-channels", m.base_channels, "width of the first layer");
    c_count->add_option("--growth", m.growth_rate, "dense-block growth rate");
    c_count->add_option("--block-layers", m.block_layers, "layers per dense block");
    c_count->add_option("--depth", m.depth, "dncnn_ref depth");
  }

  Init init;
  auto* c_init = app.add_subcommand("init", "write an untrained checkpoint");
  init.model.add(*c_init);
  c_init->add_option("--seed", init.seed, "weight initialization seed")->capture_default_str();
  c_init->add_flag("--zero-residual", init.zero_residual, "zero the final layer (identity denoiser)");
  c_init->add_option("--sigma", init.sigma, "recorded training sigma")->capture_default_str();
  c_init->add_option("--out", init.out, "checkpoint path")->required();

  MakeDataset make;
  auto* c_make = app.add_subcommand("make-dataset", "build a patch set and print its manifest hash");
  make.data.add(*c_make, true);
  c_make->add_option("--manifest", make.manifest, "write the manifest here");

  Train train;
  auto* c_train = app.add_subcommand("train", "run training stage 1 or 2");
  train.model.add(*c_train);
  train.data.add(*c_train, true);
  c_train->add_option("--out", train.out, "output checkpoint")->required();
  c_train->add_option("--stage", train.stage, "1: full network, MSE; 2: final layer, combined loss")
      ->capture_default_str();
  c_train->add_option("--resume", train.resume, "starting checkpoint (required for stage 2)");
  c_train->add_option("--epochs", train.epochs)->capture_default_str();
  c_train->add_option("--batch", train.batch)->capture_default_str();
  c_train->add_option("--lr", train.lr, "learning rate (default 1e-3 stage 1, 1e-4 stage 2)");
  c_train->add_option("--optimizer", train.optimizer, "adam or sgd_momentum")->capture_default_str();
  c_train->add_option("--momentum", train.momentum, "SGD momentum")->capture_default_str();
  c_train->add_option("--seed", train.seed, "initialization and batch-order seed")
      ->capture_default_str();
  c_train->add_option("--val-dir", train.val_dir, "held-out images for per-epoch validation");
  c_train->add_option("--val-stride", train.val_stride, "validation patch stride")
      ->capture_default_str();
  c_train->add_option("--log", train.log, "training log (default <out>.log)");
  c_train->add_flag("--retrain-all", train.retrain_all, "stage 2 ablation: optimize every layer");

  Denoise den;
  auto* c_den = app.add_subcommand("denoise", "denoise one image");
  c_den->add_option("--checkpoint", den.checkpoint)->required();
  c_den->add_option("--in", den.in)->required();
  c_den->add_option("--out", den.out)->required();
  c_den->add_option("--sigma", den.sigma, "corrupt the input with this noise level first");
  c_den->add_option("--seed", den.seed, "noise seed")->capture_default_str();
  c_den->add_option("--emit-diff", den.emit_diff, "write a difference image");
  c_den->add_option("--gain", den.gain, "difference image gain")->capture_default_str();

  Eval ev;
  auto* c_eval = app.add_subcommand("eval", "evaluate a checkpoint on a directory of images");
  c_eval->add_option("--checkpoint", ev.checkpoint)->required();
  c_eval->add_option("--data", ev.data)->required();
  c_eval->add_option("--sigma", ev.sigma)->capture_default_str();
  c_eval->add_option("--seed", ev.seed, "global noise seed")->capture_default_str();
  c_eval->add_option("--window", ev.window, "SSIM window size")->capture_default_str();
  c_eval->add_option("--diff-dir", ev.diff_dir, "write difference images here");
  c_eval->add_option("--out-dir", ev.out_dir, "write denoised images here");
  c_eval->add_option("--report", ev.report, "write the text report here (and <report>.tsv)");
  c_eval->add_option("--gain", ev.gain, "difference image gain")->capture_default_str();

  auto* c_self = app.add_subcommand("selftest", "run the embedded verification battery");

  for (CLI::App* sub : app.get_subcommands({}))
    sub->allow_config_extras(CLI::config_extras_mode::error);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  set_num_threads(bit_exact ? 1 : threads);
  for (const CLI::App* sub : app.get_subcommands())
    echo_config(*sub, threads, bit_exact, out);

  try {
    if (c_count->parsed()) return cmd_count_params(count, out);
    if (c_init->parsed()) return cmd_init(init, out);
    if (c_make->parsed()) return cmd_make_dataset(make, out);
    if (c_train->parsed()) return cmd_train(train, out, err);
    if (c_den->parsed()) return cmd_denoise(den, out);
    if (c_eval->parsed()) return cmd_eval(ev, out, err);
    if (c_self->parsed()) return cmd_selftest(hooks, out);
  } catch (const DivergenceError& e) {
    err << "diverged: " << e.what() << '\n';
    return kDivergence;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << '\n';
    return kFormat;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kFormat;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kUsage;
  } catch (const ShapeError& e) {
    err << "shape error: " << e.what() << '\n';
    return kFormat;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}

}  // namespace ddn::cli
