#include "ddn/trainer.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "ddn/metrics.hpp"
#include "ddn/ops.hpp"
#include "ddn/rng.hpp"

namespace ddn {

std::string_view to_string(Stage s) {
  return s == Stage::stage1_full_mse ? "stage1_full_mse" : "stage2_lastlayer_combined";
}

TrainConfig TrainConfig::defaults(Stage stage) {
  TrainConfig c;
  c.stage = stage;
  c.optimizer.learning_rate = stage == Stage::stage1_full_mse ? 1e-3 : 1e-4;
  return c;
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("train: batch_size must be at least 1");
  optimizer.validate();
}

std::string TrainLog::to_text(bool with_time) const {
  std::ostringstream os;
  os << std::setprecision(9);
  for (const StepLog& s : steps) {
    os << "step " << s.step << " epoch " << s.epoch << " loss " << s.loss << " lr "
       << s.learning_rate << " update_norm " << s.update_norm;
    if (with_time) os << " seconds " << std::setprecision(4) << s.seconds << std::setprecision(9);
    os << '\n';
  }
  for (const EpochLog& e : epochs) {
    os << "epoch " << e.epoch << " mean_loss " << e.mean_loss;
    if (e.validated)
      os << " val_psnr " << e.val_psnr << " val_ssim " << e.val_ssim << " val_ms_ssim "
         << e.val_ms_ssim;
    if (with_time) os << " seconds " << std::setprecision(4) << e.seconds << std::setprecision(9);
    os << '\n';
  }
  return os.str();
}

PatchMetrics evaluate_patches(Network<float>& net, const PatchSet& patches, std::size_t chunk) {
  if (patches.size() == 0) throw ConfigError("evaluate_patches: empty patch set");
  if (chunk == 0) chunk = 1;
  const SsimParams params = SsimParams::for_loss();
  PatchMetrics sum;
  for (std::size_t begin = 0; begin < patches.size(); begin += chunk) {
    const std::size_t end = std::min(patches.size(), begin + chunk);
    std::vector<std::size_t> idx(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    const Tensor<float> clean = gather_rows(patches.clean, idx);
    const Tensor<float> noisy = gather_rows(patches.noisy, idx);
    const Tensor<float> denoised = denoise(net, noisy);
    NoGradScope<float> no_grad;
    const Tensor<float> ssim_v = ssim_per_sample(clean, denoised, params);
    const Tensor<float> ms_v = ms_ssim_per_sample(clean, denoised, params);
    const std::size_t plane = clean.numel() / idx.size();
    const Shape one{1, 1, clean.dim(2), clean.dim(3)};
    for (std::size_t i = 0; i < idx.size(); ++i) {
      auto row = [&](const Tensor<float>& t) {
        return Tensor<float>(one, std::vector<float>(t.ptr() + i * plane, t.ptr() + (i + 1) * plane));
      };
      const Tensor<float> c = row(clean);
      sum.noisy_psnr += psnr(c, row(noisy));
      sum.denoised_psnr += psnr(c, row(denoised));
      sum.ssim += ssim_v.data()[i];
      sum.ms_ssim += ms_v.data()[i];
    }
  }
  const double n = static_cast<double>(patches.size());
  return {sum.noisy_psnr / n, sum.denoised_psnr / n, sum.ssim / n, sum.ms_ssim / n};
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

/// Restores every frozen flag to false on scope exit.
class UnfreezeGuard {
public:
  explicit UnfreezeGuard(Network<float>& net) : net_(net) {}
  ~UnfreezeGuard() { net_.unfreeze_all(); }
  UnfreezeGuard(const UnfreezeGuard&) = delete;
  UnfreezeGuard& operator=(const UnfreezeGuard&) = delete;

private:
  Network<float>& net_;
};

TrainLog run_epochs(Network<float>& net, const PatchSet& data, const TrainConfig& config,
                    LossKind loss_kind, Mode mode, const PatchSet* validation) {
  config.validate();
  if (data.size() == 0 && config.epochs > 0) throw ConfigError("train: empty dataset");

  Optimizer<float> optimizer(config.optimizer, net.parameters());
  TrainLog log;
  const Clock::time_point start = Clock::now();
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const std::vector<std::size_t> order = permutation(data.size(), derive_seed(config.seed, epoch));
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const std::span<const std::size_t> idx(order.data() + begin, end - begin);
      const Tensor<float> clean = gather_rows(data.clean, idx);
      const Tensor<float> noisy = gather_rows(data.noisy, idx);

      Tape<float> tape;
      double loss_value = 0.0;
      try {
        TapeScope<float> scope(tape);
        Tensor<float> loss = compute_loss(loss_kind, net, clean, noisy, mode);
        loss_value = static_cast<double>(loss.item());
        if (!std::isfinite(loss_value))
          throw DivergenceError("loss is not finite");
        tape.backward(loss);
      } catch (const DivergenceError& e) {
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ", step " +
                              std::to_string(step) + ": " + e.what());
      } catch (const NumericError& e) {
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ", step " +
                              std::to_string(step) + ": " + e.what());
      }
      optimizer.step(net.parameters());

      log.steps.push_back({step, epoch, loss_value, config.optimizer.learning_rate,
                           optimizer.last_update_norm(), seconds_since(start)});
      loss_sum += loss_value;
      ++batches;
      ++step;
    }

    EpochLog e;
    e.epoch = epoch;
    e.mean_loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
    if (validation && validation->size() > 0) {
      const PatchMetrics m = evaluate_patches(net, *validation);
      e.validated = true;
      e.val_psnr = m.denoised_psnr;
      e.val_ssim = m.ssim;
      e.val_ms_ssim = m.ms_ssim;
    }
    e.seconds = seconds_since(start);
    log.epochs.push_back(e);
  }
  return log;
}

}  // namespace

TrainLog train_stage1(Network<float>& net, const PatchSet& data, const TrainConfig& config,
                      const PatchSet* validation) {
  if (config.stage != Stage::stage1_full_mse)
    throw ConfigError("train_stage1: config is for " + std::string(to_string(config.stage)));
  net.unfreeze_all();
  return run_epochs(net, data, config, LossKind::mse_residual, Mode::train, validation);
}

TrainLog train_stage2(Network<float>& net, const PatchSet& data, const TrainConfig& config,
                      const PatchSet* validation) {
  if (config.stage != Stage::stage2_lastlayer_combined)
    throw ConfigError("train_stage2: config is for " + std::string(to_string(config.stage)));
  UnfreezeGuard guard(net);
  if (config.retrain_all) {
    net.unfreeze_all();
    return run_epochs(net, data, config, LossKind::combined, Mode::train, validation);
  }
  net.set_frozen([](std::string_view name) { return !name.starts_with(kFinalLayerPrefix); });
  std::size_t trainable = 0;
  for (const Parameter<float>* p : std::as_const(net).parameters()) trainable += !p->frozen();
  if (trainable == 0) throw ConfigError("train_stage2: the freeze leaves no trainable parameter");
  return run_epochs(net, data, config, LossKind::combined, Mode::infer, validation);
}

}  // namespace ddn
