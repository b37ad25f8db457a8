#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ddn/dataset.hpp"
#include "ddn/loss.hpp"
#include "ddn/model.hpp"
#include "ddn/optimizer.hpp"

namespace ddn {

enum class Stage { stage1_full_mse, stage2_lastlayer_combined };

std::string_view to_string(Stage s);

struct TrainConfig {
  Stage stage = Stage::stage1_full_mse;
  OptimizerConfig optimizer;
  std::size_t batch_size = 16;
  std::size_t epochs = 1;
  std::uint64_t seed = 0;
  /// Stage 2 ablation: optimize every layer with the combined loss
  /// (batch norm then runs in training mode).
  bool retrain_all = false;

  /// Stage defaults: Adam at 1e-3 for stage 1, 1e-4 for stage 2.
  static TrainConfig defaults(Stage stage);
  void validate() const;
};

struct StepLog {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double loss = 0.0;
  double learning_rate = 0.0;
  double update_norm = 0.0;
  double seconds = 0.0;
};

struct EpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  bool validated = false;
  double val_psnr = 0.0;
  double val_ssim = 0.0;
  double val_ms_ssim = 0.0;
  double seconds = 0.0;
};

/// Append-only record of a training run.
struct TrainLog {
  std::vector<StepLog> steps;
  std::vector<EpochLog> epochs;

  /// Line-oriented text: "step ..." and "epoch ..." records in order.
  /// Wall-clock columns are left out when `with_time` is false.
  std::string to_text(bool with_time = true) const;
};

/// Mean metrics of the network's output over a patch set.
struct PatchMetrics {
  double noisy_psnr = 0.0;
  double denoised_psnr = 0.0;
  double ssim = 0.0;
  double ms_ssim = 0.0;
};

PatchMetrics evaluate_patches(Network<float>& net, const PatchSet& patches,
                              std::size_t chunk = 64);

/// Minibatch training of every parameter on the residual MSE. Batch order
/// is a seeded permutation per epoch. Unfreezes the network first.
/// Throws DivergenceError when the loss stops being finite.
TrainLog train_stage1(Network<float>& net, const PatchSet& data, const TrainConfig& config,
                      const PatchSet* validation = nullptr);

/// Retrains only the final convolution on the combined loss with batch norm
/// in inference mode, so every other tensor stays bit-identical.
TrainLog train_stage2(Network<float>& net, const PatchSet& data, const TrainConfig& config,
                      const PatchSet* validation = nullptr);

}  // namespace ddn
