#pragma once

#include <string_view>

#include "ddn/metrics.hpp"
#include "ddn/model.hpp"

namespace ddn {

enum class LossKind { mse_residual, combined };

std::string_view to_string(LossKind k);

/// (1/2N) sum_i ||residual_i - (noisy_i - clean_i)||_F^2 for a [N,...] batch.
template <typename T>
Tensor<T> residual_mse(const Tensor<T>& residual, const Tensor<T>& clean, const Tensor<T>& noisy);

/// residual_mse of the network's prediction on `noisy`.
template <typename T>
Tensor<T> loss_mse_residual(Network<T>& net, const Tensor<T>& clean, const Tensor<T>& noisy,
                            Mode mode);

/// (1 - mean_i MS-SSIM(clean_i, noisy_i - R(noisy_i))) + residual_mse, both
/// terms sharing one forward pass.
template <typename T>
Tensor<T> loss_combined(Network<T>& net, const Tensor<T>& clean, const Tensor<T>& noisy, Mode mode,
                        const SsimParams& params = SsimParams::for_loss());

template <typename T>
Tensor<T> compute_loss(LossKind kind, Network<T>& net, const Tensor<T>& clean,
                       const Tensor<T>& noisy, Mode mode);

}  // namespace ddn
