#include "ddn/loss.hpp"

#include "ddn/ops.hpp"

namespace ddn {

std::string_view to_string(LossKind k) {
  return k == LossKind::mse_residual ? "mse_residual" : "combined";
}

namespace {

template <typename T>
void check_batch(const char* op, const Tensor<T>& clean, const Tensor<T>& noisy) {
  if (!clean.defined() || !noisy.defined()) throw ShapeError(std::string(op) + ": empty batch");
  if (clean.shape() != noisy.shape())
    throw ShapeError(op, "clean and noisy batches differ", clean.shape(), noisy.shape());
  if (clean.rank() != 4) throw ShapeError(std::string(op) + ": expected [N,C,H,W] batches");
}

}  // namespace

template <typename T>
Tensor<T> residual_mse(const Tensor<T>& residual, const Tensor<T>& clean, const Tensor<T>& noisy) {
  check_batch("residual_mse", clean, noisy);
  if (residual.shape() != clean.shape())
    throw ShapeError("residual_mse", "residual and batch differ", residual.shape(), clean.shape());
  Tensor<T> target(clean.shape());
  for (std::size_t i = 0; i < target.numel(); ++i)
    target.data()[i] = noisy.data()[i] - clean.data()[i];
  const T inv_2n = T(1) / (T(2) * static_cast<T>(clean.dim(0)));
  return scale(sum(square(sub(residual, target))), inv_2n);
}

template <typename T>
Tensor<T> loss_mse_residual(Network<T>& net, const Tensor<T>& clean, const Tensor<T>& noisy,
                            Mode mode) {
  check_batch("loss_mse_residual", clean, noisy);
  return residual_mse(net.forward(noisy, mode), clean, noisy);
}

template <typename T>
Tensor<T> loss_combined(Network<T>& net, const Tensor<T>& clean, const Tensor<T>& noisy, Mode mode,
                        const SsimParams& params) {
  check_batch("loss_combined", clean, noisy);
  Tensor<T> residual = net.forward(noisy, mode);
  Tensor<T> denoised = sub(noisy, residual);
  Tensor<T> similarity = mean(ms_ssim_per_sample(clean, denoised, params));
  Tensor<T> structural = add_scalar(scale(similarity, T(-1)), T(1));
  return add(structural, residual_mse(residual, clean, noisy));
}

template <typename T>
Tensor<T> compute_loss(LossKind kind, Network<T>& net, const Tensor<T>& clean,
                       const Tensor<T>& noisy, Mode mode) {
  return kind == LossKind::mse_residual ? loss_mse_residual(net, clean, noisy, mode)
                                        : loss_combined(net, clean, noisy, mode);
}

#define DDN_INSTANTIATE(T)                                                                       \
  template Tensor<T> residual_mse(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);         \
  template Tensor<T> loss_mse_residual(Network<T>&, const Tensor<T>&, const Tensor<T>&, Mode);   \
  template Tensor<T> loss_combined(Network<T>&, const Tensor<T>&, const Tensor<T>&, Mode,        \
                                   const SsimParams&);                                           \
  template Tensor<T> compute_loss(LossKind, Network<T>&, const Tensor<T>&, const Tensor<T>&, Mode);

DDN_INSTANTIATE(float)
DDN_INSTANTIATE(double)
#undef DDN_INSTANTIATE

}  // namespace ddn
