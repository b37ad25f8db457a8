#include <cmath>

#include "ops_common.hpp"

namespace ddn {

using detail::attach;
using detail::recording_tape;
using detail::require_rank4;
using detail::verify_finite;

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                     Tensor<T>& running_mean, Tensor<T>& running_var, Mode mode,
                     const BatchNormOptions& options) {
  require_rank4("batch_norm", "input", input.shape());
  const Shape& is = input.shape();
  const std::size_t N = is[0], C = is[1], HW = is[2] * is[3];
  for (const Tensor<T>* p : {&gamma, &beta, static_cast<const Tensor<T>*>(&running_mean),
                             static_cast<const Tensor<T>*>(&running_var)})
    if (p->rank() != 1 || p->dim(0) != C)
      throw ShapeError("batch_norm", "per-channel parameters must be [C]", p->shape(), is);

  const std::size_t count = N * HW;
  std::vector<T> mean_c(C), invstd_c(C);
  const T* x = input.ptr();

  if (mode == Mode::train) {
    for (std::size_t c = 0; c < C; ++c) {
      double s = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        const T* plane = x + (n * C + c) * HW;
        for (std::size_t i = 0; i < HW; ++i) s += static_cast<double>(plane[i]);
      }
      const double m = s / static_cast<double>(count);
      double ss = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        const T* plane = x + (n * C + c) * HW;
        for (std::size_t i = 0; i < HW; ++i) {
          const double d = static_cast<double>(plane[i]) - m;
          ss += d * d;
        }
      }
      const double var = ss / static_cast<double>(count);
      mean_c[c] = static_cast<T>(m);
      invstd_c[c] = static_cast<T>(1.0 / std::sqrt(var + options.epsilon));

      const double unbiased = count > 1 ? ss / static_cast<double>(count - 1) : var;
      T& rm = running_mean.data()[c];
      T& rv = running_var.data()[c];
      rm = static_cast<T>(options.momentum * rm + (1.0 - options.momentum) * m);
      rv = static_cast<T>(options.momentum * rv + (1.0 - options.momentum) * unbiased);
    }
  } else {
    for (std::size_t c = 0; c < C; ++c) {
      mean_c[c] = running_mean.data()[c];
      invstd_c[c] = static_cast<T>(
          1.0 / std::sqrt(static_cast<double>(running_var.data()[c]) + options.epsilon));
    }
  }

  Tensor<T> out(is);
  T* y = out.ptr();
  const T* gm = gamma.ptr();
  const T* bt = beta.ptr();
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c) {
      const T* src = x + (n * C + c) * HW;
      T* dst = y + (n * C + c) * HW;
      const T a = gm[c] * invstd_c[c];
      const T m = mean_c[c];
      for (std::size_t i = 0; i < HW; ++i) dst[i] = a * (src[i] - m) + bt[c];
    }
  verify_finite("batch_norm", out);

  attach(recording_tape<T>({&input, &gamma, &beta}), "batch_norm", {input, gamma, beta}, out,
         [input = input, gamma = gamma, beta = beta, out, mean_c, invstd_c, N, C, HW, count, mode]() mutable {
           const T* gy = std::as_const(out).grad().data();
           const T* x = std::as_const(input).ptr();
           const T* gm = std::as_const(gamma).ptr();
           T* gx = input.requires_grad() ? input.grad().data() : nullptr;
           T* ggamma = gamma.requires_grad() ? gamma.grad().data() : nullptr;
           T* gbeta = beta.requires_grad() ? beta.grad().data() : nullptr;

           for (std::size_t c = 0; c < C; ++c) {
             // sum(dy) and sum(dy * xhat) over the channel.
             double sum_dy = 0.0, sum_dy_xhat = 0.0;
             for (std::size_t n = 0; n < N; ++n) {
               const T* src = x + (n * C + c) * HW;
               const T* g = gy + (n * C + c) * HW;
               for (std::size_t i = 0; i < HW; ++i) {
                 const double xhat = (static_cast<double>(src[i]) - mean_c[c]) * invstd_c[c];
                 sum_dy += g[i];
                 sum_dy_xhat += g[i] * xhat;
               }
             }
             if (ggamma) ggamma[c] += static_cast<T>(sum_dy_xhat);
             if (gbeta) gbeta[c] += static_cast<T>(sum_dy);
             if (!gx) continue;

             const double scale = static_cast<double>(gm[c]) * invstd_c[c];
             const double inv_count = 1.0 / static_cast<double>(count);
             for (std::size_t n = 0; n < N; ++n) {
               const T* src = x + (n * C + c) * HW;
               const T* g = gy + (n * C + c) * HW;
               T* dst = gx + (n * C + c) * HW;
               for (std::size_t i = 0; i < HW; ++i) {
                 if (mode == Mode::infer) {
                   dst[i] += static_cast<T>(scale * g[i]);
                 } else {
                   const double xhat = (static_cast<double>(src[i]) - mean_c[c]) * invstd_c[c];
                   dst[i] += static_cast<T>(
                       scale * (g[i] - inv_count * sum_dy - xhat * inv_count * sum_dy_xhat));
                 }
               }
             }
           }
         });
  return out;
}

template Tensor<float> batch_norm(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&,
                                  Tensor<float>&, Tensor<float>&, Mode, const BatchNormOptions&);
template Tensor<double> batch_norm(const Tensor<double>&, const Tensor<double>&,
                                   const Tensor<double>&, Tensor<double>&, Tensor<double>&, Mode,
                                   const BatchNormOptions&);

}  // namespace ddn
