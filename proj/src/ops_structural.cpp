#include <algorithm>

#include "ops_common.hpp"

namespace ddn {

using detail::attach;
using detail::recording_tape;
using detail::require_rank4;
using detail::verify_finite;

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>> parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no parts given");
  require_rank4("concat_channels", "part", parts[0].shape());
  const Shape& s0 = parts[0].shape();
  std::size_t channels = 0;
  Tape<T>* tape = nullptr;
  for (const Tensor<T>& p : parts) {
    require_rank4("concat_channels", "part", p.shape());
    const Shape& s = p.shape();
    if (s[0] != s0[0] || s[2] != s0[2] || s[3] != s0[3])
      throw ShapeError("concat_channels", "batch/spatial extents differ", s0, s);
    channels += s[1];
    if (!tape) tape = recording_tape<T>({&p});
  }

  const std::size_t N = s0[0], HW = s0[2] * s0[3];
  Tensor<T> out(Shape{N, channels, s0[2], s0[3]});
  T* y = out.ptr();
  for (std::size_t n = 0; n < N; ++n) {
    std::size_t offset = 0;
    for (const Tensor<T>& p : parts) {
      const std::size_t c = p.dim(1);
      const T* src = p.ptr() + n * c * HW;
      std::copy(src, src + c * HW, y + (n * channels + offset) * HW);
      offset += c;
    }
  }

  std::vector<Tensor<T>> inputs(parts.begin(), parts.end());
  attach(tape, "concat_channels", inputs, out, [inputs, out, N, channels, HW]() mutable {
    const T* gy = std::as_const(out).grad().data();
    std::size_t offset = 0;
    for (Tensor<T>& p : inputs) {
      const std::size_t c = p.dim(1);
      if (p.requires_grad()) {
        T* gp = p.grad().data();
        for (std::size_t n = 0; n < N; ++n) {
          const T* src = gy + (n * channels + offset) * HW;
          T* dst = gp + n * c * HW;
          for (std::size_t i = 0; i < c * HW; ++i) dst[i] += src[i];
        }
      }
      offset += c;
    }
  });
  return out;
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& input, std::size_t begin, std::size_t count) {
  require_rank4("slice_channels", "input", input.shape());
  const Shape& s = input.shape();
  if (count == 0 || begin + count > s[1])
    throw ShapeError("slice_channels: range [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") outside " + to_string(s));
  const std::size_t N = s[0], C = s[1], HW = s[2] * s[3];
  Tensor<T> out(Shape{N, count, s[2], s[3]});
  for (std::size_t n = 0; n < N; ++n) {
    const T* src = input.ptr() + (n * C + begin) * HW;
    std::copy(src, src + count * HW, out.ptr() + n * count * HW);
  }
  attach(recording_tape<T>({&input}), "slice_channels", {input}, out,
         [input = input, out, N, C, HW, begin, count]() mutable {
           const T* gy = std::as_const(out).grad().data();
           T* gx = input.grad().data();
           for (std::size_t n = 0; n < N; ++n) {
             T* dst = gx + (n * C + begin) * HW;
             const T* src = gy + n * count * HW;
             for (std::size_t i = 0; i < count * HW; ++i) dst[i] += src[i];
           }
         });
  return out;
}

template <typename T>
Tensor<T> avg_pool2(const Tensor<T>& input) {
  require_rank4("avg_pool2", "input", input.shape());
  const Shape& s = input.shape();
  if (s[2] < 2 || s[3] < 2)
    throw ShapeError("avg_pool2: spatial extents must be at least 2, got " + to_string(s));
  const std::size_t NC = s[0] * s[1], H = s[2], W = s[3], oh = H / 2, ow = W / 2;
  Tensor<T> out(Shape{s[0], s[1], oh, ow});
  const T* x = input.ptr();
  T* y = out.ptr();
  for (std::size_t p = 0; p < NC; ++p)
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j) {
        const T* r0 = x + p * H * W + 2 * i * W + 2 * j;
        const T* r1 = r0 + W;
        y[p * oh * ow + i * ow + j] = T(0.25) * (r0[0] + r0[1] + r1[0] + r1[1]);
      }
  verify_finite("avg_pool2", out);
  attach(recording_tape<T>({&input}), "avg_pool2", {input}, out,
         [input = input, out, NC, H, W, oh, ow]() mutable {
           const T* gy = std::as_const(out).grad().data();
           T* gx = input.grad().data();
           for (std::size_t p = 0; p < NC; ++p)
             for (std::size_t i = 0; i < oh; ++i)
               for (std::size_t j = 0; j < ow; ++j) {
                 const T g = T(0.25) * gy[p * oh * ow + i * ow + j];
                 T* r0 = gx + p * H * W + 2 * i * W + 2 * j;
                 T* r1 = r0 + W;
                 r0[0] += g;
                 r0[1] += g;
                 r1[0] += g;
                 r1[1] += g;
               }
         });
  return out;
}

#define DDN_INSTANTIATE(T)                                                        \
  template Tensor<T> concat_channels(std::span<const Tensor<T>>);                 \
  template Tensor<T> slice_channels(const Tensor<T>&, std::size_t, std::size_t); \
  template Tensor<T> avg_pool2(const Tensor<T>&);

DDN_INSTANTIATE(float)
DDN_INSTANTIATE(double)
#undef DDN_INSTANTIATE

}  // namespace ddn
