#include <Eigen/Core>

#include "ddn/parallel.hpp"
#include "ops_common.hpp"

namespace ddn {

using detail::attach;
using detail::recording_tape;
using detail::require_rank4;
using detail::verify_finite;

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

struct ConvGeometry {
  std::size_t n, cin, h, w;
  std::size_t cout, kh, kw;
  std::size_t pad, oh, ow;

  std::size_t patch() const { return cin * kh * kw; }
  std::size_t out_pixels() const { return oh * ow; }
  bool pointwise() const { return kh == 1 && kw == 1 && pad == 0; }
};

// col[(c*kh + i)*kw + j][y*ow + x] = in[c][y + i - pad][x + j - pad], zero outside.
template <typename T>
void im2col(const T* in, const ConvGeometry& g, T* col) {
  const long pad = static_cast<long>(g.pad);
  for (std::size_t c = 0; c < g.cin; ++c) {
    const T* plane = in + c * g.h * g.w;
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        T* row = col + ((c * g.kh + i) * g.kw + j) * g.out_pixels();
        for (std::size_t y = 0; y < g.oh; ++y) {
          const long sy = static_cast<long>(y + i) - pad;
          T* dst = row + y * g.ow;
          if (sy < 0 || sy >= static_cast<long>(g.h)) {
            std::fill(dst, dst + g.ow, T(0));
            continue;
          }
          const T* src = plane + sy * g.w;
          for (std::size_t x = 0; x < g.ow; ++x) {
            const long sx = static_cast<long>(x + j) - pad;
            dst[x] = (sx < 0 || sx >= static_cast<long>(g.w)) ? T(0) : src[sx];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add columns back onto the (unpadded) input grid.
template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, T* in) {
  const long pad = static_cast<long>(g.pad);
  for (std::size_t c = 0; c < g.cin; ++c) {
    T* plane = in + c * g.h * g.w;
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        const T* row = col + ((c * g.kh + i) * g.kw + j) * g.out_pixels();
        for (std::size_t y = 0; y < g.oh; ++y) {
          const long sy = static_cast<long>(y + i) - pad;
          if (sy < 0 || sy >= static_cast<long>(g.h)) continue;
          const T* src = row + y * g.ow;
          T* dst = plane + sy * g.w;
          for (std::size_t x = 0; x < g.ow; ++x) {
            const long sx = static_cast<long>(x + j) - pad;
            if (sx >= 0 && sx < static_cast<long>(g.w)) dst[sx] += src[x];
          }
        }
      }
    }
  }
}

template <typename T>
ConvGeometry conv_geometry(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                           std::size_t padding) {
  require_rank4("conv2d", "input", input.shape());
  require_rank4("conv2d", "weight", weight.shape());
  const Shape& is = input.shape();
  const Shape& ws = weight.shape();
  if (is[1] != ws[1])
    throw ShapeError("conv2d", "input channels " + std::to_string(is[1]) +
                                   " do not match weight input channels " + std::to_string(ws[1]),
                     is, ws);
  if (ws[2] % 2 == 0 || ws[3] % 2 == 0)
    throw ShapeError("conv2d: kernel extents must be odd, got weight " + to_string(ws));
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != ws[0]))
    throw ShapeError("conv2d", "bias must be [Cout]", bias.shape(), ws);
  if (is[2] + 2 * padding < ws[2] || is[3] + 2 * padding < ws[3])
    throw ShapeError("conv2d", "kernel larger than padded input", is, ws);
  ConvGeometry g{is[0], is[1], is[2], is[3], ws[0], ws[2], ws[3], padding, 0, 0};
  g.oh = g.h + 2 * padding - g.kh + 1;
  g.ow = g.w + 2 * padding - g.kw + 1;
  return g;
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 std::size_t padding) {
  const ConvGeometry g = conv_geometry(input, weight, bias, padding);
  Tensor<T> out(Shape{g.n, g.cout, g.oh, g.ow});

  const T* x = input.ptr();
  const T* wt = weight.ptr();
  T* y = out.ptr();
  const std::size_t in_stride = g.cin * g.h * g.w;
  const std::size_t out_stride = g.cout * g.out_pixels();

  parallel_for(g.n, [&](std::size_t n) {
    std::vector<T> col_buffer;
    const T* col = x + n * in_stride;
    if (!g.pointwise()) {
      col_buffer.resize(g.patch() * g.out_pixels());
      im2col(x + n * in_stride, g, col_buffer.data());
      col = col_buffer.data();
    }
    ConstMatMap<T> w_mat(wt, g.cout, g.patch());
    ConstMatMap<T> col_mat(col, g.patch(), g.out_pixels());
    MatMap<T> y_mat(y + n * out_stride, g.cout, g.out_pixels());
    y_mat.noalias() = w_mat * col_mat;
    if (bias.defined()) {
      const T* b = bias.ptr();
      for (std::size_t c = 0; c < g.cout; ++c) y_mat.row(c).array() += b[c];
    }
  });
  verify_finite("conv2d", out);

  Tape<T>* tape = recording_tape<T>({&input, &weight, &bias});
  attach(tape, "conv2d", {input, weight, bias}, out, [input = input, weight = weight, bias = bias, out, g]() mutable {
    const T* gy = std::as_const(out).grad().data();
    const T* x = std::as_const(input).ptr();
    const T* wt = std::as_const(weight).ptr();
    const std::size_t in_stride = g.cin * g.h * g.w;
    const std::size_t out_stride = g.cout * g.out_pixels();
    const bool want_x = input.requires_grad();
    const bool want_w = weight.requires_grad();
    const bool want_b = bias.defined() && bias.requires_grad();

    T* gx = want_x ? input.grad().data() : nullptr;
    // Per-sample weight gradients, reduced in sample order afterwards so the
    // result is independent of the thread count.
    std::vector<T> gw_per_sample(want_w ? g.n * g.cout * g.patch() : 0);

    parallel_for(g.n, [&](std::size_t n) {
      ConstMatMap<T> gy_mat(gy + n * out_stride, g.cout, g.out_pixels());
      std::vector<T> col_buffer;
      const T* col = x + n * in_stride;
      if (want_w) {
        if (!g.pointwise()) {
          col_buffer.resize(g.patch() * g.out_pixels());
          im2col(x + n * in_stride, g, col_buffer.data());
          col = col_buffer.data();
        }
        ConstMatMap<T> col_mat(col, g.patch(), g.out_pixels());
        MatMap<T> gw_mat(gw_per_sample.data() + n * g.cout * g.patch(), g.cout, g.patch());
        gw_mat.noalias() = gy_mat * col_mat.transpose();
      }
      if (want_x) {
        ConstMatMap<T> w_mat(wt, g.cout, g.patch());
        if (g.pointwise()) {
          MatMap<T> gx_mat(gx + n * in_stride, g.cin, g.out_pixels());
          gx_mat.noalias() += w_mat.transpose() * gy_mat;
        } else {
          std::vector<T> gcol(g.patch() * g.out_pixels());
          MatMap<T> gcol_mat(gcol.data(), g.patch(), g.out_pixels());
          gcol_mat.noalias() = w_mat.transpose() * gy_mat;
          col2im_add(gcol.data(), g, gx + n * in_stride);
        }
      }
    });

    if (want_w) {
      auto gw = weight.grad();
      const std::size_t per = g.cout * g.patch();
      for (std::size_t n = 0; n < g.n; ++n) {
        const T* src = gw_per_sample.data() + n * per;
        for (std::size_t i = 0; i < per; ++i) gw[i] += src[i];
      }
    }
    if (want_b) {
      auto gb = bias.grad();
      for (std::size_t c = 0; c < g.cout; ++c) {
        double acc = 0.0;
        for (std::size_t n = 0; n < g.n; ++n) {
          const T* row = gy + n * out_stride + c * g.out_pixels();
          for (std::size_t p = 0; p < g.out_pixels(); ++p) acc += static_cast<double>(row[p]);
        }
        gb[c] += static_cast<T>(acc);
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> depthwise_conv2d(const Tensor<T>& input, const Tensor<T>& weight) {
  require_rank4("depthwise_conv2d", "input", input.shape());
  require_rank4("depthwise_conv2d", "weight", weight.shape());
  const Shape& is = input.shape();
  const Shape& ws = weight.shape();
  if (ws[0] != is[1] || ws[1] != 1)
    throw ShapeError("depthwise_conv2d", "weight must be [C,1,kh,kw] with C = input channels", is,
                     ws);
  if (ws[2] % 2 == 0 || ws[3] % 2 == 0)
    throw ShapeError("depthwise_conv2d: kernel extents must be odd, got weight " + to_string(ws));

  const std::size_t N = is[0], C = is[1], H = is[2], W = is[3];
  const std::size_t kh = ws[2], kw = ws[3];
  const long ph = static_cast<long>(kh / 2), pw = static_cast<long>(kw / 2);
  Tensor<T> out(is);
  const T* x = input.ptr();
  const T* wt = weight.ptr();
  T* y = out.ptr();

  parallel_for(N, [&](std::size_t n) {
    for (std::size_t c = 0; c < C; ++c) {
      const T* plane = x + (n * C + c) * H * W;
      const T* k = wt + c * kh * kw;
      T* dst = y + (n * C + c) * H * W;
      for (std::size_t oy = 0; oy < H; ++oy)
        for (std::size_t ox = 0; ox < W; ++ox) {
          T acc = T(0);
          for (std::size_t i = 0; i < kh; ++i) {
            const long sy = static_cast<long>(oy + i) - ph;
            if (sy < 0 || sy >= static_cast<long>(H)) continue;
            for (std::size_t j = 0; j < kw; ++j) {
              const long sx = static_cast<long>(ox + j) - pw;
              if (sx < 0 || sx >= static_cast<long>(W)) continue;
              acc += k[i * kw + j] * plane[sy * W + sx];
            }
          }
          dst[oy * W + ox] = acc;
        }
    }
  });
  verify_finite("depthwise_conv2d", out);

  attach(recording_tape<T>({&input, &weight}), "depthwise_conv2d", {input, weight}, out,
         [input = input, weight = weight, out, N, C, H, W, kh, kw, ph, pw]() mutable {
           const T* gy = std::as_const(out).grad().data();
           const T* x = std::as_const(input).ptr();
           const T* wt = std::as_const(weight).ptr();
           T* gx = input.requires_grad() ? input.grad().data() : nullptr;
           const bool want_w = weight.requires_grad();
           std::vector<T> gw_per_sample(want_w ? N * C * kh * kw : 0, T(0));

           parallel_for(N, [&](std::size_t n) {
             for (std::size_t c = 0; c < C; ++c) {
               const T* plane = x + (n * C + c) * H * W;
               const T* grow = gy + (n * C + c) * H * W;
               const T* k = wt + c * kh * kw;
               T* gplane = gx ? gx + (n * C + c) * H * W : nullptr;
               T* gk = want_w ? gw_per_sample.data() + (n * C + c) * kh * kw : nullptr;
               for (std::size_t oy = 0; oy < H; ++oy)
                 for (std::size_t ox = 0; ox < W; ++ox) {
                   const T go = grow[oy * W + ox];
                   for (std::size_t i = 0; i < kh; ++i) {
                     const long sy = static_cast<long>(oy + i) - ph;
                     if (sy < 0 || sy >= static_cast<long>(H)) continue;
                     for (std::size_t j = 0; j < kw; ++j) {
                       const long sx = static_cast<long>(ox + j) - pw;
                       if (sx < 0 || sx >= static_cast<long>(W)) continue;
                       if (gplane) gplane[sy * W + sx] += k[i * kw + j] * go;
                       if (gk) gk[i * kw + j] += plane[sy * W + sx] * go;
                     }
                   }
                 }
             }
           });
           if (want_w) {
             auto gw = weight.grad();
             const std::size_t per = C * kh * kw;
             for (std::size_t n = 0; n < N; ++n)
               for (std::size_t i = 0; i < per; ++i) gw[i] += gw_per_sample[n * per + i];
           }
         });
  return out;
}

template <typename T>
Tensor<T> depthwise_separable_conv(const Tensor<T>& input, const Tensor<T>& depthwise_weight,
                                   const Tensor<T>& pointwise_weight, const Tensor<T>& bias) {
  require_rank4("depthwise_separable_conv", "pointwise weight", pointwise_weight.shape());
  if (pointwise_weight.dim(2) != 1 || pointwise_weight.dim(3) != 1)
    throw ShapeError("depthwise_separable_conv: pointwise weight must be [Cout,C,1,1], got " +
                     to_string(pointwise_weight.shape()));
  return conv2d(depthwise_conv2d(input, depthwise_weight), pointwise_weight, bias, 0);
}

#define DDN_INSTANTIATE(T)                                                                    \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t); \
  template Tensor<T> depthwise_conv2d(const Tensor<T>&, const Tensor<T>&);                    \
  template Tensor<T> depthwise_separable_conv(const Tensor<T>&, const Tensor<T>&,             \
                                              const Tensor<T>&, const Tensor<T>&);

DDN_INSTANTIATE(float)
DDN_INSTANTIATE(double)
#undef DDN_INSTANTIATE

}  // namespace ddn
