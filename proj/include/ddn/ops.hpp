#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ddn/tape.hpp"
#include "ddn/tensor.hpp"

namespace ddn {

enum class Mode { train, infer };

/// When enabled (the default) every operation verifies that it produced
/// only finite values and throws NumericError otherwise.
void set_check_finite(bool on);
bool check_finite_enabled();

/// While alive, records on which side of zero every relu and pow_positive
/// input on this thread falls. Two evaluations with equal fingerprints lie
/// on the same smooth piece of the computed function, which is what a
/// finite-difference stencil needs. Scopes do not nest.
class KinkFingerprint {
public:
  KinkFingerprint();
  ~KinkFingerprint();
  KinkFingerprint(const KinkFingerprint&) = delete;
  KinkFingerprint& operator=(const KinkFingerprint&) = delete;

  std::uint64_t value() const noexcept { return hash_; }
  void fold(bool positive) noexcept;

private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

// Element-wise. Binary operations require identical shapes.
enum class ElementwiseOp { add, sub, mul, scalar_mul, relu, square };

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T s);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& a, T s);
template <typename T> Tensor<T> relu(const Tensor<T>& a);
template <typename T> Tensor<T> square(const Tensor<T>& a);
/// max(a, 0)^p; the gradient is taken as zero where a <= 0.
template <typename T> Tensor<T> pow_positive(const Tensor<T>& a, T p);

/// Dispatches the element-wise family. `b` is ignored for unary ops; for
/// scalar_mul it must hold a single value.
template <typename T>
Tensor<T> elementwise(ElementwiseOp op, const Tensor<T>& a, const Tensor<T>& b);

// Reductions.
template <typename T> Tensor<T> sum(const Tensor<T>& a);
template <typename T> Tensor<T> mean(const Tensor<T>& a);
/// Mean over all axes but the first: [N, ...] -> [N].
template <typename T> Tensor<T> mean_per_sample(const Tensor<T>& a);

/// Stride-1 cross-correlation with symmetric zero padding.
/// input [N,Cin,H,W], weight [Cout,Cin,kh,kw] (odd kh, kw), optional bias [Cout].
/// Output [N,Cout,H+2p-kh+1,W+2p-kw+1].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 std::size_t padding);

/// One kh x kw filter per channel, "same" padding. weight [C,1,kh,kw].
template <typename T>
Tensor<T> depthwise_conv2d(const Tensor<T>& input, const Tensor<T>& weight);

/// Depthwise stage followed by a 1x1 pointwise conv2d.
template <typename T>
Tensor<T> depthwise_separable_conv(const Tensor<T>& input, const Tensor<T>& depthwise_weight,
                                   const Tensor<T>& pointwise_weight, const Tensor<T>& bias);

struct BatchNormOptions {
  double momentum = 0.9;
  double epsilon = 1e-5;
};

/// Per-channel normalization of [N,C,H,W]. Train mode normalizes with batch
/// statistics and folds them into the running estimates
/// (running = momentum * running + (1 - momentum) * batch, unbiased variance);
/// infer mode uses the running estimates and leaves them untouched.
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                     Tensor<T>& running_mean, Tensor<T>& running_var, Mode mode,
                     const BatchNormOptions& options = {});

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>> parts);

template <typename T>
Tensor<T> concat_channels(std::initializer_list<Tensor<T>> parts) {
  std::vector<Tensor<T>> v(parts);
  return concat_channels<T>(std::span<const Tensor<T>>(v));
}

/// Channels [begin, begin + count) of [N,C,H,W].
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& input, std::size_t begin, std::size_t count);

/// 2x2 non-overlapping mean pooling; an odd trailing row/column is dropped.
template <typename T>
Tensor<T> avg_pool2(const Tensor<T>& input);

}  // namespace ddn
