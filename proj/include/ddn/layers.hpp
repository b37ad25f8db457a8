#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "ddn/ops.hpp"

namespace ddn {

/// Trainable tensor with a hierarchical name. A frozen parameter does not
/// require a gradient and is skipped by every optimizer.
template <typename T>
class Parameter {
public:
  Parameter(std::string name, Tensor<T> value);

  const std::string& name() const noexcept { return name_; }
  Tensor<T>& value() noexcept { return value_; }
  const Tensor<T>& value() const noexcept { return value_; }
  bool frozen() const noexcept { return frozen_; }
  void set_frozen(bool frozen);

private:
  std::string name_;
  Tensor<T> value_;
  bool frozen_ = false;
};

/// Non-trainable state saved with the model (batch-norm running statistics).
template <typename T>
struct Buffer {
  std::string name;
  Tensor<T> value;
};

/// Parameter and buffer pointers gathered from a module tree, in a stable order.
template <typename T>
struct StateRefs {
  std::vector<Parameter<T>*> parameters;
  std::vector<Buffer<T>*> buffers;
};

enum class ConvFlavor { standard, separable };

struct ConvSpec {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 3;
  ConvFlavor flavor = ConvFlavor::standard;
};

struct DenseBlockSpec {
  std::size_t in_channels = 64;
  std::size_t growth_rate = 16;
  std::size_t num_layers = 4;
  std::size_t kernel = 3;
  ConvFlavor flavor = ConvFlavor::standard;

  std::size_t out_channels() const { return in_channels + num_layers * growth_rate; }
  /// Input width of internal layer i (0-based).
  std::size_t layer_in_channels(std::size_t i) const { return in_channels + i * growth_rate; }
};

struct TransitionSpec {
  std::size_t in_channels = 0;
  std::size_t out_channels = 64;
  std::size_t kernel = 1;
  ConvFlavor flavor = ConvFlavor::standard;
};

template <typename T>
class Module {
public:
  virtual ~Module() = default;
  virtual Tensor<T> forward(const Tensor<T>& input, Mode mode) = 0;
  virtual void collect(StateRefs<T>& refs) = 0;
};

template <typename T>
class BatchNorm {
public:
  BatchNorm(std::string prefix, std::size_t channels);
  Tensor<T> forward(const Tensor<T>& input, Mode mode);
  void collect(StateRefs<T>& refs);

  Parameter<T> gamma, beta;
  Buffer<T> running_mean, running_var;
};

/// conv (no bias) -> batch norm -> ReLU.
template <typename T>
class ConvBnRelu : public Module<T> {
public:
  ConvBnRelu(std::string prefix, const ConvSpec& spec, std::uint64_t seed);
  Tensor<T> forward(const Tensor<T>& input, Mode mode) override;
  void collect(StateRefs<T>& refs) override;

  ConvSpec spec;
  Parameter<T> weight;
  BatchNorm<T> bn;
};

/// depthwise kxk -> BN -> ReLU -> pointwise 1x1 -> BN -> ReLU.
/// With a 1x1 kernel the depthwise stage is a per-channel scale that the
/// pointwise weights absorb, so only the pointwise stage is built.
template <typename T>
class SeparableConvBnRelu : public Module<T> {
public:
  SeparableConvBnRelu(std::string prefix, const ConvSpec& spec, std::uint64_t seed);
  Tensor<T> forward(const Tensor<T>& input, Mode mode) override;
  void collect(StateRefs<T>& refs) override;

  ConvSpec spec;
  std::unique_ptr<Parameter<T>> depthwise;
  std::unique_ptr<BatchNorm<T>> depthwise_bn;
  Parameter<T> pointwise;
  BatchNorm<T> bn;
};

/// Plain convolution with optional bias and no activation.
template <typename T>
class Conv : public Module<T> {
public:
  Conv(std::string prefix, const ConvSpec& spec, bool with_bias, std::uint64_t seed);
  Tensor<T> forward(const Tensor<T>& input, Mode mode) override;
  void collect(StateRefs<T>& refs) override;

  ConvSpec spec;
  Parameter<T> weight;
  std::unique_ptr<Parameter<T>> bias;
};

/// Builds a conv -> BN -> ReLU unit of the requested flavor.
template <typename T>
std::unique_ptr<Module<T>> init_conv_layer(std::string prefix, const ConvSpec& spec,
                                           std::uint64_t seed);

/// Each internal layer sees the concatenation of the block input and every
/// earlier layer's output; the block returns all of them concatenated.
template <typename T>
class DenseBlock : public Module<T> {
public:
  DenseBlock(std::string prefix, const DenseBlockSpec& spec, std::uint64_t seed);
  Tensor<T> forward(const Tensor<T>& input, Mode mode) override;
  void collect(StateRefs<T>& refs) override;

  const DenseBlockSpec& spec() const noexcept { return spec_; }
  Module<T>& layer(std::size_t i) { return *layers_.at(i); }

private:
  DenseBlockSpec spec_;
  std::vector<std::unique_ptr<Module<T>>> layers_;
};

/// 1x1 conv -> BN -> ReLU compressing the feature volume to out_channels.
template <typename T>
class TransitionLayer : public Module<T> {
public:
  TransitionLayer(std::string prefix, const TransitionSpec& spec, std::uint64_t seed);
  Tensor<T> forward(const Tensor<T>& input, Mode mode) override;
  void collect(StateRefs<T>& refs) override;

  const TransitionSpec& spec() const noexcept { return spec_; }

private:
  TransitionSpec spec_;
  std::unique_ptr<Module<T>> unit_;
};

/// Marks each parameter frozen iff predicate(name) holds. Throws ConfigError
/// when the predicate matches no parameter.
template <typename T>
void set_frozen(std::span<Parameter<T>* const> params,
                const std::function<bool(std::string_view)>& predicate);

/// Glob match supporting '*' (any run of characters) and '?'.
bool glob_match(std::string_view pattern, std::string_view name);

/// He-scaled normal fill: std = sqrt(2 / fan_in).
template <typename T>
void he_normal_fill(Tensor<T>& weight, std::size_t fan_in, std::uint64_t seed);

extern template class Parameter<float>;
extern template class Parameter<double>;

}  // namespace ddn
