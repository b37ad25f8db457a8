#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ddn/layers.hpp"

namespace ddn {

enum class Variant { v1, v2, dncnn_ref };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view name);

/// Declarative architecture description.
///
/// v1/v2: f0 = ConvBNReLU3x3(input -> base); for each of `pairs` pairs,
/// d_k = DenseBlock(t_{k-1}) with t_0 = f0, t_k = Transition(concat(d_k, f0))
/// back to `base` channels; the final 3x3 conv (with bias, no activation)
/// produces the residual map. v2 swaps the conv flavor inside dense blocks
/// and transitions for depthwise-separable units.
/// dncnn_ref: Conv+ReLU, (depth-2) x Conv+BN+ReLU, Conv, no biases anywhere.
struct ModelConfig {
  Variant variant = Variant::v1;
  std::size_t base_channels = 64;
  std::size_t pairs = 6;
  std::size_t growth_rate = 16;
  std::size_t block_layers = 4;
  std::size_t input_channels = 1;
  std::size_t dncnn_depth = 17;
  /// Concatenate f0 into every transition input (disable for the ablation).
  bool skip_to_transitions = true;

  static ModelConfig preset(Variant v);
  /// v1 with two dense-block/transition pairs, for desk-scale runs.
  static ModelConfig tiny();

  void validate() const;
  std::size_t transition_in_channels() const;
  bool operator==(const ModelConfig&) const = default;
};

std::string describe(const ModelConfig& config);

/// Observation and ablation hooks for forward().
template <typename T>
struct ForwardHooks {
  /// Replace f0 by zeros wherever it is concatenated into a transition input.
  bool zero_skip = false;
  std::function<void(std::size_t pair, const Tensor<T>& transition_input)> on_transition_input;
};

struct LayerCount {
  std::string layer;
  std::size_t count = 0;
};

struct ParameterCount {
  std::size_t total = 0;
  std::vector<LayerCount> breakdown;
};

template <typename T>
class Network {
public:
  static Network build(const ModelConfig& config, std::uint64_t seed = 0);

  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;
  ~Network();

  /// Residual map R(y; theta), same shape as `noisy`.
  Tensor<T> forward(const Tensor<T>& noisy, Mode mode, const ForwardHooks<T>* hooks = nullptr);

  const ModelConfig& config() const noexcept { return config_; }

  std::vector<Parameter<T>*> parameters();
  std::vector<const Parameter<T>*> parameters() const;
  std::vector<Buffer<T>*> buffers();
  std::vector<const Buffer<T>*> buffers() const;
  Parameter<T>& parameter(std::string_view name);
  const Parameter<T>& parameter(std::string_view name) const;

  /// sigma (8-bit units) the weights were trained for; 0 when unknown.
  double trained_sigma() const noexcept { return trained_sigma_; }
  void set_trained_sigma(double sigma) { trained_sigma_ = sigma; }

  /// Deep copy with identical values and frozen flags.
  Network clone() const;
  template <typename U>
  Network<U> cast() const;

  void zero_grad();
  /// Frozen flag of parameter i := predicate(name); throws if nothing matches.
  void set_frozen(const std::function<bool(std::string_view)>& predicate);
  void unfreeze_all();

private:
  Network() = default;
  void check_input(const Tensor<T>& noisy) const;

  ModelConfig config_;
  double trained_sigma_ = 0.0;
  std::unique_ptr<Module<T>> first_;
  std::vector<std::unique_ptr<DenseBlock<T>>> blocks_;
  std::vector<std::unique_ptr<TransitionLayer<T>>> transitions_;
  std::vector<std::unique_ptr<Module<T>>> middle_;
  std::unique_ptr<Conv<T>> final_;
  StateRefs<T> refs_;

  template <typename U>
  friend class Network;
};

/// Standard DnCNN shape used as the parameter-count reference.
template <typename T>
Network<T> build_dncnn_ref(std::size_t depth = 17, std::size_t width = 64, std::uint64_t seed = 0);

/// y - R(y; theta) in inference mode, without recording. Not clamped.
template <typename T>
Tensor<T> denoise(Network<T>& net, const Tensor<T>& noisy);

/// Every trainable scalar: conv weights, biases, BN gamma/beta. Running
/// statistics are excluded. Rows are per layer (conv, bn, ...).
template <typename T>
ParameterCount count_parameters(const Network<T>& net);

/// Zeroes the final convolution's weights and bias: the network then
/// predicts a zero residual and denoise() is the identity.
template <typename T>
void zero_final_layer(Network<T>& net);

/// Name prefix of the final convolution's parameters.
inline constexpr std::string_view kFinalLayerPrefix = "final_conv.";

extern template class Network<float>;
extern template class Network<double>;

}  // namespace ddn
