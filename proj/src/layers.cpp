#include "ddn/layers.hpp"

#include <cmath>

#include "ddn/rng.hpp"

namespace ddn {

template <typename T>
Parameter<T>::Parameter(std::string name, Tensor<T> value)
    : name_(std::move(name)), value_(std::move(value)) {
  value_.set_requires_grad(true);
}

template <typename T>
void Parameter<T>::set_frozen(bool frozen) {
  frozen_ = frozen;
  value_.set_requires_grad(!frozen);
  if (frozen) value_.drop_grad();
}

template <typename T>
void he_normal_fill(Tensor<T>& weight, std::size_t fan_in, std::uint64_t seed) {
  if (fan_in == 0) throw ConfigError("he_normal_fill: fan_in must be positive");
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  Rng rng(seed);
  for (T& v : weight.data()) v = static_cast<T>(stddev * rng.normal());
}

namespace {
const ConvSpec& validated(const char* what, const ConvSpec& spec) {
  if (spec.in_channels == 0 || spec.out_channels == 0 || spec.kernel == 0 || spec.kernel % 2 == 0)
    throw ConfigError(std::string(what) + ": channels must be positive and the kernel odd (in=" +
                      std::to_string(spec.in_channels) + ", out=" +
                      std::to_string(spec.out_channels) + ", k=" + std::to_string(spec.kernel) +
                      ")");
  return spec;
}

template <typename T>
void require_channels(const char* what, const Tensor<T>& input, std::size_t expected) {
  if (input.rank() != 4 || input.dim(1) != expected)
    throw ShapeError(std::string(what) + ": expected " + std::to_string(expected) +
                     " input channels, got shape " + to_string(input.shape()));
}
}  // namespace

template <typename T>
BatchNorm<T>::BatchNorm(std::string prefix, std::size_t channels)
    : gamma(prefix + ".gamma", Tensor<T>(Shape{channels}, T(1))),
      beta(prefix + ".beta", Tensor<T>(Shape{channels}, T(0))),
      running_mean{prefix + ".running_mean", Tensor<T>(Shape{channels}, T(0))},
      running_var{prefix + ".running_var", Tensor<T>(Shape{channels}, T(1))} {}

template <typename T>
Tensor<T> BatchNorm<T>::forward(const Tensor<T>& input, Mode mode) {
  return batch_norm(input, gamma.value(), beta.value(), running_mean.value, running_var.value,
                    mode);
}

template <typename T>
void BatchNorm<T>::collect(StateRefs<T>& refs) {
  refs.parameters.push_back(&gamma);
  refs.parameters.push_back(&beta);
  refs.buffers.push_back(&running_mean);
  refs.buffers.push_back(&running_var);
}

template <typename T>
ConvBnRelu<T>::ConvBnRelu(std::string prefix, const ConvSpec& s, std::uint64_t seed)
    : spec(validated("ConvBnRelu", s)),
      weight(prefix + ".conv.weight",
             Tensor<T>(Shape{s.out_channels, s.in_channels, s.kernel, s.kernel})),
      bn(prefix + ".bn", s.out_channels) {
  he_normal_fill(weight.value(), s.in_channels * s.kernel * s.kernel, seed);
}

template <typename T>
Tensor<T> ConvBnRelu<T>::forward(const Tensor<T>& input, Mode mode) {
  require_channels("ConvBnRelu", input, spec.in_channels);
  return relu(bn.forward(conv2d(input, weight.value(), Tensor<T>{}, spec.kernel / 2), mode));
}

template <typename T>
void ConvBnRelu<T>::collect(StateRefs<T>& refs) {
  refs.parameters.push_back(&weight);
  bn.collect(refs);
}

template <typename T>
SeparableConvBnRelu<T>::SeparableConvBnRelu(std::string prefix, const ConvSpec& s,
                                            std::uint64_t seed)
    : spec(validated("SeparableConvBnRelu", s)),
      pointwise(prefix + ".pointwise.weight", Tensor<T>(Shape{s.out_channels, s.in_channels, 1, 1})),
      bn(prefix + ".bn", s.out_channels) {
  if (s.kernel > 1) {
    depthwise = std::make_unique<Parameter<T>>(
        prefix + ".depthwise.weight", Tensor<T>(Shape{s.in_channels, 1, s.kernel, s.kernel}));
    he_normal_fill(depthwise->value(), s.kernel * s.kernel, derive_seed(seed, 1));
    depthwise_bn = std::make_unique<BatchNorm<T>>(prefix + ".depthwise_bn", s.in_channels);
  }
  he_normal_fill(pointwise.value(), s.in_channels, derive_seed(seed, 2));
}

template <typename T>
Tensor<T> SeparableConvBnRelu<T>::forward(const Tensor<T>& input, Mode mode) {
  require_channels("SeparableConvBnRelu", input, spec.in_channels);
  Tensor<T> x = input;
  if (depthwise) x = relu(depthwise_bn->forward(depthwise_conv2d(x, depthwise->value()), mode));
  return relu(bn.forward(conv2d(x, pointwise.value(), Tensor<T>{}, 0), mode));
}

template <typename T>
void SeparableConvBnRelu<T>::collect(StateRefs<T>& refs) {
  if (depthwise) {
    refs.parameters.push_back(depthwise.get());
    depthwise_bn->collect(refs);
  }
  refs.parameters.push_back(&pointwise);
  bn.collect(refs);
}

template <typename T>
Conv<T>::Conv(std::string prefix, const ConvSpec& s, bool with_bias, std::uint64_t seed)
    : spec(validated("Conv", s)),
      weight(prefix + ".weight", Tensor<T>(Shape{s.out_channels, s.in_channels, s.kernel, s.kernel})) {
  if (s.flavor != ConvFlavor::standard) throw ConfigError("Conv: only the standard flavor exists");
  he_normal_fill(weight.value(), s.in_channels * s.kernel * s.kernel, seed);
  if (with_bias)
    bias = std::make_unique<Parameter<T>>(prefix + ".bias", Tensor<T>(Shape{s.out_channels}, T(0)));
}

template <typename T>
Tensor<T> Conv<T>::forward(const Tensor<T>& input, Mode) {
  require_channels("Conv", input, spec.in_channels);
  return conv2d(input, weight.value(), bias ? bias->value() : Tensor<T>{}, spec.kernel / 2);
}

template <typename T>
void Conv<T>::collect(StateRefs<T>& refs) {
  refs.parameters.push_back(&weight);
  if (bias) refs.parameters.push_back(bias.get());
}

template <typename T>
std::unique_ptr<Module<T>> init_conv_layer(std::string prefix, const ConvSpec& spec,
                                           std::uint64_t seed) {
  if (spec.flavor == ConvFlavor::separable)
    return std::make_unique<SeparableConvBnRelu<T>>(std::move(prefix), spec, seed);
  return std::make_unique<ConvBnRelu<T>>(std::move(prefix), spec, seed);
}

template <typename T>
DenseBlock<T>::DenseBlock(std::string prefix, const DenseBlockSpec& spec, std::uint64_t seed)
    : spec_(spec) {
  if (spec.in_channels == 0 || spec.growth_rate == 0 || spec.num_layers == 0)
    throw ConfigError("DenseBlock: extents must be positive");
  for (std::size_t i = 0; i < spec.num_layers; ++i) {
    const ConvSpec conv{spec.layer_in_channels(i), spec.growth_rate, spec.kernel, spec.flavor};
    layers_.push_back(init_conv_layer<T>(prefix + ".layer" + std::to_string(i + 1), conv,
                                         derive_seed(seed, i)));
  }
}

template <typename T>
Tensor<T> DenseBlock<T>::forward(const Tensor<T>& input, Mode mode) {
  require_channels("DenseBlock", input, spec_.in_channels);
  std::vector<Tensor<T>> features{input};
  features.reserve(layers_.size() + 1);
  Tensor<T> current = input;
  for (auto& layer : layers_) {
    features.push_back(layer->forward(current, mode));
    current = concat_channels<T>(std::span<const Tensor<T>>(features));
  }
  return current;
}

template <typename T>
void DenseBlock<T>::collect(StateRefs<T>& refs) {
  for (auto& layer : layers_) layer->collect(refs);
}

template <typename T>
TransitionLayer<T>::TransitionLayer(std::string prefix, const TransitionSpec& spec,
                                    std::uint64_t seed)
    : spec_(spec) {
  if (spec.kernel != 1) throw ConfigError("TransitionLayer: kernel must be 1x1");
  unit_ = init_conv_layer<T>(std::move(prefix), {spec.in_channels, spec.out_channels, 1, spec.flavor},
                             seed);
}

template <typename T>
Tensor<T> TransitionLayer<T>::forward(const Tensor<T>& input, Mode mode) {
  require_channels("TransitionLayer", input, spec_.in_channels);
  return unit_->forward(input, mode);
}

template <typename T>
void TransitionLayer<T>::collect(StateRefs<T>& refs) {
  unit_->collect(refs);
}

template <typename T>
void set_frozen(std::span<Parameter<T>* const> params,
                const std::function<bool(std::string_view)>& predicate) {
  std::size_t matched = 0;
  for (Parameter<T>* p : params)
    if (predicate(p->name())) ++matched;
  if (matched == 0) throw ConfigError("set_frozen: predicate matches no parameter");
  for (Parameter<T>* p : params) p->set_frozen(predicate(p->name()));
}

bool glob_match(std::string_view pattern, std::string_view name) {
  std::size_t p = 0, n = 0, star = std::string_view::npos, resume = 0;
  while (n < name.size()) {
    if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == name[n])) {
      ++p;
      ++n;
    } else if (p < pattern.size() && pattern[p] == '*') {
      star = p++;
      resume = n;
    } else if (star != std::string_view::npos) {
      p = star + 1;
      n = ++resume;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

#define DDN_INSTANTIATE(T)                                                                  \
  template class Parameter<T>;                                                              \
  template class BatchNorm<T>;                                                              \
  template class ConvBnRelu<T>;                                                             \
  template class SeparableConvBnRelu<T>;                                                    \
  template class Conv<T>;                                                                   \
  template class DenseBlock<T>;                                                             \
  template class TransitionLayer<T>;                                                        \
  template std::unique_ptr<Module<T>> init_conv_layer<T>(std::string, const ConvSpec&,      \
                                                         std::uint64_t);                    \
  template void set_frozen<T>(std::span<Parameter<T>* const>,                               \
                              const std::function<bool(std::string_view)>&);                \
  template void he_normal_fill<T>(Tensor<T>&, std::size_t, std::uint64_t);

DDN_INSTANTIATE(float)
DDN_INSTANTIATE(double)
#undef DDN_INSTANTIATE

}  // namespace ddn
