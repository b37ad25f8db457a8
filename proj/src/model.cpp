#include "ddn/model.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "ddn/rng.hpp"

namespace ddn {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::v1: return "v1";
    case Variant::v2: return "v2";
    case Variant::dncnn_ref: return "dncnn_ref";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  if (name == "v1") return Variant::v1;
  if (name == "v2") return Variant::v2;
  if (name == "dncnn_ref" || name == "dncnn") return Variant::dncnn_ref;
  throw ConfigError("unknown variant '" + std::string(name) + "' (expected v1, v2 or dncnn_ref)");
}

ModelConfig ModelConfig::preset(Variant v) {
  ModelConfig c;
  c.variant = v;
  return c;
}

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.pairs = 2;
  return c;
}

void ModelConfig::validate() const {
  if (base_channels == 0 || input_channels == 0)
    throw ConfigError("ModelConfig: base_channels and input_channels must be positive");
  if (variant == Variant::dncnn_ref) {
    if (dncnn_depth < 3) throw ConfigError("ModelConfig: dncnn depth must be at least 3");
    return;
  }
  if (pairs == 0 || growth_rate == 0 || block_layers == 0)
    throw ConfigError("ModelConfig: pairs, growth_rate and block_layers must be positive");
}

std::size_t ModelConfig::transition_in_channels() const {
  return base_channels + block_layers * growth_rate + (skip_to_transitions ? base_channels : 0);
}

std::string describe(const ModelConfig& c) {
  std::ostringstream os;
  os << "variant=" << to_string(c.variant) << " input_channels=" << c.input_channels
     << " base_channels=" << c.base_channels;
  if (c.variant == Variant::dncnn_ref) {
    os << " depth=" << c.dncnn_depth;
  } else {
    os << " pairs=" << c.pairs << " growth_rate=" << c.growth_rate
       << " block_layers=" << c.block_layers
       << " skip_to_transitions=" << (c.skip_to_transitions ? "true" : "false");
  }
  return os.str();
}

template <typename T>
Network<T>::~Network() = default;

template <typename T>
Network<T> Network<T>::build(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Network net;
  net.config_ = config;
  const std::size_t base = config.base_channels;
  std::uint64_t stream = 0;
  auto next_seed = [&] { return derive_seed(seed, stream++); };

  if (config.variant == Variant::dncnn_ref) {
    net.first_ = std::make_unique<Conv<T>>("first.conv", ConvSpec{config.input_channels, base, 3},
                                           false, next_seed());
    for (std::size_t i = 0; i + 2 < config.dncnn_depth; ++i)
      net.middle_.push_back(init_conv_layer<T>("middle" + std::to_string(i + 1),
                                               ConvSpec{base, base, 3}, next_seed()));
    net.final_ = std::make_unique<Conv<T>>("final_conv", ConvSpec{base, config.input_channels, 3},
                                           false, next_seed());
  } else {
    const ConvFlavor flavor =
        config.variant == Variant::v2 ? ConvFlavor::separable : ConvFlavor::standard;
    net.first_ =
        init_conv_layer<T>("first", ConvSpec{config.input_channels, base, 3}, next_seed());
    for (std::size_t k = 0; k < config.pairs; ++k) {
      const std::string pair = "pair" + std::to_string(k + 1);
      const DenseBlockSpec block{base, config.growth_rate, config.block_layers, 3, flavor};
      net.blocks_.push_back(std::make_unique<DenseBlock<T>>(pair + ".block", block, next_seed()));
      const TransitionSpec transition{config.transition_in_channels(), base, 1, flavor};
      net.transitions_.push_back(
          std::make_unique<TransitionLayer<T>>(pair + ".transition", transition, next_seed()));
    }
    net.final_ = std::make_unique<Conv<T>>("final_conv", ConvSpec{base, config.input_channels, 3},
                                           true, next_seed());
  }

  net.first_->collect(net.refs_);
  for (std::size_t k = 0; k < net.blocks_.size(); ++k) {
    net.blocks_[k]->collect(net.refs_);
    net.transitions_[k]->collect(net.refs_);
  }
  for (auto& m : net.middle_) m->collect(net.refs_);
  net.final_->collect(net.refs_);
  return net;
}

template <typename T>
void Network<T>::check_input(const Tensor<T>& noisy) const {
  if (noisy.rank() != 4 || noisy.dim(1) != config_.input_channels)
    throw ShapeError("Network: expected [N," + std::to_string(config_.input_channels) +
                     ",H,W] input, got " + to_string(noisy.shape()));
}

template <typename T>
Tensor<T> Network<T>::forward(const Tensor<T>& noisy, Mode mode, const ForwardHooks<T>* hooks) {
  check_input(noisy);
  if (config_.variant == Variant::dncnn_ref) {
    Tensor<T> x = relu(first_->forward(noisy, mode));
    for (auto& m : middle_) x = m->forward(x, mode);
    return final_->forward(x, mode);
  }

  const Tensor<T> f0 = first_->forward(noisy, mode);
  Tensor<T> skip = f0;
  if (hooks && hooks->zero_skip) skip = Tensor<T>::zeros_like(f0);
  Tensor<T> t = f0;
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    Tensor<T> d = blocks_[k]->forward(t, mode);
    Tensor<T> tin = config_.skip_to_transitions ? concat_channels<T>({d, skip}) : d;
    if (hooks && hooks->on_transition_input) hooks->on_transition_input(k, tin);
    t = transitions_[k]->forward(tin, mode);
  }
  return final_->forward(t, mode);
}

template <typename T>
std::vector<Parameter<T>*> Network<T>::parameters() {
  return refs_.parameters;
}

template <typename T>
std::vector<const Parameter<T>*> Network<T>::parameters() const {
  return {refs_.parameters.begin(), refs_.parameters.end()};
}

template <typename T>
std::vector<Buffer<T>*> Network<T>::buffers() {
  return refs_.buffers;
}

template <typename T>
std::vector<const Buffer<T>*> Network<T>::buffers() const {
  return {refs_.buffers.begin(), refs_.buffers.end()};
}

template <typename T>
Parameter<T>& Network<T>::parameter(std::string_view name) {
  for (Parameter<T>* p : refs_.parameters)
    if (p->name() == name) return *p;
  throw ConfigError("no parameter named '" + std::string(name) + "'");
}

template <typename T>
const Parameter<T>& Network<T>::parameter(std::string_view name) const {
  return const_cast<Network*>(this)->parameter(name);
}

template <typename T>
Network<T> Network<T>::clone() const {
  return cast<T>();
}

template <typename T>
template <typename U>
Network<U> Network<T>::cast() const {
  Network<U> out = Network<U>::build(config_, 0);
  out.trained_sigma_ = trained_sigma_;
  for (std::size_t i = 0; i < refs_.parameters.size(); ++i) {
    const Parameter<T>& src = *refs_.parameters[i];
    Parameter<U>& dst = *out.refs_.parameters[i];
    auto from = src.value().data();
    std::copy(from.begin(), from.end(), dst.value().data().begin());
    dst.set_frozen(src.frozen());
  }
  for (std::size_t i = 0; i < refs_.buffers.size(); ++i) {
    auto from = refs_.buffers[i]->value.data();
    std::copy(from.begin(), from.end(), out.refs_.buffers[i]->value.data().begin());
  }
  return out;
}

template <typename T>
void Network<T>::zero_grad() {
  for (Parameter<T>* p : refs_.parameters) p->value().zero_grad();
}

template <typename T>
void Network<T>::set_frozen(const std::function<bool(std::string_view)>& predicate) {
  ddn::set_frozen<T>(std::span<Parameter<T>* const>(refs_.parameters), predicate);
}

template <typename T>
void Network<T>::unfreeze_all() {
  for (Parameter<T>* p : refs_.parameters) p->set_frozen(false);
}

template <typename T>
Network<T> build_dncnn_ref(std::size_t depth, std::size_t width, std::uint64_t seed) {
  ModelConfig c = ModelConfig::preset(Variant::dncnn_ref);
  c.dncnn_depth = depth;
  c.base_channels = width;
  return Network<T>::build(c, seed);
}

template <typename T>
Tensor<T> denoise(Network<T>& net, const Tensor<T>& noisy) {
  NoGradScope<T> no_grad;
  return sub(noisy, net.forward(noisy, Mode::infer));
}

template <typename T>
ParameterCount count_parameters(const Network<T>& net) {
  ParameterCount out;
  for (const Parameter<T>* p : net.parameters()) {
    const std::string& name = p->name();
    const std::string layer = name.substr(0, name.rfind('.'));
    const std::size_t n = p->value().numel();
    if (out.breakdown.empty() || out.breakdown.back().layer != layer)
      out.breakdown.push_back({layer, 0});
    out.breakdown.back().count += n;
    out.total += n;
  }
  return out;
}

template <typename T>
void zero_final_layer(Network<T>& net) {
  for (Parameter<T>* p : net.parameters())
    if (p->name().starts_with(kFinalLayerPrefix))
      std::fill(p->value().data().begin(), p->value().data().end(), T(0));
}

template class Network<float>;
template class Network<double>;
template Network<double> Network<float>::cast<double>() const;
template Network<float> Network<double>::cast<float>() const;
template Network<float> build_dncnn_ref<float>(std::size_t, std::size_t, std::uint64_t);
template Network<double> build_dncnn_ref<double>(std::size_t, std::size_t, std::uint64_t);
template Tensor<float> denoise<float>(Network<float>&, const Tensor<float>&);
template Tensor<double> denoise<double>(Network<double>&, const Tensor<double>&);
template ParameterCount count_parameters<float>(const Network<float>&);
template ParameterCount count_parameters<double>(const Network<double>&);
template void zero_final_layer<float>(Network<float>&);
template void zero_final_layer<double>(Network<double>&);

}  // namespace ddn
