#include "ddn/optimizer.hpp"

#include <cmath>

namespace ddn {

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "sgd" || name == "sgd_momentum") return OptimizerKind::sgd_momentum;
  throw ConfigError("unknown optimizer '" + std::string(name) + "' (expected adam or sgd_momentum)");
}

std::string_view to_string(OptimizerKind k) {
  return k == OptimizerKind::adam ? "adam" : "sgd_momentum";
}

void OptimizerConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("optimizer: learning_rate must be finite and non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("optimizer: betas must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("optimizer: epsilon must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("optimizer: momentum must lie in [0, 1)");
}

template <typename T>
Optimizer<T>::Optimizer(OptimizerConfig config, const std::vector<Parameter<T>*>& params)
    : config_(config) {
  config_.validate();
  for (const Parameter<T>* p : params) {
    const std::size_t n = p->value().numel();
    Slot slot;
    slot.m.assign(n, 0.0);
    if (config_.kind == OptimizerKind::adam) slot.v.assign(n, 0.0);
    if (!state_.emplace(p->name(), std::move(slot)).second)
      throw ConfigError("optimizer: duplicate parameter name '" + p->name() + "'");
  }
}

template <typename T>
void Optimizer<T>::step(const std::vector<Parameter<T>*>& params) {
  if (params.size() != state_.size())
    throw ConfigError("optimizer: registry holds " + std::to_string(state_.size()) +
                      " parameters, step received " + std::to_string(params.size()));
  for (const Parameter<T>* p : params) {
    auto it = state_.find(p->name());
    if (it == state_.end() || it->second.m.size() != p->value().numel())
      throw ConfigError("optimizer: parameter '" + p->name() + "' does not match the registry");
  }

  ++steps_;
  const double lr = config_.learning_rate;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double bias1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double bias2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  double update_sq = 0.0;

  for (Parameter<T>* p : params) {
    Tensor<T>& value = p->value();
    if (p->frozen() || !value.has_grad()) {
      value.drop_grad();
      continue;
    }
    Slot& slot = state_.find(p->name())->second;
    T* w = value.ptr();
    const T* g = std::as_const(value).grad().data();
    for (std::size_t i = 0; i < slot.m.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      double delta;
      if (config_.kind == OptimizerKind::adam) {
        slot.m[i] = b1 * slot.m[i] + (1.0 - b1) * gi;
        slot.v[i] = b2 * slot.v[i] + (1.0 - b2) * gi * gi;
        const double m_hat = slot.m[i] / bias1;
        const double v_hat = slot.v[i] / bias2;
        delta = lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
      } else {
        slot.m[i] = config_.momentum * slot.m[i] + gi;
        delta = lr * slot.m[i];
      }
      if (delta != 0.0) w[i] = static_cast<T>(static_cast<double>(w[i]) - delta);
      update_sq += delta * delta;
    }
    value.drop_grad();
  }
  last_update_norm_ = std::sqrt(update_sq);
}

template class Optimizer<float>;
template class Optimizer<double>;

}  // namespace ddn
