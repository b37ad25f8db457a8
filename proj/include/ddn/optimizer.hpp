#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ddn/layers.hpp"

namespace ddn {

enum class OptimizerKind { adam, sgd_momentum };

OptimizerKind parse_optimizer(std::string_view name);
std::string_view to_string(OptimizerKind k);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double momentum = 0.9;

  void validate() const;
};

/// Adam or SGD with momentum over a fixed parameter registry. State is keyed
/// by parameter name; frozen parameters keep their state untouched.
template <typename T>
class Optimizer {
public:
  Optimizer(OptimizerConfig config, const std::vector<Parameter<T>*>& params);

  /// Applies one update from the accumulated gradients, then clears every
  /// gradient. Throws ConfigError if `params` does not match the registry.
  void step(const std::vector<Parameter<T>*>& params);

  const OptimizerConfig& config() const noexcept { return config_; }
  std::size_t steps() const noexcept { return steps_; }
  /// L2 norm of the most recent parameter update.
  double last_update_norm() const noexcept { return last_update_norm_; }

private:
  struct Slot {
    std::vector<double> m;
    std::vector<double> v;
  };

  OptimizerConfig config_;
  std::map<std::string, Slot, std::less<>> state_;
  std::size_t steps_ = 0;
  double last_update_norm_ = 0.0;
};

extern template class Optimizer<float>;
extern template class Optimizer<double>;

}  // namespace ddn
