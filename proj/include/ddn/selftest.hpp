#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ddn/loss.hpp"
#include "ddn/model.hpp"

namespace ddn {

using ConvFn = std::function<Tensor<double>(const Tensor<double>& input, const Tensor<double>& weight,
                                            const Tensor<double>& bias, std::size_t padding)>;

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct SelftestOptions {
  /// Convolution under test; the default is the library's conv2d.
  ConvFn conv;
  std::size_t conv_instances = 100;
  std::uint64_t seed = 1234;
};

/// Straightforward nested-loop cross-correlation used as the reference.
Tensor<double> direct_conv2d(const Tensor<double>& input, const Tensor<double>& weight,
                             const Tensor<double>& bias, std::size_t padding);

/// Largest absolute deviation between `conv` and direct_conv2d over random
/// instances with N, C, H, W at most 4, 4, 8, 8.
double conv_oracle_max_error(const ConvFn& conv, std::size_t instances, std::uint64_t seed);

/// Worst relative error between backpropagated and central-difference
/// gradients over every parameter scalar of `net`.
///
/// A central difference is only meaningful when both stencil points lie on
/// the same smooth piece as the base point. When a ReLU (or the clamp inside
/// MS-SSIM) changes side within +-step, the step is divided by 10 until it
/// no longer does, at most four times; such scalars are counted in
/// `reduced_step`.
struct GradientCheck {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t reduced_step = 0;
  double smallest_step = 0.0;
  std::string worst_parameter;
};

GradientCheck gradient_check(Network<double>& net, LossKind kind, const Tensor<double>& clean,
                             const Tensor<double>& noisy, double step = 1e-4);

std::vector<CheckResult> run_selftest(const SelftestOptions& options = {});

}  // namespace ddn
