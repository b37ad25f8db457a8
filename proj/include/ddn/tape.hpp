#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ddn/tensor.hpp"

namespace ddn {

/// Record-on-execute autodiff tape.
///
/// Operations append a record whenever a tape is active on the calling
/// thread and at least one input requires a gradient. backward() replays the
/// records in reverse, and each rule accumulates into the gradient buffers of
/// its inputs, so a tensor used k times receives k contributions.
template <typename T>
class Tape {
public:
  using BackwardFn = std::function<void()>;

  struct Record {
    std::string op;
    std::vector<Tensor<T>> inputs;
    Tensor<T> output;
    BackwardFn backward;
  };

  void record(std::string op, std::vector<Tensor<T>> inputs, Tensor<T> output, BackwardFn fn);

  /// Seeds d(loss)/d(loss) = 1 and propagates to every reachable tensor that
  /// requires a gradient. Gradients accumulate; zero them between steps.
  void backward(Tensor<T> loss);

  void reset() { records_.clear(); }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  const Record& at(std::size_t i) const { return records_.at(i); }

private:
  std::vector<Record> records_;
};

/// Tape active on this thread, or nullptr.
template <typename T>
Tape<T>* active_tape();

/// Activates a tape on the current thread for the lifetime of the scope.
template <typename T>
class TapeScope {
public:
  explicit TapeScope(Tape<T>& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

private:
  Tape<T>* previous_;
};

/// Suspends recording on the current thread (inference, finite differences).
template <typename T>
class NoGradScope {
public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

private:
  Tape<T>* previous_;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace ddn
