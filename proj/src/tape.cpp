#include "ddn/tape.hpp"

#include <cmath>

namespace ddn {

namespace {
template <typename T>
Tape<T>*& tape_slot() {
  thread_local Tape<T>* slot = nullptr;
  return slot;
}
}  // namespace

template <typename T>
Tape<T>* active_tape() {
  return tape_slot<T>();
}

template <typename T>
TapeScope<T>::TapeScope(Tape<T>& tape) : previous_(tape_slot<T>()) {
  tape_slot<T>() = &tape;
}

template <typename T>
TapeScope<T>::~TapeScope() {
  tape_slot<T>() = previous_;
}

template <typename T>
NoGradScope<T>::NoGradScope() : previous_(tape_slot<T>()) {
  tape_slot<T>() = nullptr;
}

template <typename T>
NoGradScope<T>::~NoGradScope() {
  tape_slot<T>() = previous_;
}

template <typename T>
void Tape<T>::record(std::string op, std::vector<Tensor<T>> inputs, Tensor<T> output,
                     BackwardFn fn) {
  records_.push_back(Record{std::move(op), std::move(inputs), std::move(output), std::move(fn)});
}

template <typename T>
void Tape<T>::backward(Tensor<T> loss) {
  if (!loss.defined() || loss.numel() != 1)
    throw ShapeError("backward: loss must be a scalar, got shape " +
                     (loss.defined() ? to_string(loss.shape()) : std::string("<undefined>")));
  if (records_.empty()) throw Error("backward: tape is empty; nothing was recorded");
  if (!std::isfinite(loss.item())) throw NumericError("backward: loss is not finite");
  if (!loss.requires_grad()) throw Error("backward: loss does not depend on any tensor requiring grad");

  loss.grad()[0] += T(1);
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    if (!it->output.has_grad()) continue;
    it->backward();
  }
}

template class Tape<float>;
template class Tape<double>;
template class TapeScope<float>;
template class TapeScope<double>;
template class NoGradScope<float>;
template class NoGradScope<double>;
template Tape<float>* active_tape<float>();
template Tape<double>* active_tape<double>();

}  // namespace ddn
