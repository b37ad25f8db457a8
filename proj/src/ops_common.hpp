#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ddn/ops.hpp"

namespace ddn::detail {

/// Tape that should receive a record for an op over `inputs`, or nullptr.
template <typename T>
Tape<T>* recording_tape(std::initializer_list<const Tensor<T>*> inputs) {
  Tape<T>* tape = active_tape<T>();
  if (!tape) return nullptr;
  for (const Tensor<T>* t : inputs)
    if (t && t->defined() && t->requires_grad()) return tape;
  return nullptr;
}

template <typename T>
void verify_finite(const char* op, const Tensor<T>& out) {
  if (check_finite_enabled() && !all_finite<T>(out.data()))
    throw NumericError(std::string(op) + ": produced a non-finite value");
}

template <typename T, typename Fn>
void attach(Tape<T>* tape, const char* op, std::vector<Tensor<T>> inputs, Tensor<T>& out, Fn&& fn) {
  if (!tape) return;
  out.set_requires_grad(true);
  tape->record(op, std::move(inputs), out, std::forward<Fn>(fn));
}

inline void require_rank4(const char* op, const char* what, const Shape& s) {
  if (s.size() != 4)
    throw ShapeError(std::string(op) + ": " + what + " must be 4-D [N,C,H,W], got " + to_string(s));
}

}  // namespace ddn::detail
