#include "ddn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace ddn {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : impl_(std::make_shared<Impl>()) {
  for (std::size_t e : shape)
    if (e == 0) throw ShapeError("Tensor: extents must be positive, got " + to_string(shape));
  impl_->data.assign(shape_numel(shape), fill);
  impl_->shape = std::move(shape);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) : impl_(std::make_shared<Impl>()) {
  for (std::size_t e : shape)
    if (e == 0) throw ShapeError("Tensor: extents must be positive, got " + to_string(shape));
  if (shape_numel(shape) != values.size())
    throw ShapeError("Tensor: shape " + to_string(shape) + " needs " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  impl_->shape = std::move(shape);
  impl_->data = std::move(values);
}

template <typename T>
typename Tensor<T>::Impl& Tensor<T>::impl() const {
  if (!impl_) throw Error("Tensor: use of undefined tensor");
  return *impl_;
}

template <typename T>
const Shape& Tensor<T>::shape() const {
  return impl().shape;
}

template <typename T>
std::size_t Tensor<T>::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size())
    throw ShapeError("Tensor::dim: axis " + std::to_string(axis) + " out of range for " +
                     to_string(s));
  return s[axis];
}

template <typename T>
std::size_t Tensor<T>::numel() const {
  return impl().data.size();
}

template <typename T>
std::span<T> Tensor<T>::data() {
  return impl().data;
}

template <typename T>
std::span<const T> Tensor<T>::data() const {
  return impl().data;
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw ShapeError("Tensor::item: tensor is not a scalar, shape " + to_string(shape()));
  return impl().data[0];
}

template <typename T>
T& Tensor<T>::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
  const Shape& s = shape();
  return impl().data[((n * s[1] + c) * s[2] + h) * s[3] + w];
}

template <typename T>
T Tensor<T>::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
  const Shape& s = shape();
  return impl().data[((n * s[1] + c) * s[2] + h) * s[3] + w];
}

template <typename T>
bool Tensor<T>::requires_grad() const {
  return impl_ && impl_->requires_grad;
}

template <typename T>
void Tensor<T>::set_requires_grad(bool on) {
  impl().requires_grad = on;
}

template <typename T>
bool Tensor<T>::has_grad() const {
  return impl_ && !impl_->grad.empty();
}

template <typename T>
std::span<T> Tensor<T>::grad() {
  Impl& i = impl();
  if (i.grad.empty()) i.grad.assign(i.data.size(), T(0));
  return i.grad;
}

template <typename T>
std::span<const T> Tensor<T>::grad() const {
  if (!has_grad()) throw Error("Tensor::grad: no gradient has been accumulated");
  return impl_->grad;
}

template <typename T>
void Tensor<T>::zero_grad() {
  if (impl_) std::fill(impl_->grad.begin(), impl_->grad.end(), T(0));
}

template <typename T>
void Tensor<T>::drop_grad() {
  if (impl_) {
    impl_->grad.clear();
    impl_->grad.shrink_to_fit();
  }
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  return Tensor(shape(), impl().data);
}

template <typename T>
bool all_finite(std::span<const T> values) {
  return std::all_of(values.begin(), values.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
bool identical(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) return false;
  return std::memcmp(a.ptr(), b.ptr(), a.numel() * sizeof(T)) == 0;
}

template class Tensor<float>;
template class Tensor<double>;
template bool all_finite<float>(std::span<const float>);
template bool all_finite<double>(std::span<const double>);
template bool identical<float>(const Tensor<float>&, const Tensor<float>&);
template bool identical<double>(const Tensor<double>&, const Tensor<double>&);

}  // namespace ddn
