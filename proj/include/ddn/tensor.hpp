#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "ddn/error.hpp"

namespace ddn {

std::size_t shape_numel(const Shape& shape);

/// Dense row-major array with an optional gradient buffer.
///
/// Tensor is a handle: copies share storage, the way autograd frameworks
/// share leaves between the model and the tape. Use clone() for an
/// independent copy. 4-D data follows the N x C x H x W convention.
/// Instantiated for float (training) and double (verification).
template <typename T>
class Tensor {
public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> values);

  static Tensor scalar(T value) { return Tensor(Shape{}, std::vector<T>{value}); }
  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape()); }

  bool defined() const noexcept { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<T> data();
  std::span<const T> data() const;
  T* ptr() { return data().data(); }
  const T* ptr() const { return data().data(); }
  T item() const;

  T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w);
  T at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const;

  bool requires_grad() const;
  void set_requires_grad(bool on);

  bool has_grad() const;
  /// Gradient buffer, allocated zero-filled on first access.
  std::span<T> grad();
  /// Read-only gradient; throws if none has been accumulated.
  std::span<const T> grad() const;
  void zero_grad();
  void drop_grad();

  /// Deep copy of the values; the copy has no gradient and does not require one.
  Tensor clone() const;
  bool shares_storage_with(const Tensor& other) const noexcept { return impl_ == other.impl_; }

  template <typename U>
  Tensor<U> cast() const;

private:
  struct Impl {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;
    bool requires_grad = false;
  };

  Impl& impl() const;

  std::shared_ptr<Impl> impl_;
};

template <typename T>
template <typename U>
Tensor<U> Tensor<T>::cast() const {
  const auto src = data();
  std::vector<U> out(src.begin(), src.end());
  return Tensor<U>(shape(), std::move(out));
}

/// True when every element is finite.
template <typename T>
bool all_finite(std::span<const T> values);

/// Bit-level equality of shape and values.
template <typename T>
bool identical(const Tensor<T>& a, const Tensor<T>& b);

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace ddn
