#include <atomic>
#include <cmath>

#include "ops_common.hpp"

namespace ddn {

namespace {
std::atomic<bool> g_check_finite{true};

template <typename T>
void require_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) throw ShapeError(op, "operand shapes differ", a.shape(), b.shape());
}
}  // namespace

void set_check_finite(bool on) { g_check_finite = on; }
bool check_finite_enabled() { return g_check_finite.load(); }

namespace {
thread_local KinkFingerprint* t_fingerprint = nullptr;

template <typename T>
void fold_signs(std::span<const T> values) {
  if (!t_fingerprint) return;
  for (T v : values) t_fingerprint->fold(v > T(0));
}
}  // namespace

KinkFingerprint::KinkFingerprint() {
  if (t_fingerprint) throw ConfigError("KinkFingerprint: scopes do not nest");
  t_fingerprint = this;
}

KinkFingerprint::~KinkFingerprint() { t_fingerprint = nullptr; }

void KinkFingerprint::fold(bool positive) noexcept {
  hash_ = (hash_ ^ (positive ? 0x9eU : 0x61U)) * 0x100000001b3ULL;
}

using detail::attach;
using detail::recording_tape;
using detail::verify_finite;

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("add", a, b);
  Tensor<T> out(a.shape());
  auto pa = a.data(), pb = b.data();
  auto po = out.data();
  for (std::size_t i = 0; i < po.size(); ++i) po[i] = pa[i] + pb[i];
  verify_finite("add", out);
  attach(recording_tape<T>({&a, &b}), "add", {a, b}, out, [a = a, b = b, out]() mutable {
    auto g = std::as_const(out).grad();
    if (a.requires_grad()) {
      auto ga = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (b.requires_grad()) {
      auto gb = b.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
    }
  });
  return out;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("sub", a, b);
  Tensor<T> out(a.shape());
  auto pa = a.data(), pb = b.data();
  auto po = out.data();
  for (std::size_t i = 0; i < po.size(); ++i) po[i] = pa[i] - pb[i];
  verify_finite("sub", out);
  attach(recording_tape<T>({&a, &b}), "sub", {a, b}, out, [a = a, b = b, out]() mutable {
    auto g = std::as_const(out).grad();
    if (a.requires_grad()) {
      auto ga = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (b.requires_grad()) {
      auto gb = b.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("mul", a, b);
  Tensor<T> out(a.shape());
  auto pa = a.data(), pb = b.data();
  auto po = out.data();
  for (std::size_t i = 0; i < po.size(); ++i) po[i] = pa[i] * pb[i];
  verify_finite("mul", out);
  attach(recording_tape<T>({&a, &b}), "mul", {a, b}, out, [a = a, b = b, out]() mutable {
    auto g = std::as_const(out).grad();
    auto va = std::as_const(a).data(), vb = std::as_const(b).data();
    if (a.requires_grad()) {
      auto ga = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[i];
    }
    if (b.requires_grad()) {
      auto gb = b.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
    }
  });
  return out;
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("div", a, b);
  Tensor<T> out(a.shape());
  auto pa = a.data(), pb = b.data();
  auto po = out.data();
  for (std::size_t i = 0; i < po.size(); ++i) po[i] = pa[i] / pb[i];
  verify_finite("div", out);
  attach(recording_tape<T>({&a, &b}), "div", {a, b}, out, [a = a, b = b, out]() mutable {
    auto g = std::as_const(out).grad();
    auto vb = std::as_const(b).data();
    auto vo = std::as_const(out).data();
    if (a.requires_grad()) {
      auto ga = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / vb[i];
    }
    if (b.requires_grad()) {
      auto gb = b.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i] * vo[i] / vb[i];
    }
  });
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
  Tensor<T> out(a.shape());
  auto pa = a.data();
  auto po = out.data();
  for (std::size_t i = 0; i < po.size(); ++i) po[i] = pa[i] * s;
  verify_finite("scale", out);
  attach(recording_tape<T>({&a}), "scale", {a}, out, [a = a, out, s]() mutable {
    auto g = std::as_const(out).grad();
    auto ga = a.grad();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
  });
  return out;
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T s) {
  Tensor<T> out(a.shape());
  auto pa = a.data();
  auto po = out.data();
  for (std::size_t i = 0; i < po.size(); ++i) po[i] = pa[i] + s;
  verify_finite("add_scalar", out);
  attach(recording_tape<T>({&a}), "add_scalar", {a}, out, [a = a, out]() mutable {
    auto g = std::as_const(out).grad();
    auto ga = a.grad();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
  return out;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  Tensor<T> out(a.shape());
  auto pa = a.data();
  auto po = out.data();
  for (std::size_t i = 0; i < po.size(); ++i) po[i] = pa[i] > T(0) ? pa[i] : T(0);
  fold_signs<T>(pa);
  verify_finite("relu", out);
  attach(recording_tape<T>({&a}), "relu", {a}, out, [a = a, out]() mutable {
    auto g = std::as_const(out).grad();
    auto vo = std::as_const(out).data();
    auto ga = a.grad();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (vo[i] > T(0)) ga[i] += g[i];
  });
  return out;
}

template <typename T>
Tensor<T> square(const Tensor<T>& a) {
  Tensor<T> out(a.shape());
  auto pa = a.data();
  auto po = out.data();
  for (std::size_t i = 0; i < po.size(); ++i) po[i] = pa[i] * pa[i];
  verify_finite("square", out);
  attach(recording_tape<T>({&a}), "square", {a}, out, [a = a, out]() mutable {
    auto g = std::as_const(out).grad();
    auto va = std::as_const(a).data();
    auto ga = a.grad();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += T(2) * va[i] * g[i];
  });
  return out;
}

template <typename T>
Tensor<T> pow_positive(const Tensor<T>& a, T p) {
  Tensor<T> out(a.shape());
  auto pa = a.data();
  auto po = out.data();
  for (std::size_t i = 0; i < po.size(); ++i) po[i] = pa[i] > T(0) ? std::pow(pa[i], p) : T(0);
  fold_signs<T>(pa);
  verify_finite("pow_positive", out);
  attach(recording_tape<T>({&a}), "pow_positive", {a}, out, [a = a, out, p]() mutable {
    auto g = std::as_const(out).grad();
    auto va = std::as_const(a).data();
    auto vo = std::as_const(out).data();
    auto ga = a.grad();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (va[i] > T(0)) ga[i] += g[i] * p * vo[i] / va[i];
  });
  return out;
}

template <typename T>
Tensor<T> elementwise(ElementwiseOp op, const Tensor<T>& a, const Tensor<T>& b) {
  switch (op) {
    case ElementwiseOp::add: return add(a, b);
    case ElementwiseOp::sub: return sub(a, b);
    case ElementwiseOp::mul: return mul(a, b);
    case ElementwiseOp::scalar_mul: return scale(a, b.item());
    case ElementwiseOp::relu: return relu(a);
    case ElementwiseOp::square: return square(a);
  }
  throw ConfigError("elementwise: unknown op");
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  double acc = 0.0;
  for (T v : a.data()) acc += static_cast<double>(v);
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc));
  verify_finite("sum", out);
  attach(recording_tape<T>({&a}), "sum", {a}, out, [a = a, out]() mutable {
    const T g = std::as_const(out).grad()[0];
    for (T& v : a.grad()) v += g;
  });
  return out;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  double acc = 0.0;
  for (T v : a.data()) acc += static_cast<double>(v);
  const std::size_t n = a.numel();
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc / static_cast<double>(n)));
  verify_finite("mean", out);
  attach(recording_tape<T>({&a}), "mean", {a}, out, [a = a, out, n]() mutable {
    const T g = std::as_const(out).grad()[0] / static_cast<T>(n);
    for (T& v : a.grad()) v += g;
  });
  return out;
}

template <typename T>
Tensor<T> mean_per_sample(const Tensor<T>& a) {
  if (a.rank() < 1) throw ShapeError("mean_per_sample: input must have a leading batch axis");
  const std::size_t n = a.dim(0);
  const std::size_t per = a.numel() / n;
  Tensor<T> out(Shape{n});
  auto pa = a.data();
  for (std::size_t s = 0; s < n; ++s) {
    double acc = 0.0;
    for (std::size_t i = 0; i < per; ++i) acc += static_cast<double>(pa[s * per + i]);
    out.data()[s] = static_cast<T>(acc / static_cast<double>(per));
  }
  verify_finite("mean_per_sample", out);
  attach(recording_tape<T>({&a}), "mean_per_sample", {a}, out, [a = a, out, n, per]() mutable {
    auto g = std::as_const(out).grad();
    auto ga = a.grad();
    for (std::size_t s = 0; s < n; ++s) {
      const T gs = g[s] / static_cast<T>(per);
      for (std::size_t i = 0; i < per; ++i) ga[s * per + i] += gs;
    }
  });
  return out;
}

#define DDN_INSTANTIATE(T)                                                        \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                     \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                     \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                     \
  template Tensor<T> div(const Tensor<T>&, const Tensor<T>&);                     \
  template Tensor<T> scale(const Tensor<T>&, T);                                  \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                             \
  template Tensor<T> relu(const Tensor<T>&);                                      \
  template Tensor<T> square(const Tensor<T>&);                                    \
  template Tensor<T> pow_positive(const Tensor<T>&, T);                           \
  template Tensor<T> elementwise(ElementwiseOp, const Tensor<T>&, const Tensor<T>&); \
  template Tensor<T> sum(const Tensor<T>&);                                       \
  template Tensor<T> mean(const Tensor<T>&);                                      \
  template Tensor<T> mean_per_sample(const Tensor<T>&);

DDN_INSTANTIATE(float)
DDN_INSTANTIATE(double)
#undef DDN_INSTANTIATE

}  // namespace ddn
