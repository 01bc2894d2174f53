#pragma once

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "dcv/errors.hpp"

namespace dcv {

enum class DType : std::uint8_t { f32, f64 };

using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape);
std::string to_string(const Shape& shape);
const char* to_string(DType dtype);

template <typename T>
constexpr DType dtype_of() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  return std::is_same_v<T, float> ? DType::f32 : DType::f64;
}

// Calls `fn` with a value-initialized float or double matching `dtype`.
namespace detail {
// Value-initializes only when asked to, so buffers can be left uninitialized.
template <typename T>
struct DefaultInitAllocator : std::allocator<T> {
  template <typename U>
  struct rebind {
    using other = DefaultInitAllocator<U>;
  };
  using std::allocator<T>::allocator;
  template <typename U>
  void construct(U* p) noexcept(std::is_nothrow_default_constructible_v<U>) {
    ::new (static_cast<void*>(p)) U;
  }
  template <typename U, typename... Args>
  void construct(U* p, Args&&... args) {
    ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
  }
};
template <typename T>
using Buffer = std::vector<T, DefaultInitAllocator<T>>;
}  // namespace detail

template <typename F>
decltype(auto) dispatch(DType dtype, F&& fn) {
  if (dtype == DType::f32) return fn(float{});
  return fn(double{});
}

// Dense row-major N-D array of 32- or 64-bit floats.
//
// Copies share the underlying buffer; the first mutable access on a shared
// buffer detaches it, so a Tensor behaves as an immutable value once handed
// to another owner.
class Tensor {
 public:
  Tensor() = default;
  // Zero-filled tensor.
  explicit Tensor(Shape shape, DType dtype = DType::f64);
  // Uninitialized; for outputs that are fully overwritten.
  static Tensor empty(Shape shape, DType dtype = DType::f64);

  static Tensor full(Shape shape, double value, DType dtype = DType::f64);
  static Tensor from_values(Shape shape, std::span<const double> values,
                            DType dtype = DType::f64);
  static Tensor from_values(Shape shape, std::initializer_list<double> values,
                            DType dtype = DType::f64);
  static Tensor scalar(double value, DType dtype = DType::f64);

  bool defined() const { return f32_ != nullptr || f64_ != nullptr; }
  const Shape& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  // Extent of dimension `d`; negative values count from the back.
  std::int64_t size(int d) const;
  std::int64_t numel() const;
  DType dtype() const { return dtype_; }

  template <typename T>
  std::span<const T> values() const;
  template <typename T>
  std::span<T> mutable_values();

  double at(std::int64_t flat_index) const;
  double at(std::initializer_list<std::int64_t> index) const;
  void set(std::int64_t flat_index, double value);
  void set(std::initializer_list<std::int64_t> index, double value);
  // Value of a single-element tensor.
  double item() const;

  std::vector<double> to_vector() const;
  Tensor to(DType dtype) const;
  // View with a new shape over the same buffer. One extent may be -1.
  Tensor reshape(Shape shape) const;
  Tensor clone() const;

 private:
  std::int64_t flat_index(std::initializer_list<std::int64_t> index) const;

  Shape shape_;
  DType dtype_ = DType::f64;
  std::shared_ptr<detail::Buffer<float>> f32_;
  std::shared_ptr<detail::Buffer<double>> f64_;
};

template <>
std::span<const float> Tensor::values<float>() const;
template <>
std::span<const double> Tensor::values<double>() const;
template <>
std::span<float> Tensor::mutable_values<float>();
template <>
std::span<double> Tensor::mutable_values<double>();

// Largest absolute elementwise difference; shapes must match.
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace dcv
