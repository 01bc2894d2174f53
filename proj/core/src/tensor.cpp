#include "dcv/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dcv {

std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

const char* to_string(DType dtype) { return dtype == DType::f32 ? "f32" : "f64"; }

namespace {

void check_shape(const Shape& shape) {
  for (auto e : shape) {
    if (e < 1) throw ShapeError("tensor extents must be >= 1, got " + to_string(shape));
  }
}

}  // namespace

Tensor::Tensor(Shape shape, DType dtype) : shape_(std::move(shape)), dtype_(dtype) {
  check_shape(shape_);
  const auto n = static_cast<std::size_t>(dcv::numel(shape_));
  if (dtype_ == DType::f32) {
    f32_ = std::make_shared<detail::Buffer<float>>(n, 0.0f);
  } else {
    f64_ = std::make_shared<detail::Buffer<double>>(n, 0.0);
  }
}

Tensor Tensor::empty(Shape shape, DType dtype) {
  check_shape(shape);
  Tensor t;
  const auto n = static_cast<std::size_t>(dcv::numel(shape));
  t.shape_ = std::move(shape);
  t.dtype_ = dtype;
  if (dtype == DType::f32) {
    t.f32_ = std::make_shared<detail::Buffer<float>>(n);
  } else {
    t.f64_ = std::make_shared<detail::Buffer<double>>(n);
  }
  return t;
}

Tensor Tensor::full(Shape shape, double value, DType dtype) {
  Tensor t(std::move(shape), dtype);
  dispatch(dtype, [&](auto tag) {
    using T = decltype(tag);
    auto v = t.mutable_values<T>();
    std::fill(v.begin(), v.end(), static_cast<T>(value));
  });
  return t;
}

Tensor Tensor::from_values(Shape shape, std::span<const double> values, DType dtype) {
  Tensor t(std::move(shape), dtype);
  if (static_cast<std::int64_t>(values.size()) != t.numel()) {
    throw ShapeError("from_values: " + std::to_string(values.size()) +
                     " values for shape " + to_string(t.shape()));
  }
  dispatch(dtype, [&](auto tag) {
    using T = decltype(tag);
    auto v = t.mutable_values<T>();
    std::transform(values.begin(), values.end(), v.begin(),
                   [](double x) { return static_cast<T>(x); });
  });
  return t;
}

Tensor Tensor::from_values(Shape shape, std::initializer_list<double> values, DType dtype) {
  return from_values(std::move(shape), std::span<const double>(values.begin(), values.size()),
                     dtype);
}

Tensor Tensor::scalar(double value, DType dtype) { return full(Shape{1}, value, dtype); }

std::int64_t Tensor::size(int d) const {
  const int n = ndim();
  if (d < 0) d += n;
  if (d < 0 || d >= n) {
    throw ShapeError("dimension " + std::to_string(d) + " out of range for " + to_string(shape_));
  }
  return shape_[static_cast<std::size_t>(d)];
}

std::int64_t Tensor::numel() const { return defined() ? dcv::numel(shape_) : 0; }

template <>
std::span<const float> Tensor::values<float>() const {
  if (!f32_) throw UsageError(std::string("tensor is not f32 (dtype ") + to_string(dtype_) + ")");
  return {f32_->data(), f32_->size()};
}

template <>
std::span<const double> Tensor::values<double>() const {
  if (!f64_) throw UsageError(std::string("tensor is not f64 (dtype ") + to_string(dtype_) + ")");
  return {f64_->data(), f64_->size()};
}

template <>
std::span<float> Tensor::mutable_values<float>() {
  if (!f32_) throw UsageError("tensor is not f32");
  if (f32_.use_count() > 1) f32_ = std::make_shared<detail::Buffer<float>>(*f32_);
  return {f32_->data(), f32_->size()};
}

template <>
std::span<double> Tensor::mutable_values<double>() {
  if (!f64_) throw UsageError("tensor is not f64");
  if (f64_.use_count() > 1) f64_ = std::make_shared<detail::Buffer<double>>(*f64_);
  return {f64_->data(), f64_->size()};
}

double Tensor::at(std::int64_t i) const {
  if (i < 0 || i >= numel()) throw ShapeError("flat index out of range");
  return f32_ ? static_cast<double>((*f32_)[static_cast<std::size_t>(i)])
              : (*f64_)[static_cast<std::size_t>(i)];
}

std::int64_t Tensor::flat_index(std::initializer_list<std::int64_t> index) const {
  if (static_cast<int>(index.size()) != ndim()) {
    throw ShapeError("index rank " + std::to_string(index.size()) + " does not match " +
                     to_string(shape_));
  }
  std::int64_t flat = 0;
  std::size_t d = 0;
  for (auto i : index) {
    if (i < 0 || i >= shape_[d]) throw ShapeError("index out of range for " + to_string(shape_));
    flat = flat * shape_[d] + i;
    ++d;
  }
  return flat;
}

double Tensor::at(std::initializer_list<std::int64_t> index) const { return at(flat_index(index)); }

void Tensor::set(std::int64_t i, double value) {
  if (i < 0 || i >= numel()) throw ShapeError("flat index out of range");
  dispatch(dtype_, [&](auto tag) {
    using T = decltype(tag);
    mutable_values<T>()[static_cast<std::size_t>(i)] = static_cast<T>(value);
  });
}

void Tensor::set(std::initializer_list<std::int64_t> index, double value) {
  set(flat_index(index), value);
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() requires a single-element tensor, got " + to_string(shape_));
  return at(0);
}

std::vector<double> Tensor::to_vector() const {
  if (f64_) return {f64_->begin(), f64_->end()};
  if (f32_) return {f32_->begin(), f32_->end()};
  return {};
}

Tensor Tensor::to(DType dtype) const {
  if (dtype == dtype_ || !defined()) return *this;
  Tensor out(shape_, dtype);
  if (dtype == DType::f32) {
    auto dst = out.mutable_values<float>();
    std::transform(f64_->begin(), f64_->end(), dst.begin(),
                   [](double x) { return static_cast<float>(x); });
  } else {
    auto dst = out.mutable_values<double>();
    std::copy(f32_->begin(), f32_->end(), dst.begin());
  }
  return out;
}

Tensor Tensor::reshape(Shape shape) const {
  std::int64_t known = 1;
  int infer = -1;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (shape[i] == -1) {
      if (infer >= 0) throw ShapeError("reshape: more than one -1 extent");
      infer = static_cast<int>(i);
    } else {
      known *= shape[i];
    }
  }
  if (infer >= 0 && known > 0) shape[static_cast<std::size_t>(infer)] = numel() / known;
  check_shape(shape);
  if (dcv::numel(shape) != numel()) {
    throw ShapeError("reshape: " + to_string(shape_) + " -> " + to_string(shape));
  }
  Tensor out = *this;
  out.shape_ = std::move(shape);
  return out;
}

Tensor Tensor::clone() const {
  Tensor out = *this;
  if (f32_) out.f32_ = std::make_shared<detail::Buffer<float>>(*f32_);
  if (f64_) out.f64_ = std::make_shared<detail::Buffer<double>>(*f64_);
  return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("max_abs_diff: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  double m = 0.0;
  const auto n = a.numel();
  for (std::int64_t i = 0; i < n; ++i) {
    const double d = std::abs(a.at(i) - b.at(i));
    if (std::isnan(d)) return d;
    m = std::max(m, d);
  }
  return m;
}

}  // namespace dcv
