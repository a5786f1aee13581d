#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "ignet/errors.hpp"

namespace ignet {

using index_t = std::int64_t;
using Shape = std::vector<index_t>;

inline index_t numel_of(const Shape& shape) {
  index_t n = 1;
  for (index_t d : shape) n *= d;
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << "]";
  return os.str();
}

// Dense row-major N-D array. Shape conventions used throughout:
// image [H,W] or [1,H,W], feature map [C,H,W], batch [N,C,H,W],
// conv kernel [C_out,C_in,k,k]. Treated as an immutable value once built;
// the few mutating call sites (optimizer, BN running stats) own their
// tensors exclusively.
template <class T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    validate_shape();
    data_.assign(static_cast<std::size_t>(numel_of(shape_)), T(0));
  }

  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape();
    if (static_cast<index_t>(data_.size()) != numel_of(shape_))
      throw ShapeError("tensor data size " + std::to_string(data_.size()) +
                       " does not match shape " + shape_str(shape_));
  }

  static Tensor full(Shape shape, T v) {
    Tensor t(std::move(shape));
    for (auto& x : t.data_) x = v;
    return t;
  }
  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor ones(Shape shape) { return full(std::move(shape), T(1)); }
  static Tensor scalar(T v) { return Tensor({1}, {v}); }

  const Shape& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  index_t dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  index_t numel() const { return static_cast<index_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  T& operator[](index_t i) { return data_[static_cast<std::size_t>(i)]; }
  const T& operator[](index_t i) const { return data_[static_cast<std::size_t>(i)]; }

  // 4-D accessor for [N,C,H,W] tensors.
  T& at4(index_t n, index_t c, index_t y, index_t x) {
    return data_[static_cast<std::size_t>(((n * dim(1) + c) * dim(2) + y) * dim(3) + x)];
  }
  const T& at4(index_t n, index_t c, index_t y, index_t x) const {
    return data_[static_cast<std::size_t>(((n * dim(1) + c) * dim(2) + y) * dim(3) + x)];
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  Tensor<T> reshaped(Shape new_shape) const {
    if (numel_of(new_shape) != numel())
      throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(new_shape));
    return Tensor<T>(std::move(new_shape), data_);
  }

  template <class U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return Tensor<U>(shape_, std::move(out));
  }

  bool all_finite() const {
    for (const T& x : data_)
      if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
  }

 private:
  void validate_shape() const {
    // Zero-size dims are legal (empty tensor); negatives are not.
    for (index_t d : shape_)
      if (d < 0) throw ShapeError("negative dimension in shape " + shape_str(shape_));
  }

  Shape shape_;
  std::vector<T> data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

template <class T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
}

// Debug/test-build finiteness gate; forward ops call this on their output.
template <class T>
inline void check_finite(const Tensor<T>& t, const char* what) {
#if defined(IGNET_CHECK_FINITE)
  if (!t.all_finite()) throw ValueError(std::string(what) + ": non-finite value produced");
#else
  (void)t;
  (void)what;
#endif
}

template <class T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0;
  for (index_t i = 0; i < a.numel(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  return m;
}

template <class T>
double sum_squares(const Tensor<T>& t) {
  double s = 0;
  for (index_t i = 0; i < t.numel(); ++i) {
    double v = static_cast<double>(t[i]);
    s += v * v;
  }
  return s;
}

}  // namespace ignet
