#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mspc/error.hpp"

namespace mspc {

using Shape = std::vector<int64_t>;

std::string shape_str(const Shape& shape);
int64_t shape_numel(const Shape& shape);

/// Dense row-major array of scalars. Plain value type: copies are deep and
/// nothing here knows about gradients (see Tape for that).
template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> data);

  static Tensor scalar(T v) { return Tensor(Shape{}, std::vector<T>{v}); }

  const Shape& shape() const noexcept { return shape_; }
  int rank() const noexcept { return static_cast<int>(shape_.size()); }
  int64_t dim(int axis) const;
  size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  T* ptr() noexcept { return data_.data(); }
  const T* ptr() const noexcept { return data_.data(); }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  T& operator[](size_t i) noexcept { return data_[i]; }
  const T& operator[](size_t i) const noexcept { return data_[i]; }

  /// Value of a single-element tensor.
  T item() const;

  Tensor reshaped(Shape shape) const;
  void fill(T v);

  /// Elementwise accumulate; shapes must match.
  Tensor& operator+=(const Tensor& other);

  bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }

  template <class U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

/// Stack equally shaped tensors along a new leading axis.
template <class T>
Tensor<T> stack(std::span<const Tensor<T>> items);

/// Slice `count` entries of the leading axis starting at `first`.
template <class T>
Tensor<T> slice_leading(const Tensor<T>& t, int64_t first, int64_t count);

/// Entry `index` of the leading axis, with that axis removed.
template <class T>
Tensor<T> select_leading(const Tensor<T>& t, int64_t index);

template <class T>
bool all_finite(const Tensor<T>& t);

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace mspc
