#include "mspc/tensor.hpp"

#include <cmath>
#include <sstream>

namespace mspc {

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (auto e : shape) {
    MSPC_REQUIRE(e > 0, "tensor extents must be positive, got " + shape_str(shape));
    n *= e;
  }
  return n;
}

template <class T>
Tensor<T>::Tensor(Shape shape, T fill)
    : shape_(std::move(shape)), data_(static_cast<size_t>(shape_numel(shape_)), fill) {}

template <class T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
  MSPC_REQUIRE(static_cast<int64_t>(data_.size()) == shape_numel(shape_),
               "data length " + std::to_string(data_.size()) + " does not match shape " + shape_str(shape_));
}

template <class T>
int64_t Tensor<T>::dim(int axis) const {
  if (axis < 0) axis += rank();
  MSPC_REQUIRE(axis >= 0 && axis < rank(), "axis out of range for shape " + shape_str(shape_));
  return shape_[static_cast<size_t>(axis)];
}

template <class T>
T Tensor<T>::item() const {
  MSPC_REQUIRE(data_.size() == 1, "item() needs a single-element tensor, got " + shape_str(shape_));
  return data_[0];
}

template <class T>
Tensor<T> Tensor<T>::reshaped(Shape shape) const {
  MSPC_REQUIRE(shape_numel(shape) == static_cast<int64_t>(data_.size()),
               "cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  return Tensor(std::move(shape), data_);
}

template <class T>
void Tensor<T>::fill(T v) {
  std::fill(data_.begin(), data_.end(), v);
}

template <class T>
Tensor<T>& Tensor<T>::operator+=(const Tensor& other) {
  MSPC_REQUIRE(same_shape(other), "shape mismatch in +=: " + shape_str(shape_) + " vs " + shape_str(other.shape_));
  for (size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

template <class T>
Tensor<T> stack(std::span<const Tensor<T>> items) {
  MSPC_REQUIRE(!items.empty(), "stack needs at least one tensor");
  const Shape& inner = items[0].shape();
  Shape shape{static_cast<int64_t>(items.size())};
  shape.insert(shape.end(), inner.begin(), inner.end());
  std::vector<T> data;
  data.reserve(items.size() * items[0].size());
  for (const auto& t : items) {
    MSPC_REQUIRE(t.shape() == inner, "stack: shape mismatch " + shape_str(t.shape()) + " vs " + shape_str(inner));
    data.insert(data.end(), t.storage().begin(), t.storage().end());
  }
  return Tensor<T>(std::move(shape), std::move(data));
}

template <class T>
Tensor<T> slice_leading(const Tensor<T>& t, int64_t first, int64_t count) {
  MSPC_REQUIRE(t.rank() >= 1 && first >= 0 && count > 0 && first + count <= t.dim(0),
               "slice_leading out of range for " + shape_str(t.shape()));
  Shape shape = t.shape();
  shape[0] = count;
  const size_t row = t.size() / static_cast<size_t>(t.dim(0));
  std::vector<T> data(t.storage().begin() + static_cast<ptrdiff_t>(first * row),
                      t.storage().begin() + static_cast<ptrdiff_t>((first + count) * row));
  return Tensor<T>(std::move(shape), std::move(data));
}

template <class T>
Tensor<T> select_leading(const Tensor<T>& t, int64_t index) {
  Tensor<T> one = slice_leading(t, index, 1);
  return one.reshaped(Shape(t.shape().begin() + 1, t.shape().end()));
}

template <class T>
bool all_finite(const Tensor<T>& t) {
  for (T v : t.data())
    if (!std::isfinite(v)) return false;
  return true;
}

template class Tensor<float>;
template class Tensor<double>;
template Tensor<float> stack(std::span<const Tensor<float>>);
template Tensor<double> stack(std::span<const Tensor<double>>);
template Tensor<float> slice_leading(const Tensor<float>&, int64_t, int64_t);
template Tensor<double> slice_leading(const Tensor<double>&, int64_t, int64_t);
template Tensor<float> select_leading(const Tensor<float>&, int64_t);
template Tensor<double> select_leading(const Tensor<double>&, int64_t);
template bool all_finite(const Tensor<float>&);
template bool all_finite(const Tensor<double>&);

}  // namespace mspc
