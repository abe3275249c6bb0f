#include "sgldreg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>

#include "sgldreg/errors.hpp"

namespace sgldreg {

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, T fill) : shape_(std::move(shape)) {
  data_.assign(element_count(shape_), fill);
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (element_count(shape_) != data_.size()) {
    throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_string(shape_));
  }
}

template <typename T>
T BasicTensor<T>::item() const {
  if (data_.size() != 1) {
    throw ContractError("item() on tensor of shape " + shape_string(shape_));
  }
  return data_[0];
}

template <typename T>
void BasicTensor<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <typename T>
bool BasicTensor<T>::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshaped(Shape shape) const {
  return BasicTensor(std::move(shape), data_);
}

template <typename T>
bool bitwise_equal(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape()) return false;
  return a.size() == 0 || std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0;
}

template <typename T>
void require_finite(const BasicTensor<T>& t, const char* where) {
  const auto vals = t.values();
  for (std::size_t i = 0; i < vals.size(); ++i) {
    if (!std::isfinite(vals[i])) {
      throw NumericError(std::string(where) + ": non-finite value at flat index " +
                         std::to_string(i));
    }
  }
}

void require_shape(const Shape& actual, const Shape& expected, const char* where) {
  if (actual != expected) {
    throw DimensionError(std::string(where) + ": expected shape " + shape_string(expected) +
                         ", got " + shape_string(actual));
  }
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template bool bitwise_equal(const BasicTensor<float>&, const BasicTensor<float>&);
template bool bitwise_equal(const BasicTensor<double>&, const BasicTensor<double>&);
template void require_finite(const BasicTensor<float>&, const char*);
template void require_finite(const BasicTensor<double>&, const char*);

}  // namespace sgldreg
