#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <vector>

#include "sgldreg/tensor.hpp"

namespace sgldreg {

// Per-pixel displacement in pixels, stored as (2, H, W): plane 0 is dx
// (columns), plane 1 is dy (rows). Output pixel p samples the moving image
// at p + displacement(p).
template <typename T>
class BasicDeformationField {
 public:
  BasicDeformationField() = default;
  explicit BasicDeformationField(BasicTensor<T> displacement);

  static BasicDeformationField zeros(std::size_t height, std::size_t width);
  static BasicDeformationField constant(std::size_t height, std::size_t width, T dx, T dy);

  std::size_t height() const { return displacement_.dim(1); }
  std::size_t width() const { return displacement_.dim(2); }

  T& dx(std::size_t y, std::size_t x) { return displacement_[y * width() + x]; }
  T& dy(std::size_t y, std::size_t x) { return displacement_[(height() + y) * width() + x]; }
  T dx(std::size_t y, std::size_t x) const { return displacement_[y * width() + x]; }
  T dy(std::size_t y, std::size_t x) const { return displacement_[(height() + y) * width() + x]; }

  const BasicTensor<T>& tensor() const noexcept { return displacement_; }
  // (1, 2, H, W) view for the batched primitives.
  BasicTensor<T> batched() const { return displacement_.reshaped({1, 2, height(), width()}); }

  friend bool operator==(const BasicDeformationField& a, const BasicDeformationField& b) {
    return a.displacement_ == b.displacement_;
  }

 private:
  BasicTensor<T> displacement_{Shape{2, 0, 0}};
};

using DeformationField = BasicDeformationField<float>;
using DeformationFieldD = BasicDeformationField<double>;

// Integer label image, row-major.
struct LabelMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::int32_t> labels;

  LabelMap() = default;
  LabelMap(std::size_t h, std::size_t w, std::int32_t fill = 0) : height(h), width(w), labels(h * w, fill) {}

  std::int32_t& at(std::size_t y, std::size_t x) { return labels[y * width + x]; }
  std::int32_t at(std::size_t y, std::size_t x) const { return labels[y * width + x]; }
  std::set<std::int32_t> label_set() const { return {labels.begin(), labels.end()}; }
  std::size_t count(std::int32_t label) const;

  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

// image: (1, C, H, W) or (H, W). Border-clamped bilinear resampling.
template <typename T>
BasicTensor<T> warp_bilinear(const BasicTensor<T>& image, const BasicDeformationField<T>& field);

// Label at round(p + displacement(p)), clamped to the grid.
template <typename T>
LabelMap warp_nearest(const LabelMap& labels, const BasicDeformationField<T>& field);

// (2, 2, H, W): [component (dx, dy)][axis (x, y)] forward differences with a
// zero last column / row.
template <typename T>
BasicTensor<T> field_gradient(const BasicDeformationField<T>& field);

}  // namespace sgldreg
