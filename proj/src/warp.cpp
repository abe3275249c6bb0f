#include "sgldreg/warp.hpp"

#include <algorithm>
#include <cmath>

#include "kernels.hpp"
#include "sgldreg/autodiff.hpp"
#include "sgldreg/errors.hpp"

namespace sgldreg {

template <typename T>
BasicDeformationField<T>::BasicDeformationField(BasicTensor<T> displacement)
    : displacement_(std::move(displacement)) {
  if (displacement_.rank() == 4 && displacement_.dim(0) == 1) {
    displacement_ = displacement_.reshaped({displacement_.dim(1), displacement_.dim(2), displacement_.dim(3)});
  }
  if (displacement_.rank() != 3 || displacement_.dim(0) != 2) {
    throw DimensionError("deformation field must have shape (2,H,W), got " + shape_string(displacement_.shape()));
  }
  require_finite(displacement_, "deformation field");
}

template <typename T>
BasicDeformationField<T> BasicDeformationField<T>::zeros(std::size_t height, std::size_t width) {
  return BasicDeformationField(BasicTensor<T>(Shape{2, height, width}));
}

template <typename T>
BasicDeformationField<T> BasicDeformationField<T>::constant(std::size_t height, std::size_t width, T dx, T dy) {
  BasicTensor<T> t(Shape{2, height, width});
  std::fill(t.data(), t.data() + height * width, dx);
  std::fill(t.data() + height * width, t.data() + 2 * height * width, dy);
  return BasicDeformationField(std::move(t));
}

std::size_t LabelMap::count(std::int32_t label) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
}

template <typename T>
BasicTensor<T> warp_bilinear(const BasicTensor<T>& image, const BasicDeformationField<T>& field) {
  BasicTensor<T> batched = image;
  if (image.rank() == 2) batched = image.reshaped({1, 1, image.dim(0), image.dim(1)});
  if (batched.rank() != 4 || batched.dim(0) != 1 || batched.dim(2) != field.height() ||
      batched.dim(3) != field.width()) {
    throw DimensionError("warp_bilinear: image " + shape_string(image.shape()) + " does not match field " +
                         shape_string(field.tensor().shape()));
  }
  BasicTensor<T> out(batched.shape());
  kernels::warp_bilinear_forward(batched, field.batched(), out);
  return image.rank() == 2 ? out.reshaped(image.shape()) : out;
}

template <typename T>
LabelMap warp_nearest(const LabelMap& labels, const BasicDeformationField<T>& field) {
  if (labels.height != field.height() || labels.width != field.width()) {
    throw DimensionError("warp_nearest: label map does not match field extents");
  }
  const long h = long(labels.height), w = long(labels.width);
  LabelMap out(labels.height, labels.width);
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      const long sx = std::clamp(std::lround(double(x) + double(field.dx(y, x))), 0L, w - 1);
      const long sy = std::clamp(std::lround(double(y) + double(field.dy(y, x))), 0L, h - 1);
      out.at(y, x) = labels.at(sy, sx);
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> field_gradient(const BasicDeformationField<T>& field) {
  const std::size_t h = field.height(), w = field.width();
  Tape<T> tape;
  Var<T> f = tape.constant(field.batched());
  const BasicTensor<T> gx = diff_x(f).value();
  const BasicTensor<T> gy = diff_y(f).value();
  BasicTensor<T> out(Shape{2, 2, h, w});
  const std::size_t plane = h * w;
  for (std::size_t c = 0; c < 2; ++c) {
    std::copy_n(gx.data() + c * plane, plane, out.data() + (c * 2 + 0) * plane);
    std::copy_n(gy.data() + c * plane, plane, out.data() + (c * 2 + 1) * plane);
  }
  return out;
}

template class BasicDeformationField<float>;
template class BasicDeformationField<double>;
template BasicTensor<float> warp_bilinear(const BasicTensor<float>&, const BasicDeformationField<float>&);
template BasicTensor<double> warp_bilinear(const BasicTensor<double>&, const BasicDeformationField<double>&);
template LabelMap warp_nearest(const LabelMap&, const BasicDeformationField<float>&);
template LabelMap warp_nearest(const LabelMap&, const BasicDeformationField<double>&);
template BasicTensor<float> field_gradient(const BasicDeformationField<float>&);
template BasicTensor<double> field_gradient(const BasicDeformationField<double>&);

}  // namespace sgldreg
