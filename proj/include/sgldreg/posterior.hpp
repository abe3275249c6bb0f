#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sgldreg/tensor.hpp"
#include "sgldreg/unet.hpp"
#include "sgldreg/warp.hpp"

namespace sgldreg {

struct PosteriorEstimate {
  DeformationField mean_field;
  Tensor std_field;  // (2,H,W), pixels, >= 0
  std::size_t sample_count = 0;
};

// One predicted field per snapshot, in snapshot order. Throws IntegrityError
// for a snapshot whose weights do not fit `config`.
std::vector<DeformationField> sample_fields(const UNetConfig& config, const std::vector<WeightSnapshot>& snapshots,
                                            const Tensor& moving, const Tensor& fixed);

// Elementwise arithmetic mean, accumulated in double in list order.
template <typename T>
BasicDeformationField<T> posterior_mean(std::span<const BasicDeformationField<T>> fields);

// Elementwise sample standard deviation (n-1 divisor; zero for one field).
template <typename T>
BasicTensor<T> posterior_std(std::span<const BasicDeformationField<T>> fields);

PosteriorEstimate estimate_posterior(std::span<const DeformationField> fields);

struct Registration {
  Tensor registered;  // moving warped by the mean field
  PosteriorEstimate estimate;
};

// Predicts a field per snapshot, averages the fields, then warps once.
Registration register_pair(const UNetConfig& config, const std::vector<WeightSnapshot>& snapshots,
                           const Tensor& moving, const Tensor& fixed);

}  // namespace sgldreg
