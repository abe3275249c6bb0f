#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "sgldreg/autodiff.hpp"
#include "sgldreg/parameters.hpp"
#include "sgldreg/warp.hpp"

namespace sgldreg {

struct UNetConfig {
  std::vector<std::size_t> encoder_channels{32, 32, 32, 32};
  std::vector<std::size_t> decoder_channels{32, 32, 32, 32, 32, 16};
  std::size_t kernel_size = 3;
  double leaky_slope = 0.2;
  std::size_t input_channels = 2;
  std::size_t output_channels = 2;
  // Multiplies every hidden width (rounded, at least 1).
  double channel_scale = 1.0;
  // Half-width of the uniform init of the final field layer; 0 gives an exactly zero field.
  double final_layer_init_scale = 0.0;

  std::size_t encoder_width(std::size_t i) const;
  std::size_t decoder_width(std::size_t i) const;
  // Images must be divisible by this along both axes.
  std::size_t extent_multiple() const { return std::size_t{1} << encoder_channels.size(); }
  void validate() const;
  void validate_extents(std::size_t height, std::size_t width) const;
};

// Trainable weights at one iteration.
struct WeightSnapshot {
  std::uint64_t iteration = 0;
  ParameterSet parameters;
};

std::size_t parameter_count(const UNetConfig& config);

// Glorot-uniform hidden kernels, zero biases, final layer per final_layer_init_scale.
template <typename T>
BasicParameterSet<T> build_unet(const UNetConfig& config, std::uint64_t seed);

// Batched forward: moving, fixed (N,1,H,W) -> field (N,2,H,W).
template <typename T>
Var<T> unet_forward(const UNetConfig& config, std::span<const Var<T>> params, Var<T> moving, Var<T> fixed);

// Single-pair inference; moving and fixed have shape (1,1,H,W).
template <typename T>
BasicDeformationField<T> predict_field(const UNetConfig& config, const BasicParameterSet<T>& params,
                                       const BasicTensor<T>& moving, const BasicTensor<T>& fixed);

// Recovers layer widths from parameter shapes.
UNetConfig infer_unet_config(const ParameterSet& params, double leaky_slope);

// Throws IntegrityError when `params` was not produced by build_unet(config).
void check_layout(const UNetConfig& config, const ParameterSet& params);

}  // namespace sgldreg
