#include "sgldreg/unet.hpp"

#include <cmath>
#include <random>
#include <string>

#include "sgldreg/errors.hpp"

namespace sgldreg {
namespace {

constexpr std::size_t kEncoderDepth = 4;
constexpr std::size_t kDecoderDepth = 6;

struct LayerSpec {
  std::string name;
  std::size_t in_channels;
  std::size_t out_channels;
};

std::size_t scaled_width(std::size_t width, double scale) {
  const auto w = static_cast<long>(std::lround(double(width) * scale));
  return static_cast<std::size_t>(std::max(1L, w));
}

// Layer order: enc1..enc4, dec1..dec6, flow. dec1..dec3 take the upsampled
// previous features plus skips from enc3, enc2, enc1; dec5 takes the
// upsampled dec4 plus the raw two-channel input.
std::vector<LayerSpec> layer_specs(const UNetConfig& c) {
  std::vector<LayerSpec> specs;
  std::size_t prev = c.input_channels;
  for (std::size_t i = 0; i < kEncoderDepth; ++i) {
    specs.push_back({"enc" + std::to_string(i + 1), prev, c.encoder_width(i)});
    prev = c.encoder_width(i);
  }
  const std::size_t skip_in[kDecoderDepth] = {c.encoder_width(2), c.encoder_width(1), c.encoder_width(0), 0,
                                              c.input_channels, 0};
  for (std::size_t i = 0; i < kDecoderDepth; ++i) {
    specs.push_back({"dec" + std::to_string(i + 1), prev + skip_in[i], c.decoder_width(i)});
    prev = c.decoder_width(i);
  }
  specs.push_back({"flow", prev, c.output_channels});
  return specs;
}

}  // namespace

std::size_t UNetConfig::encoder_width(std::size_t i) const { return scaled_width(encoder_channels.at(i), channel_scale); }
std::size_t UNetConfig::decoder_width(std::size_t i) const { return scaled_width(decoder_channels.at(i), channel_scale); }

void UNetConfig::validate() const {
  if (encoder_channels.size() != kEncoderDepth || decoder_channels.size() != kDecoderDepth) {
    throw ConfigError("UNet needs 4 encoder and 6 decoder layers");
  }
  if (kernel_size % 2 == 0 || kernel_size == 0) throw ConfigError("UNet kernel size must be odd");
  if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) throw ConfigError("leaky_slope must lie in (0,1)");
  if (!(channel_scale > 0.0) || !std::isfinite(channel_scale)) throw ConfigError("channel_scale must be positive");
  if (output_channels != 2) throw ConfigError("output_channels must equal the spatial dimensionality (2)");
  if (input_channels != 2) throw ConfigError("input_channels must be 2 (moving, fixed)");
  if (final_layer_init_scale < 0.0) throw ConfigError("final_layer_init_scale must be >= 0");
}

void UNetConfig::validate_extents(std::size_t height, std::size_t width) const {
  const std::size_t m = extent_multiple();
  if (height == 0 || width == 0 || height % m != 0 || width % m != 0) {
    throw ConfigError("image extents " + std::to_string(height) + "x" + std::to_string(width) +
                      " must be positive multiples of " + std::to_string(m));
  }
}

std::size_t parameter_count(const UNetConfig& config) {
  config.validate();
  std::size_t n = 0;
  const std::size_t taps = config.kernel_size * config.kernel_size;
  for (const auto& s : layer_specs(config)) n += s.out_channels * s.in_channels * taps + s.out_channels;
  return n;
}

template <typename T>
BasicParameterSet<T> build_unet(const UNetConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  const std::size_t k = config.kernel_size;
  BasicParameterSet<T> params;
  for (const auto& s : layer_specs(config)) {
    BasicTensor<T> kernel(Shape{s.out_channels, s.in_channels, k, k});
    const bool final_layer = s.name == "flow";
    double bound = final_layer ? config.final_layer_init_scale
                               : std::sqrt(6.0 / double((s.in_channels + s.out_channels) * k * k));
    if (bound > 0.0) {
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (auto& v : kernel.values()) v = static_cast<T>(dist(rng));
    }
    params.add(s.name + ".kernel", std::move(kernel));
    params.add(s.name + ".bias", BasicTensor<T>(Shape{s.out_channels}));
  }
  return params;
}

template <typename T>
Var<T> unet_forward(const UNetConfig& config, std::span<const Var<T>> params, Var<T> moving, Var<T> fixed) {
  const std::size_t expected = 2 * (kEncoderDepth + kDecoderDepth + 1);
  if (params.size() != expected) {
    throw IntegrityError("UNet expects " + std::to_string(expected) + " parameter tensors, got " +
                         std::to_string(params.size()));
  }
  if (moving.shape() != fixed.shape()) {
    throw DimensionError("moving " + shape_string(moving.shape()) + " and fixed " + shape_string(fixed.shape()) +
                         " differ in shape");
  }
  if (moving.shape().size() != 4 || moving.shape()[1] != 1) {
    throw DimensionError("UNet inputs must have shape (N,1,H,W), got " + shape_string(moving.shape()));
  }
  config.validate_extents(moving.shape()[2], moving.shape()[3]);

  const T slope = static_cast<T>(config.leaky_slope);
  const int pad = static_cast<int>(config.kernel_size / 2);
  std::size_t layer = 0;
  auto conv = [&](Var<T> x, int stride) {
    Var<T> y = conv2d(x, params[2 * layer], params[2 * layer + 1], stride, pad);
    ++layer;
    return y;
  };
  auto block = [&](Var<T> x, int stride) { return leaky_relu(conv(x, stride), slope); };

  const Var<T> input = concat_channels(moving, fixed);
  std::vector<Var<T>> enc;
  Var<T> x = input;
  for (std::size_t i = 0; i < kEncoderDepth; ++i) {
    x = block(x, 2);
    enc.push_back(x);
  }
  for (std::size_t i = 0; i < 3; ++i) {
    x = block(concat_channels(upsample2x_nearest(x), enc[2 - i]), 1);
  }
  x = block(x, 1);
  x = block(concat_channels(upsample2x_nearest(x), input), 1);
  x = block(x, 1);
  return conv(x, 1);
}

template <typename T>
BasicDeformationField<T> predict_field(const UNetConfig& config, const BasicParameterSet<T>& params,
                                       const BasicTensor<T>& moving, const BasicTensor<T>& fixed) {
  Tape<T> tape;
  const auto bound = bind(tape, params, false);
  Var<T> m = tape.constant(moving);
  Var<T> f = tape.constant(fixed);
  Var<T> field = unet_forward<T>(config, bound, m, f);
  if (field.shape()[0] != 1) throw DimensionError("predict_field expects a single pair");
  return BasicDeformationField<T>(field.value());
}

UNetConfig infer_unet_config(const ParameterSet& params, double leaky_slope) {
  UNetConfig config;
  config.leaky_slope = leaky_slope;
  auto width = [&](const std::string& name) { return params.at(name + ".kernel").value.dim(0); };
  for (std::size_t i = 0; i < kEncoderDepth; ++i) config.encoder_channels[i] = width("enc" + std::to_string(i + 1));
  for (std::size_t i = 0; i < kDecoderDepth; ++i) config.decoder_channels[i] = width("dec" + std::to_string(i + 1));
  config.kernel_size = params.at("flow.kernel").value.dim(2);
  check_layout(config, params);
  return config;
}

void check_layout(const UNetConfig& config, const ParameterSet& params) {
  const auto specs = layer_specs(config);
  if (params.size() != 2 * specs.size()) throw IntegrityError("parameter set does not match the UNet layout");
  const std::size_t k = config.kernel_size;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& kernel = params[2 * i];
    const auto& bias = params[2 * i + 1];
    if (kernel.id != specs[i].name + ".kernel" || bias.id != specs[i].name + ".bias" ||
        kernel.value.shape() != Shape{specs[i].out_channels, specs[i].in_channels, k, k} ||
        bias.value.shape() != Shape{specs[i].out_channels}) {
      throw IntegrityError("parameter '" + kernel.id + "' does not match the UNet configuration");
    }
  }
}

template BasicParameterSet<float> build_unet(const UNetConfig&, std::uint64_t);
template BasicParameterSet<double> build_unet(const UNetConfig&, std::uint64_t);
template Var<float> unet_forward(const UNetConfig&, std::span<const Var<float>>, Var<float>, Var<float>);
template Var<double> unet_forward(const UNetConfig&, std::span<const Var<double>>, Var<double>, Var<double>);
template BasicDeformationField<float> predict_field(const UNetConfig&, const BasicParameterSet<float>&,
                                                    const BasicTensor<float>&, const BasicTensor<float>&);
template BasicDeformationField<double> predict_field(const UNetConfig&, const BasicParameterSet<double>&,
                                                     const BasicTensor<double>&, const BasicTensor<double>&);

}  // namespace sgldreg
