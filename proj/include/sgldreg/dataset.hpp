#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sgldreg/tensor.hpp"
#include "sgldreg/warp.hpp"

namespace sgldreg {

struct ImagePair {
  Tensor moving;  // (1,1,H,W), intensities in [0,1]
  Tensor fixed;
  std::optional<LabelMap> moving_labels;
  std::optional<LabelMap> fixed_labels;
  std::optional<DeformationField> true_field;  // synthetic data only
  // Source image indices, used to verify split disjointness.
  std::size_t moving_source = 0;
  std::size_t fixed_source = 0;

  std::size_t height() const { return moving.dim(2); }
  std::size_t width() const { return moving.dim(3); }
};

struct DatasetSplit {
  std::vector<ImagePair> train;
  std::vector<ImagePair> val;
  std::vector<ImagePair> test;
  std::uint64_t seed = 0;
};

// Raw IDX array: big-endian header, unsigned-byte payload.
struct IdxArray {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;
};

IdxArray load_idx(const std::string& path);
IdxArray parse_idx(const std::vector<std::uint8_t>& bytes);
// Magic 0x00000803; each image scaled to [0,1] with shape (1,1,H,W).
std::vector<Tensor> load_idx_images(const std::string& path);
// Magic 0x00000801.
std::vector<std::uint8_t> load_idx_labels(const std::string& path);

struct PairSplitSpec {
  int digit = 5;  // negative keeps every image
  std::size_t train_images = 200;
  std::size_t val_images = 20;
  std::size_t test_images = 40;
  std::size_t train_pairs = 0;  // 0: no cap
  std::size_t val_pairs = 100;
  std::size_t test_pairs = 1000;
  std::size_t image_size = 32;
};

// Selects `digit`, resizes, splits at the image level and forms every ordered
// pair of distinct images inside each split, shuffled by `seed`, then capped.
DatasetSplit make_pairs(const std::vector<Tensor>& images, const std::vector<std::uint8_t>& labels,
                        const PairSplitSpec& spec, std::uint64_t seed);

// Corner-aligned bilinear resampling of a (1,1,H,W) image.
Tensor resize_bilinear(const Tensor& image, std::size_t height, std::size_t width);

// image + N(0, sigma^2) per pixel, clipped to [0,1].
Tensor add_gaussian_noise(const Tensor& image, double sigma, std::mt19937_64& rng);

struct ShapeSpec {
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t min_shapes = 1;  // foreground shapes; plus background gives 2-4 labels
  std::size_t max_shapes = 3;
  double blur_sigma = 1.0;      // intensity smoothing, pixels
  double background_sigma = 1.5;     // smoothing of the background texture, pixels
  double background_contrast = 0.4;  // background spans [0, contrast]
  double field_sigma = 12.0;     // displacement smoothing, pixels
  double max_gradient = 0.5;    // cap on |finite difference| of the generated field
};

// Smooth blob/ring images over a faint textured background, with integer
// label regions (background 0) and a smooth random
// displacement of peak magnitude <= max_disp. fixed = warp_bilinear(moving,
// true_field); fixed labels = warp_nearest(moving labels, true_field).
std::vector<ImagePair> synth_pairs(std::size_t count, const ShapeSpec& spec, double max_disp, std::uint64_t seed);

}  // namespace sgldreg
