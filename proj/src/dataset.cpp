#include "sgldreg/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include "sgldreg/errors.hpp"

namespace sgldreg {
namespace {

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes, std::size_t offset) {
  return (std::uint32_t(bytes[offset]) << 24) | (std::uint32_t(bytes[offset + 1]) << 16) |
         (std::uint32_t(bytes[offset + 2]) << 8) | std::uint32_t(bytes[offset + 3]);
}

std::uint32_t idx_magic(const IdxArray& a) { return 0x00000800u | std::uint32_t(a.dims.size()); }

// Separable Gaussian blur with replicated borders, in place on an H x W plane.
void gaussian_blur(std::vector<double>& plane, std::size_t h, std::size_t w, double sigma) {
  if (sigma <= 0.0) return;
  const long radius = long(std::ceil(3.0 * sigma));
  std::vector<double> weights(2 * radius + 1);
  double total = 0.0;
  for (long k = -radius; k <= radius; ++k) {
    weights[k + radius] = std::exp(-0.5 * double(k * k) / (sigma * sigma));
    total += weights[k + radius];
  }
  for (auto& v : weights) v /= total;
  std::vector<double> tmp(h * w);
  for (long y = 0; y < long(h); ++y) {
    for (long x = 0; x < long(w); ++x) {
      double acc = 0.0;
      for (long k = -radius; k <= radius; ++k) {
        acc += weights[k + radius] * plane[y * w + std::clamp(x + k, 0L, long(w) - 1)];
      }
      tmp[y * w + x] = acc;
    }
  }
  for (long y = 0; y < long(h); ++y) {
    for (long x = 0; x < long(w); ++x) {
      double acc = 0.0;
      for (long k = -radius; k <= radius; ++k) {
        acc += weights[k + radius] * tmp[std::clamp(y + k, 0L, long(h) - 1) * w + x];
      }
      plane[y * w + x] = acc;
    }
  }
}

struct Shape2D {
  double cx, cy, radius, inner;  // inner > 0 makes a ring
  float intensity;
};

}  // namespace

IdxArray parse_idx(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4) throw FormatError("IDX: truncated header at offset " + std::to_string(bytes.size()));
  if (bytes[0] != 0 || bytes[1] != 0) throw FormatError("IDX: bad magic at offset 0");
  if (bytes[2] != 0x08) throw FormatError("IDX: unsupported element type at offset 2 (only unsigned byte)");
  const std::size_t rank = bytes[3];
  if (rank == 0) throw FormatError("IDX: zero dimensions at offset 3");
  const std::size_t header = 4 + 4 * rank;
  if (bytes.size() < header) {
    throw FormatError("IDX: truncated dimension list at offset " + std::to_string(bytes.size()));
  }
  IdxArray out;
  std::size_t payload = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    out.dims.push_back(read_be32(bytes, 4 + 4 * i));
    payload *= out.dims.back();
  }
  if (bytes.size() < header + payload) {
    throw FormatError("IDX: truncated payload at offset " + std::to_string(bytes.size()) + " (expected " +
                      std::to_string(header + payload) + " bytes)");
  }
  if (bytes.size() > header + payload) {
    throw FormatError("IDX: trailing bytes at offset " + std::to_string(header + payload));
  }
  out.data.assign(bytes.begin() + long(header), bytes.end());
  return out;
}

IdxArray load_idx(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open IDX file '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_idx(bytes);
}

std::vector<Tensor> load_idx_images(const std::string& path) {
  const IdxArray a = load_idx(path);
  if (idx_magic(a) != kIdxImagesMagic) throw FormatError("IDX: '" + path + "' is not an image file (magic 0x803)");
  const std::size_t n = a.dims[0], h = a.dims[1], w = a.dims[2];
  std::vector<Tensor> images;
  images.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Tensor img(Shape{1, 1, h, w});
    for (std::size_t j = 0; j < h * w; ++j) img[j] = float(a.data[i * h * w + j]) / 255.0f;
    images.push_back(std::move(img));
  }
  return images;
}

std::vector<std::uint8_t> load_idx_labels(const std::string& path) {
  IdxArray a = load_idx(path);
  if (idx_magic(a) != kIdxLabelsMagic) throw FormatError("IDX: '" + path + "' is not a label file (magic 0x801)");
  return std::move(a.data);
}

Tensor resize_bilinear(const Tensor& image, std::size_t height, std::size_t width) {
  if (height == 0 || width == 0) throw ConfigError("resize_bilinear: target extents must be positive");
  if (image.rank() != 4 || image.dim(0) != 1 || image.dim(1) != 1) {
    throw DimensionError("resize_bilinear: expected (1,1,H,W), got " + shape_string(image.shape()));
  }
  const std::size_t h = image.dim(2), w = image.dim(3);
  Tensor out(Shape{1, 1, height, width});
  const double sy = height > 1 ? double(h - 1) / double(height - 1) : 0.0;
  const double sx = width > 1 ? double(w - 1) / double(width - 1) : 0.0;
  for (std::size_t y = 0; y < height; ++y) {
    const double fy = std::min(double(y) * sy, double(h - 1));
    const std::size_t y0 = std::size_t(fy), y1 = std::min(y0 + 1, h - 1);
    const double wy = fy - double(y0);
    for (std::size_t x = 0; x < width; ++x) {
      const double fx = std::min(double(x) * sx, double(w - 1));
      const std::size_t x0 = std::size_t(fx), x1 = std::min(x0 + 1, w - 1);
      const double wx = fx - double(x0);
      const double top = std::lerp(double(image[y0 * w + x0]), double(image[y0 * w + x1]), wx);
      const double bottom = std::lerp(double(image[y1 * w + x0]), double(image[y1 * w + x1]), wx);
      out[y * width + x] = float(std::lerp(top, bottom, wy));
    }
  }
  return out;
}

DatasetSplit make_pairs(const std::vector<Tensor>& images, const std::vector<std::uint8_t>& labels,
                        const PairSplitSpec& spec, std::uint64_t seed) {
  if (!labels.empty() && labels.size() != images.size()) {
    throw DimensionError("make_pairs: " + std::to_string(images.size()) + " images but " +
                         std::to_string(labels.size()) + " labels");
  }
  std::vector<std::size_t> selected;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (spec.digit < 0 || labels.empty() || labels[i] == spec.digit) selected.push_back(i);
  }
  if (selected.size() < 2) throw ConfigError("make_pairs: fewer than two images selected");

  std::mt19937_64 rng(seed);
  std::shuffle(selected.begin(), selected.end(), rng);

  auto take = [&](std::size_t& cursor, std::size_t want) {
    const std::size_t n = std::min(want, selected.size() - cursor);
    std::vector<std::size_t> part(selected.begin() + long(cursor), selected.begin() + long(cursor + n));
    cursor += n;
    return part;
  };
  std::size_t cursor = 0;
  const auto train_idx = take(cursor, spec.train_images);
  const auto val_idx = take(cursor, spec.val_images);
  const auto test_idx = take(cursor, spec.test_images);

  auto build = [&](const std::vector<std::size_t>& idx, std::size_t cap) {
    std::vector<Tensor> resized;
    for (std::size_t i : idx) resized.push_back(resize_bilinear(images[i], spec.image_size, spec.image_size));
    std::vector<std::pair<std::size_t, std::size_t>> order;
    for (std::size_t a = 0; a < idx.size(); ++a) {
      for (std::size_t b = 0; b < idx.size(); ++b) {
        if (a != b) order.emplace_back(a, b);
      }
    }
    std::shuffle(order.begin(), order.end(), rng);
    if (cap != 0 && order.size() > cap) order.resize(cap);
    std::vector<ImagePair> pairs;
    pairs.reserve(order.size());
    for (const auto& [a, b] : order) {
      ImagePair p;
      p.moving = resized[a];
      p.fixed = resized[b];
      p.moving_source = idx[a];
      p.fixed_source = idx[b];
      pairs.push_back(std::move(p));
    }
    return pairs;
  };

  DatasetSplit split;
  split.seed = seed;
  split.train = build(train_idx, spec.train_pairs);
  split.val = build(val_idx, spec.val_pairs);
  split.test = build(test_idx, spec.test_pairs);
  return split;
}

Tensor add_gaussian_noise(const Tensor& image, double sigma, std::mt19937_64& rng) {
  if (!(sigma >= 0.0)) throw ConfigError("add_gaussian_noise: sigma must be >= 0");
  Tensor out = image;
  if (sigma == 0.0) return out;
  std::normal_distribution<double> normal(0.0, sigma);
  for (auto& v : out.values()) v = float(std::clamp(double(v) + normal(rng), 0.0, 1.0));
  return out;
}

std::vector<ImagePair> synth_pairs(std::size_t count, const ShapeSpec& spec, double max_disp, std::uint64_t seed) {
  if (!(max_disp >= 0.0 && max_disp <= 4.0)) throw ConfigError("synth_pairs: max_disp must lie in [0, 4]");
  if (spec.min_shapes < 1 || spec.max_shapes < spec.min_shapes || spec.max_shapes > 3) {
    throw ConfigError("synth_pairs: shape count must satisfy 1 <= min <= max <= 3");
  }
  const std::size_t h = spec.height, w = spec.width;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<ImagePair> pairs;
  pairs.reserve(count);
  for (std::size_t index = 0; index < count; ++index) {
    std::uniform_int_distribution<std::size_t> shape_count(spec.min_shapes, spec.max_shapes);
    const std::size_t wanted = shape_count(rng);
    const double margin = 2.0 + std::ceil(max_disp);
    std::vector<Shape2D> shapes;
    for (std::size_t attempt = 0; attempt < 200 && shapes.size() < wanted; ++attempt) {
      Shape2D s{};
      s.radius = 5.0 + 5.0 * unit(rng);
      const bool ring = s.radius >= 7.5 && unit(rng) < 0.5;
      s.inner = ring ? s.radius - 3.5 : 0.0;
      const double lo = s.radius + margin;
      if (2.0 * lo >= double(std::min(h, w)) - 1.0) continue;
      s.cx = lo + (double(w) - 1.0 - 2.0 * lo) * unit(rng);
      s.cy = lo + (double(h) - 1.0 - 2.0 * lo) * unit(rng);
      s.intensity = float(0.6 + 0.4 * unit(rng));
      const bool overlaps = std::any_of(shapes.begin(), shapes.end(), [&](const Shape2D& o) {
        return std::hypot(o.cx - s.cx, o.cy - s.cy) < o.radius + s.radius + 1.5;
      });
      if (!overlaps) shapes.push_back(s);
    }

    LabelMap labels(h, w);
    std::vector<double> intensity(h * w);
    for (auto& v : intensity) v = normal(rng);
    gaussian_blur(intensity, h, w, spec.background_sigma);
    {
      const auto [lo, hi] = std::minmax_element(intensity.begin(), intensity.end());
      const double range = *hi - *lo;
      for (auto& v : intensity) v = range > 0.0 ? spec.background_contrast * (v - *lo) / range : 0.0;
    }
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        for (std::size_t k = 0; k < shapes.size(); ++k) {
          const double r = std::hypot(double(x) - shapes[k].cx, double(y) - shapes[k].cy);
          if (r <= shapes[k].radius && r >= shapes[k].inner) {
            labels.at(y, x) = std::int32_t(k + 1);
            intensity[y * w + x] = shapes[k].intensity;
          }
        }
      }
    }
    gaussian_blur(intensity, h, w, spec.blur_sigma);
    Tensor moving(Shape{1, 1, h, w});
    for (std::size_t i = 0; i < h * w; ++i) moving[i] = float(std::clamp(intensity[i], 0.0, 1.0));

    std::vector<double> fx(h * w), fy(h * w);
    for (auto& v : fx) v = normal(rng);
    for (auto& v : fy) v = normal(rng);
    gaussian_blur(fx, h, w, spec.field_sigma);
    gaussian_blur(fy, h, w, spec.field_sigma);
    const double target = max_disp * (0.75 + 0.25 * unit(rng));
    DeformationField field = DeformationField::zeros(h, w);
    if (max_disp > 0.0) {
      double peak = 0.0;
      for (std::size_t i = 0; i < h * w; ++i) peak = std::max(peak, std::hypot(fx[i], fy[i]));
      double gain = peak > 0.0 ? target / peak : 0.0;
      double steepest = 0.0;
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          const std::size_t i = y * w + x;
          if (x + 1 < w) steepest = std::max({steepest, std::abs(fx[i + 1] - fx[i]), std::abs(fy[i + 1] - fy[i])});
          if (y + 1 < h) steepest = std::max({steepest, std::abs(fx[i + w] - fx[i]), std::abs(fy[i + w] - fy[i])});
        }
      }
      if (steepest * gain > spec.max_gradient) gain = spec.max_gradient / steepest;
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          field.dx(y, x) = float(gain * fx[y * w + x]);
          field.dy(y, x) = float(gain * fy[y * w + x]);
        }
      }
    }

    ImagePair pair;
    pair.fixed = warp_bilinear(moving, field);
    pair.fixed_labels = warp_nearest(labels, field);
    pair.moving = std::move(moving);
    pair.moving_labels = std::move(labels);
    pair.true_field = std::move(field);
    pair.moving_source = index;
    pair.fixed_source = index;
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

}  // namespace sgldreg
