#pragma once
// Raw loops behind the differentiable primitives. Internal to the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>

#include "sgldreg/parallel.hpp"
#include "sgldreg/tensor.hpp"

namespace sgldreg::kernels {

struct Conv2dGeometry {
  std::size_t batch, in_channels, in_h, in_w;
  std::size_t out_channels, kernel_h, kernel_w;
  std::size_t out_h, out_w;
  long stride, padding;
};

// Output indices o with 0 <= o*stride + k - pad < extent, as [lo, hi).
struct IndexRange {
  long lo, hi;
};

inline IndexRange valid_outputs(long extent, long out_extent, long stride, long pad, long k) {
  long lo = 0;
  const long first = pad - k;
  if (first > 0) lo = (first + stride - 1) / stride;
  const long last_input = extent - 1 + pad - k;
  if (last_input < 0) return {0, 0};
  long hi = std::min(out_extent, last_input / stride + 1);
  if (lo > hi) lo = hi;
  return {lo, hi};
}

template <typename T>
void conv2d_forward(const Conv2dGeometry& g, const T* in, const T* kernel, const T* bias, T* out) {
  const std::size_t in_plane = g.in_h * g.in_w;
  const std::size_t out_plane = g.out_h * g.out_w;
  parallel_for(g.batch, [&](std::size_t n0, std::size_t n1) {
    for (std::size_t n = n0; n < n1; ++n) {
      for (std::size_t co = 0; co < g.out_channels; ++co) {
        T* o = out + (n * g.out_channels + co) * out_plane;
        std::fill(o, o + out_plane, bias ? bias[co] : T(0));
        for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
          const T* src = in + (n * g.in_channels + ci) * in_plane;
          const T* k = kernel + (co * g.in_channels + ci) * g.kernel_h * g.kernel_w;
          for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
            const auto ry = valid_outputs(long(g.in_h), long(g.out_h), g.stride, g.padding, long(ky));
            for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
              const auto rx = valid_outputs(long(g.in_w), long(g.out_w), g.stride, g.padding, long(kx));
              const T w = k[ky * g.kernel_w + kx];
              const long shift = long(kx) - g.padding;
              for (long oy = ry.lo; oy < ry.hi; ++oy) {
                const T* row = src + (oy * g.stride + long(ky) - g.padding) * long(g.in_w);
                T* orow = o + oy * long(g.out_w);
                if (g.stride == 1) {
                  for (long ox = rx.lo; ox < rx.hi; ++ox) orow[ox] += w * row[ox + shift];
                } else {
                  for (long ox = rx.lo; ox < rx.hi; ++ox) orow[ox] += w * row[ox * g.stride + shift];
                }
              }
            }
          }
        }
      }
    }
  });
}

template <typename T>
void conv2d_backward_input(const Conv2dGeometry& g, const T* grad_out, const T* kernel, T* grad_in) {
  const std::size_t in_plane = g.in_h * g.in_w;
  const std::size_t out_plane = g.out_h * g.out_w;
  parallel_for(g.batch, [&](std::size_t n0, std::size_t n1) {
    for (std::size_t n = n0; n < n1; ++n) {
      for (std::size_t co = 0; co < g.out_channels; ++co) {
        const T* go = grad_out + (n * g.out_channels + co) * out_plane;
        for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
          T* gi = grad_in + (n * g.in_channels + ci) * in_plane;
          const T* k = kernel + (co * g.in_channels + ci) * g.kernel_h * g.kernel_w;
          for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
            const auto ry = valid_outputs(long(g.in_h), long(g.out_h), g.stride, g.padding, long(ky));
            for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
              const auto rx = valid_outputs(long(g.in_w), long(g.out_w), g.stride, g.padding, long(kx));
              const T w = k[ky * g.kernel_w + kx];
              const long shift = long(kx) - g.padding;
              for (long oy = ry.lo; oy < ry.hi; ++oy) {
                T* row = gi + (oy * g.stride + long(ky) - g.padding) * long(g.in_w);
                const T* orow = go + oy * long(g.out_w);
                if (g.stride == 1) {
                  for (long ox = rx.lo; ox < rx.hi; ++ox) row[ox + shift] += w * orow[ox];
                } else {
                  for (long ox = rx.lo; ox < rx.hi; ++ox) row[ox * g.stride + shift] += w * orow[ox];
                }
              }
            }
          }
        }
      }
    }
  });
}

// Accumulates into grad_kernel and grad_bias (either may be null).
template <typename T>
void conv2d_backward_params(const Conv2dGeometry& g, const T* grad_out, const T* in, T* grad_kernel,
                            T* grad_bias) {
  const std::size_t in_plane = g.in_h * g.in_w;
  const std::size_t out_plane = g.out_h * g.out_w;
  parallel_for(g.out_channels, [&](std::size_t c0, std::size_t c1) {
    for (std::size_t co = c0; co < c1; ++co) {
      if (grad_bias) {
        T acc = 0;
        for (std::size_t n = 0; n < g.batch; ++n) {
          const T* go = grad_out + (n * g.out_channels + co) * out_plane;
          for (std::size_t i = 0; i < out_plane; ++i) acc += go[i];
        }
        grad_bias[co] += acc;
      }
      if (!grad_kernel) continue;
      for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
        T* gk = grad_kernel + (co * g.in_channels + ci) * g.kernel_h * g.kernel_w;
        for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
          const auto ry = valid_outputs(long(g.in_h), long(g.out_h), g.stride, g.padding, long(ky));
          for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
            const auto rx = valid_outputs(long(g.in_w), long(g.out_w), g.stride, g.padding, long(kx));
            const long shift = long(kx) - g.padding;
            T acc = 0;
            for (std::size_t n = 0; n < g.batch; ++n) {
              const T* go = grad_out + (n * g.out_channels + co) * out_plane;
              const T* src = in + (n * g.in_channels + ci) * in_plane;
              for (long oy = ry.lo; oy < ry.hi; ++oy) {
                const T* row = src + (oy * g.stride + long(ky) - g.padding) * long(g.in_w);
                const T* orow = go + oy * long(g.out_w);
                T a0 = 0, a1 = 0;
                long ox = rx.lo;
                if (g.stride == 1) {
                  for (; ox + 1 < rx.hi; ox += 2) {
                    a0 += orow[ox] * row[ox + shift];
                    a1 += orow[ox + 1] * row[ox + 1 + shift];
                  }
                }
                for (; ox < rx.hi; ++ox) a0 += orow[ox] * row[ox * g.stride + shift];
                acc += a0 + a1;
              }
            }
            gk[ky * g.kernel_w + kx] += acc;
          }
        }
      }
    }
  });
}

// Bilinear sampling with border clamp. For output pixel (y, x) of item n the
// sample location is (y + dy, x + dx); field channel 0 is dx, channel 1 is dy.
template <typename T>
struct BilinearTap {
  std::size_t x0, x1, y0, y1;
  T wx, wy;
  bool inside_x, inside_y;  // clamp inactive: derivative w.r.t. the coordinate passes through
};

template <typename T>
inline BilinearTap<T> bilinear_tap(T sy, T sx, std::size_t h, std::size_t w) {
  BilinearTap<T> tap{};
  const T max_x = T(w - 1);
  const T max_y = T(h - 1);
  tap.inside_x = sx >= T(0) && sx <= max_x;
  tap.inside_y = sy >= T(0) && sy <= max_y;
  const T cx = std::clamp(sx, T(0), max_x);
  const T cy = std::clamp(sy, T(0), max_y);
  const T fx = std::floor(cx);
  const T fy = std::floor(cy);
  tap.x0 = static_cast<std::size_t>(fx);
  tap.y0 = static_cast<std::size_t>(fy);
  tap.x1 = std::min(tap.x0 + 1, w - 1);
  tap.y1 = std::min(tap.y0 + 1, h - 1);
  tap.wx = cx - fx;
  tap.wy = cy - fy;
  return tap;
}

template <typename T>
void warp_bilinear_forward(const BasicTensor<T>& image, const BasicTensor<T>& field, BasicTensor<T>& out) {
  const std::size_t n_items = image.dim(0), channels = image.dim(1), h = image.dim(2), w = image.dim(3);
  parallel_for(n_items, [&](std::size_t n0, std::size_t n1) {
    for (std::size_t n = n0; n < n1; ++n) {
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          const auto tap = bilinear_tap<T>(T(y) + field.at(n, 1, y, x), T(x) + field.at(n, 0, y, x), h, w);
          for (std::size_t c = 0; c < channels; ++c) {
            const T top = std::lerp(image.at(n, c, tap.y0, tap.x0), image.at(n, c, tap.y0, tap.x1), tap.wx);
            const T bottom = std::lerp(image.at(n, c, tap.y1, tap.x0), image.at(n, c, tap.y1, tap.x1), tap.wx);
            out.at(n, c, y, x) = std::lerp(top, bottom, tap.wy);
          }
        }
      }
    }
  });
}

// Either gradient pointer may be null.
template <typename T>
void warp_bilinear_backward(const BasicTensor<T>& image, const BasicTensor<T>& field,
                            const BasicTensor<T>& grad_out, BasicTensor<T>* grad_image,
                            BasicTensor<T>* grad_field) {
  const std::size_t n_items = image.dim(0), channels = image.dim(1), h = image.dim(2), w = image.dim(3);
  parallel_for(n_items, [&](std::size_t n0, std::size_t n1) {
    for (std::size_t n = n0; n < n1; ++n) {
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          const auto tap = bilinear_tap<T>(T(y) + field.at(n, 1, y, x), T(x) + field.at(n, 0, y, x), h, w);
          T gdx = 0, gdy = 0;
          for (std::size_t c = 0; c < channels; ++c) {
            const T g = grad_out.at(n, c, y, x);
            const T i00 = image.at(n, c, tap.y0, tap.x0), i01 = image.at(n, c, tap.y0, tap.x1);
            const T i10 = image.at(n, c, tap.y1, tap.x0), i11 = image.at(n, c, tap.y1, tap.x1);
            if (grad_image) {
              auto& gi = *grad_image;
              gi.at(n, c, tap.y0, tap.x0) += g * (T(1) - tap.wx) * (T(1) - tap.wy);
              gi.at(n, c, tap.y0, tap.x1) += g * tap.wx * (T(1) - tap.wy);
              gi.at(n, c, tap.y1, tap.x0) += g * (T(1) - tap.wx) * tap.wy;
              gi.at(n, c, tap.y1, tap.x1) += g * tap.wx * tap.wy;
            }
            if (grad_field) {
              if (tap.inside_x) gdx += g * ((T(1) - tap.wy) * (i01 - i00) + tap.wy * (i11 - i10));
              if (tap.inside_y) {
                const T top = i00 + tap.wx * (i01 - i00);
                const T bottom = i10 + tap.wx * (i11 - i10);
                gdy += g * (bottom - top);
              }
            }
          }
          if (grad_field) {
            grad_field->at(n, 0, y, x) += gdx;
            grad_field->at(n, 1, y, x) += gdy;
          }
        }
      }
    }
  });
}

}  // namespace sgldreg::kernels
