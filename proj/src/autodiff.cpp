#include "sgldreg/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>

#include "kernels.hpp"
#include "sgldreg/errors.hpp"

namespace sgldreg {

namespace debug {
namespace {
std::atomic<bool> g_backward_fault{false};
}
void set_backward_fault(bool enabled) { g_backward_fault.store(enabled); }
bool backward_fault() { return g_backward_fault.load(); }
}  // namespace debug

template <typename T>
Var<T> Tape<T>::leaf(BasicTensor<T> value, bool requires_grad) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Tape<T>::record(BasicTensor<T> value, std::vector<std::size_t> inputs, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                   [this](std::size_t i) { return nodes_.at(i).requires_grad; });
  if (node.requires_grad) {
    node.inputs = std::move(inputs);
    node.backward = std::move(backward);
  }
  nodes_.push_back(std::move(node));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
const BasicTensor<T>& Tape<T>::grad(std::size_t i) const {
  const Node& node = nodes_.at(i);
  if (!node.has_grad) {
    node.grad = BasicTensor<T>(node.value.shape());
    node.has_grad = true;
  }
  return node.grad;
}

template <typename T>
BasicTensor<T>& Tape<T>::grad_accumulator(std::size_t i) {
  Node& node = nodes_.at(i);
  if (!node.has_grad) {
    node.grad = BasicTensor<T>(node.value.shape());
    node.has_grad = true;
  }
  return node.grad;
}

template <typename T>
void Tape<T>::backward(Var<T> loss) {
  if (loss.tape() != this) throw ContractError("backward: loss belongs to a different tape");
  const Node& root = nodes_.at(loss.index());
  if (!root.value.is_scalar()) {
    throw ContractError("backward: loss must be scalar, got shape " + shape_string(root.value.shape()));
  }
  for (auto& node : nodes_) {
    node.has_grad = false;
    node.grad = BasicTensor<T>();
  }
  visits_ = 0;
  if (!root.requires_grad) return;
  grad_accumulator(loss.index())[0] = T(1);
  for (std::size_t i = loss.index() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.has_grad || !node.backward) continue;
    node.backward(*this, i);
    ++visits_;
  }
}

template class Tape<float>;
template class Tape<double>;

namespace {

template <typename T>
Tape<T>& common_tape(Var<T> a, Var<T> b, const char* op) {
  if (!a.valid() || a.tape() != b.tape()) {
    throw ContractError(std::string(op) + ": operands must live on the same tape");
  }
  return *a.tape();
}

template <typename T>
void require_same_shape(Var<T> a, Var<T> b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

template <typename T>
void require_rank4(Var<T> a, const char* op) {
  if (a.shape().size() != 4) {
    throw DimensionError(std::string(op) + ": expected rank-4 tensor, got " + shape_string(a.shape()));
  }
}

// Applies f(value) elementwise with derivative df(value, out) for the backward pass.
template <typename T, typename F, typename DF>
Var<T> unary(Var<T> a, F f, DF df) {
  Tape<T>& tape = *a.tape();
  const auto& in = a.value();
  BasicTensor<T> out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  const std::size_t ia = a.index();
  return tape.record(std::move(out), {ia}, [ia, df](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& x = t.value(ia);
    const auto& y = t.value(self);
    auto& ga = t.grad_accumulator(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * df(x[i], y[i]);
  });
}

}  // namespace

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  Tape<T>& tape = common_tape(a, b, "add");
  require_same_shape(a, b, "add");
  const auto& x = a.value();
  const auto& y = b.value();
  BasicTensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  const std::size_t ia = a.index(), ib = b.index();
  return tape.record(std::move(out), {ia, ib}, [ia, ib](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    for (std::size_t in : {ia, ib}) {
      if (!t.requires_grad(in)) continue;
      auto& gi = t.grad_accumulator(in);
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
    }
  });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  Tape<T>& tape = common_tape(a, b, "sub");
  require_same_shape(a, b, "sub");
  const auto& x = a.value();
  const auto& y = b.value();
  BasicTensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  const std::size_t ia = a.index(), ib = b.index();
  return tape.record(std::move(out), {ia, ib}, [ia, ib](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.requires_grad(ia)) {
      auto& ga = t.grad_accumulator(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.requires_grad(ib)) {
      auto& gb = t.grad_accumulator(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  Tape<T>& tape = common_tape(a, b, "mul");
  require_same_shape(a, b, "mul");
  const auto& x = a.value();
  const auto& y = b.value();
  BasicTensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  const std::size_t ia = a.index(), ib = b.index();
  return tape.record(std::move(out), {ia, ib}, [ia, ib](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& x = t.value(ia);
    const auto& y = t.value(ib);
    if (t.requires_grad(ia)) {
      auto& ga = t.grad_accumulator(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
    }
    if (t.requires_grad(ib)) {
      auto& gb = t.grad_accumulator(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * x[i];
    }
  });
}

template <typename T>
Var<T> div(Var<T> a, Var<T> b) {
  Tape<T>& tape = common_tape(a, b, "div");
  require_same_shape(a, b, "div");
  const auto& x = a.value();
  const auto& y = b.value();
  BasicTensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] / y[i];
  require_finite(out, "div");
  const std::size_t ia = a.index(), ib = b.index();
  return tape.record(std::move(out), {ia, ib}, [ia, ib](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& y = t.value(ib);
    const auto& q = t.value(self);
    if (t.requires_grad(ia)) {
      auto& ga = t.grad_accumulator(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / y[i];
    }
    if (t.requires_grad(ib)) {
      auto& gb = t.grad_accumulator(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i] * q[i] / y[i];
    }
  });
}

template <typename T>
Var<T> scale(Var<T> a, T factor) {
  return unary(a, [factor](T v) { return v * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Var<T> add_scalar(Var<T> a, T offset) {
  return unary(a, [offset](T v) { return v + offset; }, [](T, T) { return T(1); });
}

template <typename T>
Var<T> square(Var<T> a) {
  return unary(a, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <typename T>
Var<T> sqrt(Var<T> a) {
  for (T v : a.value().values()) {
    if (!(v > T(0))) throw NumericError("sqrt: argument must be positive");
  }
  return unary(a, [](T v) { return std::sqrt(v); }, [](T, T y) { return T(0.5) / y; });
}

template <typename T>
Var<T> leaky_relu(Var<T> x, T slope) {
  require_finite(x.value(), "leaky_relu");
  const T fault = debug::backward_fault() ? T(1.5) : T(1);
  return unary(
      x, [slope](T v) { return v >= T(0) ? v : slope * v; },
      [slope, fault](T v, T) { return fault * (v >= T(0) ? T(1) : slope); });
}

template <typename T>
Var<T> sum(Var<T> a) {
  Tape<T>& tape = *a.tape();
  T acc = 0;
  for (T v : a.value().values()) acc += v;
  const std::size_t ia = a.index();
  return tape.record(BasicTensor<T>::scalar(acc), {ia}, [ia](Tape<T>& t, std::size_t self) {
    const T g = t.grad(self)[0];
    auto& ga = t.grad_accumulator(ia);
    for (auto& v : ga.values()) v += g;
  });
}

template <typename T>
Var<T> mean(Var<T> a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw DimensionError("mean: empty tensor");
  return scale(sum(a), T(1) / T(n));
}

namespace {
template <typename T, typename Better>
Var<T> extremum(Var<T> a, Better better, const char* op) {
  const auto& x = a.value();
  if (x.empty()) throw DimensionError(std::string(op) + ": empty tensor");
  std::size_t best = 0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    if (better(x[i], x[best])) best = i;
  }
  const std::size_t ia = a.index();
  return a.tape()->record(BasicTensor<T>::scalar(x[best]), {ia}, [ia, best](Tape<T>& t, std::size_t self) {
    t.grad_accumulator(ia)[best] += t.grad(self)[0];
  });
}
}  // namespace

template <typename T>
Var<T> max(Var<T> a) {
  return extremum(a, [](T u, T v) { return u > v; }, "max");
}

template <typename T>
Var<T> min(Var<T> a) {
  return extremum(a, [](T u, T v) { return u < v; }, "min");
}

template <typename T>
Var<T> conv2d(Var<T> input, Var<T> kernel, Var<T> bias, int stride, int padding) {
  Tape<T>& tape = common_tape(input, kernel, "conv2d");
  common_tape(input, bias, "conv2d");
  require_rank4(input, "conv2d input");
  require_rank4(kernel, "conv2d kernel");
  const auto& x = input.value();
  const auto& k = kernel.value();
  if (k.dim(1) != x.dim(1)) {
    throw DimensionError("conv2d: kernel expects " + std::to_string(k.dim(1)) + " input channels, got " +
                         std::to_string(x.dim(1)));
  }
  if (bias.value().shape() != Shape{k.dim(0)}) {
    throw DimensionError("conv2d: bias shape " + shape_string(bias.shape()) + " does not match " +
                         std::to_string(k.dim(0)) + " output channels");
  }
  if (stride < 1 || padding < 0) throw ContractError("conv2d: stride must be >= 1 and padding >= 0");
  const long padded_h = long(x.dim(2)) + 2L * padding - long(k.dim(2));
  const long padded_w = long(x.dim(3)) + 2L * padding - long(k.dim(3));
  if (padded_h < 0 || padded_w < 0) throw DimensionError("conv2d: kernel larger than padded input");
  require_finite(x, "conv2d");

  kernels::Conv2dGeometry geo{};
  geo.batch = x.dim(0);
  geo.in_channels = x.dim(1);
  geo.in_h = x.dim(2);
  geo.in_w = x.dim(3);
  geo.out_channels = k.dim(0);
  geo.kernel_h = k.dim(2);
  geo.kernel_w = k.dim(3);
  geo.out_h = std::size_t(padded_h / stride + 1);
  geo.out_w = std::size_t(padded_w / stride + 1);
  geo.stride = stride;
  geo.padding = padding;

  BasicTensor<T> out(Shape{geo.batch, geo.out_channels, geo.out_h, geo.out_w});
  kernels::conv2d_forward(geo, x.data(), k.data(), bias.value().data(), out.data());

  const std::size_t ix = input.index(), ik = kernel.index(), ib = bias.index();
  return tape.record(std::move(out), {ix, ik, ib}, [geo, ix, ik, ib](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.requires_grad(ix)) {
      kernels::conv2d_backward_input(geo, g.data(), t.value(ik).data(), t.grad_accumulator(ix).data());
    }
    T* gk = t.requires_grad(ik) ? t.grad_accumulator(ik).data() : nullptr;
    T* gb = t.requires_grad(ib) ? t.grad_accumulator(ib).data() : nullptr;
    if (gk || gb) kernels::conv2d_backward_params(geo, g.data(), t.value(ix).data(), gk, gb);
  });
}

template <typename T>
Var<T> upsample2x_nearest(Var<T> x) {
  require_rank4(x, "upsample2x_nearest");
  const auto& in = x.value();
  const std::size_t n = in.dim(0), c = in.dim(1), h = in.dim(2), w = in.dim(3);
  BasicTensor<T> out(Shape{n, c, 2 * h, 2 * w});
  for (std::size_t p = 0; p < n * c; ++p) {
    const T* src = in.data() + p * h * w;
    T* dst = out.data() + p * 4 * h * w;
    for (std::size_t y = 0; y < 2 * h; ++y) {
      for (std::size_t xx = 0; xx < 2 * w; ++xx) dst[y * 2 * w + xx] = src[(y / 2) * w + xx / 2];
    }
  }
  const std::size_t ia = x.index();
  return x.tape()->record(std::move(out), {ia}, [ia, n, c, h, w](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& gi = t.grad_accumulator(ia);
    for (std::size_t p = 0; p < n * c; ++p) {
      const T* src = g.data() + p * 4 * h * w;
      T* dst = gi.data() + p * h * w;
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t xx = 0; xx < w; ++xx) {
          const T* r0 = src + (2 * y) * 2 * w + 2 * xx;
          const T* r1 = r0 + 2 * w;
          dst[y * w + xx] += (r0[0] + r0[1]) + (r1[0] + r1[1]);
        }
      }
    }
  });
}

template <typename T>
Var<T> concat_channels(Var<T> a, Var<T> b) {
  Tape<T>& tape = common_tape(a, b, "concat_channels");
  require_rank4(a, "concat_channels");
  require_rank4(b, "concat_channels");
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  if (sa[0] != sb[0] || sa[2] != sb[2] || sa[3] != sb[3]) {
    throw DimensionError("concat_channels: incompatible shapes " + shape_string(sa) + " and " +
                         shape_string(sb));
  }
  const std::size_t n = sa[0], ca = sa[1], cb = sb[1], plane = sa[2] * sa[3];
  BasicTensor<T> out(Shape{n, ca + cb, sa[2], sa[3]});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(a.value().data() + i * ca * plane, ca * plane, out.data() + i * (ca + cb) * plane);
    std::copy_n(b.value().data() + i * cb * plane, cb * plane, out.data() + (i * (ca + cb) + ca) * plane);
  }
  const std::size_t ia = a.index(), ib = b.index();
  return tape.record(std::move(out), {ia, ib}, [=](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    for (std::size_t i = 0; i < n; ++i) {
      const T* src = g.data() + i * (ca + cb) * plane;
      if (t.requires_grad(ia)) {
        T* dst = t.grad_accumulator(ia).data() + i * ca * plane;
        for (std::size_t j = 0; j < ca * plane; ++j) dst[j] += src[j];
      }
      if (t.requires_grad(ib)) {
        T* dst = t.grad_accumulator(ib).data() + i * cb * plane;
        for (std::size_t j = 0; j < cb * plane; ++j) dst[j] += src[ca * plane + j];
      }
    }
  });
}

template <typename T>
Var<T> slice_channels(Var<T> x, std::size_t begin, std::size_t count) {
  require_rank4(x, "slice_channels");
  const auto& s = x.shape();
  if (begin + count > s[1]) throw DimensionError("slice_channels: channel range out of bounds");
  const std::size_t n = s[0], c = s[1], plane = s[2] * s[3];
  BasicTensor<T> out(Shape{n, count, s[2], s[3]});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(x.value().data() + (i * c + begin) * plane, count * plane, out.data() + i * count * plane);
  }
  const std::size_t ia = x.index();
  return x.tape()->record(std::move(out), {ia}, [=](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& gi = t.grad_accumulator(ia);
    for (std::size_t i = 0; i < n; ++i) {
      const T* src = g.data() + i * count * plane;
      T* dst = gi.data() + (i * c + begin) * plane;
      for (std::size_t j = 0; j < count * plane; ++j) dst[j] += src[j];
    }
  });
}

namespace {

// Separable zero-padded window sum over each H x W plane. The operator is
// symmetric, so it is its own adjoint.
template <typename T>
void box_sum_planes(const T* in, T* out, std::size_t planes, std::size_t h, std::size_t w, long radius) {
  std::vector<T> row_pass(h * w);
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = in + p * h * w;
    T* dst = out + p * h * w;
    for (std::size_t y = 0; y < h; ++y) {
      for (long x = 0; x < long(w); ++x) {
        T acc = 0;
        const long lo = std::max(0L, x - radius), hi = std::min(long(w) - 1, x + radius);
        for (long j = lo; j <= hi; ++j) acc += src[y * w + j];
        row_pass[y * w + x] = acc;
      }
    }
    for (long y = 0; y < long(h); ++y) {
      const long lo = std::max(0L, y - radius), hi = std::min(long(h) - 1, y + radius);
      for (std::size_t x = 0; x < w; ++x) {
        T acc = 0;
        for (long j = lo; j <= hi; ++j) acc += row_pass[j * w + x];
        dst[y * w + x] = acc;
      }
    }
  }
}

}  // namespace

template <typename T>
Var<T> box_sum(Var<T> x, int window) {
  require_rank4(x, "box_sum");
  if (window < 1 || window % 2 == 0) throw ContractError("box_sum: window must be odd and positive");
  const auto& s = x.shape();
  const std::size_t planes = s[0] * s[1], h = s[2], w = s[3];
  const long radius = window / 2;
  BasicTensor<T> out(s);
  box_sum_planes(x.value().data(), out.data(), planes, h, w, radius);
  const std::size_t ia = x.index();
  return x.tape()->record(std::move(out), {ia}, [=](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    BasicTensor<T> back(g.shape());
    box_sum_planes(g.data(), back.data(), planes, h, w, radius);
    auto& gi = t.grad_accumulator(ia);
    for (std::size_t i = 0; i < back.size(); ++i) gi[i] += back[i];
  });
}

template <typename T>
Var<T> diff_x(Var<T> x) {
  require_rank4(x, "diff_x");
  const auto& s = x.shape();
  const std::size_t rows = s[0] * s[1] * s[2], w = s[3];
  BasicTensor<T> out(s);
  const T* in = x.value().data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j + 1 < w; ++j) out[r * w + j] = in[r * w + j + 1] - in[r * w + j];
  }
  const std::size_t ia = x.index();
  return x.tape()->record(std::move(out), {ia}, [=](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& gi = t.grad_accumulator(ia);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j + 1 < w; ++j) {
        gi[r * w + j + 1] += g[r * w + j];
        gi[r * w + j] -= g[r * w + j];
      }
    }
  });
}

template <typename T>
Var<T> diff_y(Var<T> x) {
  require_rank4(x, "diff_y");
  const auto& s = x.shape();
  const std::size_t planes = s[0] * s[1], h = s[2], w = s[3];
  BasicTensor<T> out(s);
  const T* in = x.value().data();
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t y = 0; y + 1 < h; ++y) {
      for (std::size_t j = 0; j < w; ++j) {
        const std::size_t i = (p * h + y) * w + j;
        out[i] = in[i + w] - in[i];
      }
    }
  }
  const std::size_t ia = x.index();
  return x.tape()->record(std::move(out), {ia}, [=](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& gi = t.grad_accumulator(ia);
    for (std::size_t p = 0; p < planes; ++p) {
      for (std::size_t y = 0; y + 1 < h; ++y) {
        for (std::size_t j = 0; j < w; ++j) {
          const std::size_t i = (p * h + y) * w + j;
          gi[i + w] += g[i];
          gi[i] -= g[i];
        }
      }
    }
  });
}

template <typename T>
Var<T> warp_bilinear(Var<T> image, Var<T> field) {
  Tape<T>& tape = common_tape(image, field, "warp_bilinear");
  require_rank4(image, "warp_bilinear image");
  require_rank4(field, "warp_bilinear field");
  const auto& si = image.shape();
  const auto& sf = field.shape();
  if (sf[0] != si[0] || sf[1] != 2 || sf[2] != si[2] || sf[3] != si[3]) {
    throw DimensionError("warp_bilinear: field shape " + shape_string(sf) + " incompatible with image " +
                         shape_string(si));
  }
  require_finite(field.value(), "warp_bilinear field");
  BasicTensor<T> out(si);
  kernels::warp_bilinear_forward(image.value(), field.value(), out);
  const std::size_t ii = image.index(), iff = field.index();
  return tape.record(std::move(out), {ii, iff}, [ii, iff](Tape<T>& t, std::size_t self) {
    BasicTensor<T>* gi = t.requires_grad(ii) ? &t.grad_accumulator(ii) : nullptr;
    BasicTensor<T>* gf = t.requires_grad(iff) ? &t.grad_accumulator(iff) : nullptr;
    kernels::warp_bilinear_backward(t.value(ii), t.value(iff), t.grad(self), gi, gf);
  });
}

#define SGLDREG_INSTANTIATE(T)                                                   \
  template Var<T> add(Var<T>, Var<T>);                                         \
  template Var<T> sub(Var<T>, Var<T>);                                         \
  template Var<T> mul(Var<T>, Var<T>);                                         \
  template Var<T> div(Var<T>, Var<T>);                                         \
  template Var<T> scale(Var<T>, T);                                            \
  template Var<T> add_scalar(Var<T>, T);                                       \
  template Var<T> square(Var<T>);                                              \
  template Var<T> sqrt(Var<T>);                                                \
  template Var<T> leaky_relu(Var<T>, T);                                       \
  template Var<T> sum(Var<T>);                                                 \
  template Var<T> mean(Var<T>);                                                \
  template Var<T> max(Var<T>);                                                 \
  template Var<T> min(Var<T>);                                                 \
  template Var<T> conv2d(Var<T>, Var<T>, Var<T>, int, int);                    \
  template Var<T> upsample2x_nearest(Var<T>);                                  \
  template Var<T> concat_channels(Var<T>, Var<T>);                             \
  template Var<T> slice_channels(Var<T>, std::size_t, std::size_t);            \
  template Var<T> box_sum(Var<T>, int);                                        \
  template Var<T> diff_x(Var<T>);                                              \
  template Var<T> diff_y(Var<T>);                                              \
  template Var<T> warp_bilinear(Var<T>, Var<T>);

SGLDREG_INSTANTIATE(float)
SGLDREG_INSTANTIATE(double)

#undef SGLDREG_INSTANTIATE

}  // namespace sgldreg
