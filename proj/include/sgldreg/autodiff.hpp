#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "sgldreg/tensor.hpp"

namespace sgldreg {

template <typename T>
class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
template <typename T>
class Var {
 public:
  Var() = default;

  Tape<T>* tape() const noexcept { return tape_; }
  std::size_t index() const noexcept { return index_; }
  bool valid() const noexcept { return tape_ != nullptr; }

  const BasicTensor<T>& value() const;
  const BasicTensor<T>& grad() const;
  const Shape& shape() const { return value().shape(); }

 private:
  friend class Tape<T>;
  Var(Tape<T>* tape, std::size_t index) : tape_(tape), index_(index) {}

  Tape<T>* tape_ = nullptr;
  std::size_t index_ = 0;
};

// Append-only record of executed primitives. Node order is a topological
// order, so backward() walks it in reverse.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> leaf(BasicTensor<T> value, bool requires_grad = true);
  Var<T> constant(BasicTensor<T> value) { return leaf(std::move(value), false); }

  // For primitive implementations: records `value` computed from `inputs`.
  // The node requires grad iff any input does; `backward` is dropped otherwise.
  Var<T> record(BasicTensor<T> value, std::vector<std::size_t> inputs, BackwardFn backward);

  // Seeds d(loss)/d(loss) = 1 and propagates to every reachable node.
  void backward(Var<T> loss);

  const BasicTensor<T>& value(std::size_t i) const { return nodes_.at(i).value; }
  const BasicTensor<T>& grad(std::size_t i) const;
  BasicTensor<T>& grad_accumulator(std::size_t i);
  bool requires_grad(std::size_t i) const { return nodes_.at(i).requires_grad; }

  std::size_t size() const noexcept { return nodes_.size(); }
  // Nodes whose backward rule ran during the last backward() call.
  std::size_t last_backward_visits() const noexcept { return visits_; }

 private:
  struct Node {
    BasicTensor<T> value;
    mutable BasicTensor<T> grad;
    mutable bool has_grad = false;
    bool requires_grad = false;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  std::size_t visits_ = 0;
};

template <typename T>
const BasicTensor<T>& Var<T>::value() const {
  return tape_->value(index_);
}

template <typename T>
const BasicTensor<T>& Var<T>::grad() const {
  return tape_->grad(index_);
}

namespace debug {
// When set, leaky_relu's backward rule scales its gradient by 1.5. Used to
// confirm the gradient checks catch a broken rule.
void set_backward_fault(bool enabled);
bool backward_fault();
}  // namespace debug

// Elementwise (operands must share a shape).
template <typename T> Var<T> add(Var<T> a, Var<T> b);
template <typename T> Var<T> sub(Var<T> a, Var<T> b);
template <typename T> Var<T> mul(Var<T> a, Var<T> b);
template <typename T> Var<T> div(Var<T> a, Var<T> b);
template <typename T> Var<T> scale(Var<T> a, T factor);
template <typename T> Var<T> add_scalar(Var<T> a, T offset);
template <typename T> Var<T> square(Var<T> a);
template <typename T> Var<T> sqrt(Var<T> a);
template <typename T> Var<T> leaky_relu(Var<T> x, T slope);

// Reductions to a one-element tensor.
template <typename T> Var<T> sum(Var<T> a);
template <typename T> Var<T> mean(Var<T> a);
template <typename T> Var<T> max(Var<T> a);  // gradient goes to the first maximal element
template <typename T> Var<T> min(Var<T> a);

// Cross-correlation, zero padding. input (N,Cin,H,W), kernel (Cout,Cin,kh,kw), bias (Cout).
template <typename T> Var<T> conv2d(Var<T> input, Var<T> kernel, Var<T> bias, int stride, int padding);
template <typename T> Var<T> upsample2x_nearest(Var<T> x);
template <typename T> Var<T> concat_channels(Var<T> a, Var<T> b);
template <typename T> Var<T> slice_channels(Var<T> x, std::size_t begin, std::size_t count);

// Zero-padded window sum over an odd `window` x `window` neighbourhood, per channel.
template <typename T> Var<T> box_sum(Var<T> x, int window);
// Forward differences along x (last axis) / y; the last column / row is zero.
template <typename T> Var<T> diff_x(Var<T> x);
template <typename T> Var<T> diff_y(Var<T> x);

// image (N,C,H,W) resampled at p + field(p); field (N,2,H,W) holds (dx, dy).
template <typename T> Var<T> warp_bilinear(Var<T> image, Var<T> field);

template <typename T> Var<T> operator+(Var<T> a, Var<T> b) { return add(a, b); }
template <typename T> Var<T> operator-(Var<T> a, Var<T> b) { return sub(a, b); }
template <typename T> Var<T> operator*(Var<T> a, Var<T> b) { return mul(a, b); }
template <typename T> Var<T> operator/(Var<T> a, Var<T> b) { return div(a, b); }

}  // namespace sgldreg
