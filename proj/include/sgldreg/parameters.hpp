#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "sgldreg/autodiff.hpp"
#include "sgldreg/tensor.hpp"

namespace sgldreg {

template <typename T>
struct BasicParameter {
  std::string id;
  BasicTensor<T> value;
  BasicTensor<T> grad;  // always shaped like value
};

// Ordered, id-addressable set of trainable tensors.
template <typename T>
class BasicParameterSet {
 public:
  using Parameter = BasicParameter<T>;

  void add(std::string id, BasicTensor<T> value);

  std::size_t size() const noexcept { return params_.size(); }
  bool empty() const noexcept { return params_.empty(); }
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  const Parameter& at(const std::string& id) const;
  Parameter& at(const std::string& id);
  bool contains(const std::string& id) const { return index_.count(id) != 0; }

  auto begin() noexcept { return params_.begin(); }
  auto end() noexcept { return params_.end(); }
  auto begin() const noexcept { return params_.begin(); }
  auto end() const noexcept { return params_.end(); }

  std::size_t scalar_count() const;
  void zero_grad();
  std::vector<BasicTensor<T>> grads() const;

  // Same ids and shapes, in the same order.
  bool same_layout(const BasicParameterSet& other) const;

  template <typename U>
  BasicParameterSet<U> cast() const {
    BasicParameterSet<U> out;
    for (const auto& p : params_) out.add(p.id, p.value.template cast<U>());
    return out;
  }

 private:
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t> index_;
};

using ParameterSet = BasicParameterSet<float>;
using ParameterSetD = BasicParameterSet<double>;

// Registers every parameter as a gradient-tracking leaf (or a constant when
// `track_grad` is false, for inference).
template <typename T>
std::vector<Var<T>> bind(Tape<T>& tape, const BasicParameterSet<T>& params, bool track_grad = true);

// Copies the gradients of bound leaves into params[i].grad.
template <typename T>
void collect_grads(const std::vector<Var<T>>& bound, BasicParameterSet<T>& params);

}  // namespace sgldreg
