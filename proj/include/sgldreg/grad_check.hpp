#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "sgldreg/autodiff.hpp"

namespace sgldreg {

using LossFunction = std::function<Var<double>(Tape<double>&, std::span<const Var<double>>)>;

struct GradCheckResult {
  double max_error = 0.0;  // max |analytic - numeric| / max(1, |numeric|)
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
};

// Compares reverse-mode gradients of `loss` against central differences.
// `samples` == 0 checks every coordinate; otherwise that many coordinates are
// drawn uniformly with `seed`. eps must lie in [1e-7, 1e-4].
GradCheckResult grad_check(const LossFunction& loss, const std::vector<TensorD>& inputs, double eps = 1e-6,
                           std::size_t samples = 0, std::uint64_t seed = 1);

}  // namespace sgldreg
