#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "sgldreg/parameters.hpp"
#include "sgldreg/tensor.hpp"

namespace sgldreg {

struct AdamSgldConfig {
  double eta = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Noise variance is s/alpha; infinity disables injection (plain Adam).
  double alpha = 100.0;

  bool noise_enabled() const { return alpha != std::numeric_limits<double>::infinity(); }
  void validate() const;
};

template <typename T>
struct AdamSgldState {
  AdamSgldConfig config;
  std::vector<BasicTensor<T>> m;
  std::vector<BasicTensor<T>> v;  // elementwise >= 0
  std::uint64_t t = 0;            // completed updates
  std::mt19937_64 rng;

  static AdamSgldState init(const BasicParameterSet<T>& params, const AdamSgldConfig& config, std::uint64_t seed);
};

// s = eta / sqrt(v_hat + epsilon) per element. Requires state.t >= 1.
template <typename T>
std::vector<BasicTensor<T>> step_size(const AdamSgldState<T>& state);

// grad + N(0, step/alpha) per element, drawn in parameter order from `rng`.
template <typename T>
std::vector<BasicTensor<T>> inject_noise(std::span<const BasicTensor<T>> grads,
                                         std::span<const BasicTensor<T>> step, double alpha, std::mt19937_64& rng);

// Noise scaled by the step size left by the previous update. Before the
// first update no second-moment estimate exists and the gradient is returned
// unchanged. The input buffers are never modified.
template <typename T>
std::vector<BasicTensor<T>> inject_noise(std::span<const BasicTensor<T>> grads, AdamSgldState<T>& state);

// One Adam step with bias correction: m, v are exponential moving averages
// of the (noisy) gradient and its square; theta -= s * m_hat.
template <typename T>
void adam_update(BasicParameterSet<T>& params, std::span<const BasicTensor<T>> grads, AdamSgldState<T>& state);

// Retains iterations t_b+1, t_b+1+thinning, ... <= N (1-based, weights after update t).
struct SnapshotSchedule {
  std::uint64_t total_iterations = 800;
  std::uint64_t burn_in = 720;
  std::uint64_t thinning = 1;

  void validate() const;
  bool retains(std::uint64_t iteration) const;
  std::uint64_t retained_count() const;
};

}  // namespace sgldreg
