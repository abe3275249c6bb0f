#pragma once

#include <span>
#include <string>

#include "sgldreg/autodiff.hpp"
#include "sgldreg/unet.hpp"

namespace sgldreg {

enum class Similarity { Mse, NegLcc };

Similarity parse_similarity(const std::string& name);
std::string similarity_name(Similarity s);

struct LossConfig {
  Similarity similarity = Similarity::Mse;
  double lambda = 0.05;  // smoothness weight
  int lcc_window = 9;
  double weight_decay = 1e-5;

  void validate() const;
};

// Stabilizer in the squared local correlation denominator.
inline constexpr double kLccEpsilon = 1e-5;

template <typename T>
Var<T> mse(Var<T> a, Var<T> b);

// -mean_p CC(p), CC = cross^2 / (var_a * var_b + eps) over the window
// centred on p. Window sums are zero-padded and local means divide by the
// number of in-image pixels, so CC is exactly invariant to affine intensity
// changes.
template <typename T>
Var<T> neg_lcc(Var<T> a, Var<T> b, int window);

// Mean of squared forward differences over both components and both axes.
template <typename T>
Var<T> smoothness(Var<T> field);

// Sum of squares of all parameters.
template <typename T>
Var<T> weight_penalty(std::span<const Var<T>> params);

template <typename T>
Var<T> similarity_term(const LossConfig& config, Var<T> fixed, Var<T> warped);

template <typename T>
struct LossTerms {
  Var<T> total;
  Var<T> similarity;
  Var<T> smoothness;
  Var<T> decay;
  Var<T> field;
  Var<T> warped;
};

// S(fixed, moving o f(moving, fixed)) + lambda * R(field) + weight_decay * sum(theta^2).
template <typename T>
LossTerms<T> total_loss(const UNetConfig& unet, const LossConfig& config, std::span<const Var<T>> params,
                        Var<T> moving, Var<T> fixed);

}  // namespace sgldreg
