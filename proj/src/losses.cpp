#include "sgldreg/losses.hpp"

#include "sgldreg/errors.hpp"

namespace sgldreg {

Similarity parse_similarity(const std::string& name) {
  if (name == "mse" || name == "MSE") return Similarity::Mse;
  if (name == "neg_lcc" || name == "lcc" || name == "NegLCC") return Similarity::NegLcc;
  throw ConfigError("unknown similarity '" + name + "' (expected mse or neg_lcc)");
}

std::string similarity_name(Similarity s) { return s == Similarity::Mse ? "mse" : "neg_lcc"; }

void LossConfig::validate() const {
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (similarity == Similarity::NegLcc && (lcc_window < 3 || lcc_window % 2 == 0)) {
    throw ConfigError("lcc_window must be odd and >= 3");
  }
}

template <typename T>
Var<T> mse(Var<T> a, Var<T> b) {
  return mean(square(sub(a, b)));
}

template <typename T>
Var<T> neg_lcc(Var<T> a, Var<T> b, int window) {
  if (a.shape() != b.shape()) throw DimensionError("neg_lcc: shape mismatch");
  Tape<T>& tape = *a.tape();
  Var<T> ones = tape.constant(BasicTensor<T>(a.shape(), T(1)));
  const BasicTensor<T> counts = box_sum(ones, window).value();
  BasicTensor<T> inv_count(counts.shape());
  for (std::size_t i = 0; i < counts.size(); ++i) inv_count[i] = T(1) / counts[i];
  Var<T> inv_n = tape.constant(std::move(inv_count));

  Var<T> sa = box_sum(a, window);
  Var<T> sb = box_sum(b, window);
  Var<T> saa = box_sum(square(a), window);
  Var<T> sbb = box_sum(square(b), window);
  Var<T> sab = box_sum(mul(a, b), window);

  Var<T> cross = sab - sa * sb * inv_n;
  Var<T> var_a = saa - square(sa) * inv_n;
  Var<T> var_b = sbb - square(sb) * inv_n;
  Var<T> cc = square(cross) / add_scalar(var_a * var_b, T(kLccEpsilon));
  return scale(mean(cc), T(-1));
}

template <typename T>
Var<T> smoothness(Var<T> field) {
  // Both difference maps have the field's size, so the mean over all four
  // (component, axis) combinations is the average of the two means.
  return scale(mean(square(diff_x(field))) + mean(square(diff_y(field))), T(0.5));
}

template <typename T>
Var<T> weight_penalty(std::span<const Var<T>> params) {
  if (params.empty()) throw ContractError("weight_penalty: no parameters");
  Var<T> acc = sum(square(params[0]));
  for (std::size_t i = 1; i < params.size(); ++i) acc = acc + sum(square(params[i]));
  return acc;
}

template <typename T>
Var<T> similarity_term(const LossConfig& config, Var<T> fixed, Var<T> warped) {
  return config.similarity == Similarity::Mse ? mse(fixed, warped) : neg_lcc(fixed, warped, config.lcc_window);
}

template <typename T>
LossTerms<T> total_loss(const UNetConfig& unet, const LossConfig& config, std::span<const Var<T>> params,
                        Var<T> moving, Var<T> fixed) {
  LossTerms<T> terms;
  terms.field = unet_forward<T>(unet, params, moving, fixed);
  terms.warped = warp_bilinear(moving, terms.field);
  terms.similarity = similarity_term(config, fixed, terms.warped);
  terms.smoothness = smoothness(terms.field);
  terms.decay = weight_penalty(params);
  terms.total = terms.similarity + scale(terms.smoothness, T(config.lambda)) +
                scale(terms.decay, T(config.weight_decay));
  return terms;
}

#define SGLDREG_INSTANTIATE(T)                                                                        \
  template Var<T> mse(Var<T>, Var<T>);                                                                \
  template Var<T> neg_lcc(Var<T>, Var<T>, int);                                                       \
  template Var<T> smoothness(Var<T>);                                                                 \
  template Var<T> weight_penalty(std::span<const Var<T>>);                                            \
  template Var<T> similarity_term(const LossConfig&, Var<T>, Var<T>);                                 \
  template LossTerms<T> total_loss(const UNetConfig&, const LossConfig&, std::span<const Var<T>>, Var<T>, \
                                   Var<T>);

SGLDREG_INSTANTIATE(float)
SGLDREG_INSTANTIATE(double)

#undef SGLDREG_INSTANTIATE

}  // namespace sgldreg
