#include "sgldreg/optim.hpp"

#include <cmath>
#include <string>

#include "sgldreg/errors.hpp"

namespace sgldreg {

void AdamSgldConfig::validate() const {
  if (!(eta > 0.0)) throw ConfigError("eta must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must lie in [0,1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must lie in [0,1)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
  if (!(alpha > 0.0)) throw ConfigError("alpha must be > 0 (use inf to disable noise)");
}

template <typename T>
AdamSgldState<T> AdamSgldState<T>::init(const BasicParameterSet<T>& params, const AdamSgldConfig& config,
                                        std::uint64_t seed) {
  config.validate();
  AdamSgldState state;
  state.config = config;
  for (const auto& p : params) {
    state.m.emplace_back(p.value.shape());
    state.v.emplace_back(p.value.shape());
  }
  state.rng.seed(seed);
  return state;
}

template <typename T>
std::vector<BasicTensor<T>> step_size(const AdamSgldState<T>& state) {
  if (state.t < 1) throw ContractError("step_size: no update has been applied yet (t = 0)");
  const auto& c = state.config;
  const double correction = 1.0 - std::pow(c.beta2, double(state.t));
  std::vector<BasicTensor<T>> out;
  out.reserve(state.v.size());
  for (const auto& v : state.v) {
    BasicTensor<T> s(v.shape());
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double v_hat = double(v[i]) / correction;
      s[i] = static_cast<T>(c.eta / std::sqrt(v_hat + c.epsilon));
    }
    out.push_back(std::move(s));
  }
  return out;
}

template <typename T>
std::vector<BasicTensor<T>> inject_noise(std::span<const BasicTensor<T>> grads,
                                         std::span<const BasicTensor<T>> step, double alpha,
                                         std::mt19937_64& rng) {
  if (!(alpha > 0.0)) throw ConfigError("inject_noise: alpha must be > 0");
  if (grads.size() != step.size()) throw DimensionError("inject_noise: step sizes do not match gradients");
  std::vector<BasicTensor<T>> out(grads.begin(), grads.end());
  if (alpha == std::numeric_limits<double>::infinity()) return out;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t p = 0; p < out.size(); ++p) {
    require_shape(step[p].shape(), out[p].shape(), "inject_noise");
    for (std::size_t i = 0; i < out[p].size(); ++i) {
      const double sd = std::sqrt(double(step[p][i]) / alpha);
      out[p][i] = static_cast<T>(double(out[p][i]) + sd * normal(rng));
    }
  }
  return out;
}

template <typename T>
std::vector<BasicTensor<T>> inject_noise(std::span<const BasicTensor<T>> grads, AdamSgldState<T>& state) {
  if (!state.config.noise_enabled() || state.t == 0) {
    return std::vector<BasicTensor<T>>(grads.begin(), grads.end());
  }
  const auto step = step_size(state);
  return inject_noise<T>(grads, step, state.config.alpha, state.rng);
}

template <typename T>
void adam_update(BasicParameterSet<T>& params, std::span<const BasicTensor<T>> grads, AdamSgldState<T>& state) {
  if (grads.size() != params.size() || state.m.size() != params.size()) {
    throw DimensionError("adam_update: gradient count does not match parameters");
  }
  const auto& c = state.config;
  const std::uint64_t t = state.t + 1;
  const double bc1 = 1.0 - std::pow(c.beta1, double(t));
  const double bc2 = 1.0 - std::pow(c.beta2, double(t));
  const T b1 = T(c.beta1), b2 = T(c.beta2);

  // Compute into scratch first so a non-finite step leaves the state untouched.
  std::vector<BasicTensor<T>> new_m = state.m, new_v = state.v, new_theta;
  new_theta.reserve(params.size());
  for (std::size_t p = 0; p < params.size(); ++p) {
    require_shape(grads[p].shape(), params[p].value.shape(), "adam_update");
    BasicTensor<T> theta = params[p].value;
    auto& m = new_m[p];
    auto& v = new_v[p];
    const auto& g = grads[p];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = b1 * m[i] + (T(1) - b1) * g[i];
      v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
      const double m_hat = double(m[i]) / bc1;
      const double v_hat = double(v[i]) / bc2;
      const double s = c.eta / std::sqrt(v_hat + c.epsilon);
      theta[i] = static_cast<T>(double(theta[i]) - s * m_hat);
      if (!std::isfinite(theta[i])) {
        throw NumericError("adam_update: non-finite update for parameter '" + params[p].id + "'");
      }
    }
    new_theta.push_back(std::move(theta));
  }
  state.m = std::move(new_m);
  state.v = std::move(new_v);
  for (std::size_t p = 0; p < params.size(); ++p) params[p].value = std::move(new_theta[p]);
  state.t = t;
}

void SnapshotSchedule::validate() const {
  if (total_iterations == 0) throw ConfigError("total iterations must be >= 1");
  if (burn_in >= total_iterations) throw ConfigError("burn_in must be < total iterations");
  if (thinning == 0) throw ConfigError("thinning must be >= 1");
}

bool SnapshotSchedule::retains(std::uint64_t iteration) const {
  return iteration > burn_in && iteration <= total_iterations && (iteration - burn_in - 1) % thinning == 0;
}

std::uint64_t SnapshotSchedule::retained_count() const {
  return (total_iterations - burn_in + thinning - 1) / thinning;
}

#define SGLDREG_INSTANTIATE(T)                                                                             \
  template struct AdamSgldState<T>;                                                                        \
  template std::vector<BasicTensor<T>> step_size(const AdamSgldState<T>&);                                 \
  template std::vector<BasicTensor<T>> inject_noise(std::span<const BasicTensor<T>>,                       \
                                                    std::span<const BasicTensor<T>>, double, std::mt19937_64&); \
  template std::vector<BasicTensor<T>> inject_noise(std::span<const BasicTensor<T>>, AdamSgldState<T>&);   \
  template void adam_update(BasicParameterSet<T>&, std::span<const BasicTensor<T>>, AdamSgldState<T>&);

SGLDREG_INSTANTIATE(float)
SGLDREG_INSTANTIATE(double)

#undef SGLDREG_INSTANTIATE

}  // namespace sgldreg
