#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "sgldreg/errors.hpp"
#include "sgldreg/optim.hpp"
#include "test_support.hpp"

using namespace sgldreg;
using testing::random_tensor;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

AdamSgldConfig plain_adam() {
  AdamSgldConfig c;
  c.alpha = kInf;
  return c;
}

ParameterSetD single(TensorD value) {
  ParameterSetD p;
  p.add("w", std::move(value));
  return p;
}

struct Moments {
  double mean, variance, lag1;
};

Moments moments(const std::vector<double>& xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= double(xs.size());
  double var = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    var += (xs[i] - mean) * (xs[i] - mean);
    if (i + 1 < xs.size()) cov += (xs[i] - mean) * (xs[i + 1] - mean);
  }
  return {mean, var / double(xs.size() - 1), cov / var};
}

}  // namespace

TEST_CASE("optimizer config validation") {
  AdamSgldConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.noise_enabled());
  CHECK_FALSE(plain_adam().noise_enabled());
  for (double bad : {0.0, -1.0}) {
    c = AdamSgldConfig{};
    c.alpha = bad;
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }
  c = AdamSgldConfig{};
  c.beta1 = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = AdamSgldConfig{};
  c.eta = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("step_size examples and loop oracle") {
  auto params = single(TensorD({4}));
  auto state = AdamSgldState<double>::init(params, plain_adam(), 1);
  CHECK_THROWS_AS(step_size(state), ContractError);

  // Zero gradient: v_hat stays 0 and s = eta / sqrt(eps).
  adam_update<double>(params, std::vector<TensorD>{TensorD({4})}, state);
  const auto s0 = step_size(state)[0];
  for (double s : s0.values()) CHECK(s == doctest::Approx(1e-3 / std::sqrt(1e-8)).epsilon(1e-15));

  // Unit v_hat and epsilon negligible.
  state.v[0].fill(1.0 - 0.999);
  state.config.epsilon = 1e-300;
  const auto s1 = step_size(state)[0];
  for (double s : s1.values()) CHECK(s == doctest::Approx(1e-3).epsilon(1e-12));

  state.config.epsilon = 1e-8;
  state.t = 7;
  state.v[0] = random_tensor({4}, 2, 0.0, 0.01);
  const auto s = step_size(state)[0];
  for (std::size_t i = 0; i < 4; ++i) {
    const double v_hat = state.v[0][i] / (1.0 - std::pow(0.999, 7.0));
    CHECK(s[i] == doctest::Approx(1e-3 / std::sqrt(v_hat + 1e-8)).epsilon(1e-14));
    CHECK(s[i] > 0.0);
  }
}

TEST_CASE("zero gradient from a fresh state leaves parameters unchanged") {
  auto params = single(random_tensor({5}, 3));
  const auto before = params[0].value;
  auto state = AdamSgldState<double>::init(params, plain_adam(), 1);
  adam_update<double>(params, std::vector<TensorD>{TensorD({5})}, state);
  CHECK(bitwise_equal(params[0].value, before));
  CHECK(state.t == 1);
}

TEST_CASE("first step: bias correction recovers the gradient and the step is about eta") {
  auto params = single(TensorD({3}, 0.5));
  AdamSgldConfig c = plain_adam();
  c.epsilon = 1e-300;
  auto state = AdamSgldState<double>::init(params, c, 1);
  const TensorD g({3}, std::vector<double>{1.0, 1.0, 1.0});
  adam_update<double>(params, std::vector<TensorD>{g}, state);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(state.m[0][i] / (1.0 - 0.9) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(0.5 - params[0].value[i] == doctest::Approx(1e-3).epsilon(1e-10));
  }
}

TEST_CASE("noise-free updates follow a scalar Adam loop on a quadratic for 50 steps") {
  const double k[2] = {1.0, 10.0}, centre[2] = {0.5, -1.5};
  auto params = single(TensorD({2}, std::vector<double>{2.0, 1.0}));
  auto state = AdamSgldState<double>::init(params, plain_adam(), 1);

  double theta[2] = {2.0, 1.0}, m[2] = {0, 0}, v[2] = {0, 0};
  for (int t = 1; t <= 50; ++t) {
    TensorD g({2});
    for (int i = 0; i < 2; ++i) g[std::size_t(i)] = k[i] * (params[0].value[std::size_t(i)] - centre[i]);
    adam_update<double>(params, std::vector<TensorD>{g}, state);

    for (int i = 0; i < 2; ++i) {
      const double gi = k[i] * (theta[i] - centre[i]);
      m[i] = 0.9 * m[i] + 0.1 * gi;
      v[i] = 0.999 * v[i] + 0.001 * gi * gi;
      const double mh = m[i] / (1 - std::pow(0.9, t)), vh = v[i] / (1 - std::pow(0.999, t));
      theta[i] -= 1e-3 / std::sqrt(vh + 1e-8) * mh;
      CHECK(std::abs(params[0].value[std::size_t(i)] - theta[i]) <= 1e-10);
    }
  }
  CHECK(state.t == 50);
}

TEST_CASE("second moments stay non-negative and t counts updates") {
  auto params = single(random_tensor({20}, 4));
  auto state = AdamSgldState<double>::init(params, AdamSgldConfig{}, 5);
  std::mt19937_64 rng(6);
  for (std::uint64_t it = 1; it <= 30; ++it) {
    const auto g = random_tensor({20}, rng(), -10, 10);
    const auto noisy = inject_noise<double>(std::vector<TensorD>{g}, state);
    adam_update<double>(params, noisy, state);
    CHECK(state.t == it);
    for (double x : state.v[0].values()) CHECK(x >= 0.0);
  }
}

TEST_CASE("noise is disabled at alpha = inf and before the first update") {
  const std::vector<TensorD> g{random_tensor({6}, 7)};
  auto params = single(TensorD({6}));
  auto off = AdamSgldState<double>::init(params, plain_adam(), 1);
  off.t = 3;
  CHECK(bitwise_equal(inject_noise<double>(g, off)[0], g[0]));

  auto fresh = AdamSgldState<double>::init(params, AdamSgldConfig{}, 1);
  CHECK(bitwise_equal(inject_noise<double>(g, fresh)[0], g[0]));

  std::mt19937_64 rng(1);
  const std::vector<TensorD> step{TensorD({6}, 1e-3)};
  CHECK(bitwise_equal(inject_noise<double>(g, step, kInf, rng)[0], g[0]));
  CHECK_THROWS_AS(inject_noise<double>(g, step, 0.0, rng), ConfigError);
  CHECK_THROWS_AS(inject_noise<double>(g, step, -5.0, rng), ConfigError);
}

TEST_CASE("injected noise has variance s / alpha, zero mean and no lag-1 correlation") {
  const std::size_t n = 100000;
  const std::vector<TensorD> g{TensorD({n})};
  const std::vector<TensorD> step{TensorD({n}, 1e-3)};
  std::mt19937_64 rng(8);
  const auto noisy = inject_noise<double>(g, step, 100.0, rng);
  const std::vector<double> xs(noisy[0].values().begin(), noisy[0].values().end());
  const auto mo = moments(xs);
  const double target = 1e-3 / 100.0;
  CHECK(std::abs(mo.variance / target - 1.0) < 0.03);
  CHECK(std::abs(mo.mean) < 4.0 * std::sqrt(target / double(n)));
  CHECK(std::abs(mo.lag1) < 0.02);
}

TEST_CASE("noise is independent across iterations") {
  const std::vector<TensorD> g{TensorD({1})};
  const std::vector<TensorD> step{TensorD({1}, 1e-3)};
  std::mt19937_64 rng(9);
  std::vector<double> xs;
  for (int i = 0; i < 10000; ++i) xs.push_back(inject_noise<double>(g, step, 100.0, rng)[0][0]);
  CHECK(std::abs(moments(xs).lag1) < 0.02);
}

TEST_CASE("noise depends on the seed only and never touches the clean gradient") {
  const std::vector<TensorD> g{random_tensor({50}, 10)};
  const auto copy = g[0];
  auto params = single(TensorD({50}));
  auto a = AdamSgldState<double>::init(params, AdamSgldConfig{}, 11);
  auto b = AdamSgldState<double>::init(params, AdamSgldConfig{}, 11);
  auto c = AdamSgldState<double>::init(params, AdamSgldConfig{}, 12);
  for (auto* s : {&a, &b, &c}) {
    auto p = params;
    adam_update<double>(p, g, *s);
  }
  const auto na = inject_noise<double>(g, a), nb = inject_noise<double>(g, b), nc = inject_noise<double>(g, c);
  CHECK(bitwise_equal(na[0], nb[0]));
  CHECK_FALSE(na[0] == nc[0]);
  CHECK(bitwise_equal(g[0], copy));
}

TEST_CASE("noise draws use the step size left by the previous update") {
  auto params = single(TensorD({3}));
  auto state = AdamSgldState<double>::init(params, AdamSgldConfig{}, 13);
  adam_update<double>(params, std::vector<TensorD>{TensorD({3}, 2.0)}, state);
  const auto step = step_size(state);
  auto rng = state.rng;
  const std::vector<TensorD> g{TensorD({3})};
  const auto expected = inject_noise<double>(g, step, 100.0, rng);
  CHECK(bitwise_equal(inject_noise<double>(g, state)[0], expected[0]));
}

TEST_CASE("a non-finite update throws and leaves the state untouched") {
  auto params = single(TensorD({2}, 1.0));
  auto state = AdamSgldState<double>::init(params, plain_adam(), 1);
  const TensorD bad({2}, std::vector<double>{1.0, std::numeric_limits<double>::quiet_NaN()});
  CHECK_THROWS_AS(adam_update<double>(params, std::vector<TensorD>{bad}, state), NumericError);
  CHECK(state.t == 0);
  CHECK(params[0].value == TensorD({2}, 1.0));
  CHECK(state.m[0] == TensorD({2}));
}

TEST_CASE("snapshot schedule arithmetic") {
  SnapshotSchedule s{10, 7, 1};
  CHECK(s.retained_count() == 3);
  std::vector<std::uint64_t> kept;
  for (std::uint64_t t = 1; t <= 10; ++t)
    if (s.retains(t)) kept.push_back(t);
  CHECK(kept == std::vector<std::uint64_t>{8, 9, 10});

  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 200; ++trial) {
    const std::uint64_t n = 1 + rng() % 300, tb = rng() % n, thin = 1 + rng() % 7;
    const SnapshotSchedule sch{n, tb, thin};
    std::uint64_t count = 0, last = 0;
    for (std::uint64_t t = 0; t <= n + 3; ++t)
      if (sch.retains(t)) {
        CHECK(t > tb);
        CHECK(t > last);
        last = t;
        ++count;
      }
    CHECK(count == sch.retained_count());
    CHECK(count == (n - tb + thin - 1) / thin);
  }

  CHECK_THROWS_AS((SnapshotSchedule{10, 10, 1}.validate()), ConfigError);
  CHECK_THROWS_AS((SnapshotSchedule{10, 2, 0}.validate()), ConfigError);
  CHECK_THROWS_AS((SnapshotSchedule{0, 0, 1}.validate()), ConfigError);
}
