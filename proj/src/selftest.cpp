#include "sgldreg/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "sgldreg/autodiff.hpp"
#include "sgldreg/errors.hpp"
#include "sgldreg/grad_check.hpp"
#include "sgldreg/losses.hpp"
#include "sgldreg/optim.hpp"
#include "sgldreg/unet.hpp"
#include "sgldreg/warp.hpp"

namespace sgldreg {
namespace {

constexpr double kGradTolerance = 1e-5;

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), f, a, b, c);
  return buf;
}

TensorD uniform(Shape shape, double lo, double hi, std::mt19937_64& rng) {
  TensorD t(std::move(shape));
  std::uniform_real_distribution<double> d(lo, hi);
  for (auto& v : t.values()) v = d(rng);
  return t;
}

// sum(out * R) with a fixed random R, so every output element carries weight.
Var<double> project(Tape<double>& tape, Var<double> out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sum(mul(out, tape.constant(uniform(out.shape(), -1.0, 1.0, rng))));
}

SelftestCheck grad_case(const std::string& name, const LossFunction& loss, const std::vector<TensorD>& inputs,
                        std::size_t samples = 0) {
  SelftestCheck c{"gradient " + name, false, ""};
  const auto r = grad_check(loss, inputs, 1e-6, samples, 7);
  c.passed = r.max_error < kGradTolerance;
  c.detail = fmt("max relative error %.3g (analytic %.9g, numeric %.9g)", r.max_error, r.analytic, r.numeric);
  return c;
}

std::vector<SelftestCheck> gradient_suite() {
  std::mt19937_64 rng(11);
  std::vector<SelftestCheck> out;

  out.push_back(grad_case("conv2d",
                          [](Tape<double>& t, std::span<const Var<double>> v) {
                            return project(t, conv2d(v[0], v[1], v[2], 1, 1), 1) +
                                   project(t, conv2d(v[0], v[1], v[2], 2, 1), 2);
                          },
                          {uniform({1, 2, 6, 6}, -1, 1, rng), uniform({3, 2, 3, 3}, -1, 1, rng),
                           uniform({3}, -1, 1, rng)}));

  TensorD x = uniform({1, 2, 5, 5}, 0.05, 1.0, rng);
  for (std::size_t i = 0; i < x.size(); i += 2) x[i] = -x[i];
  out.push_back(grad_case("leaky_relu",
                          [](Tape<double>& t, std::span<const Var<double>> v) {
                            return project(t, leaky_relu(v[0], 0.2), 3);
                          },
                          {x}));

  out.push_back(grad_case("upsample",
                          [](Tape<double>& t, std::span<const Var<double>> v) {
                            return project(t, upsample2x_nearest(v[0]), 4);
                          },
                          {uniform({1, 2, 3, 3}, -1, 1, rng)}));

  out.push_back(grad_case("concat",
                          [](Tape<double>& t, std::span<const Var<double>> v) {
                            return project(t, concat_channels(v[0], v[1]), 5);
                          },
                          {uniform({1, 2, 3, 3}, -1, 1, rng), uniform({1, 1, 3, 3}, -1, 1, rng)}));

  // Integer part random, fractional part kept away from the interpolation kinks.
  TensorD field({1, 2, 8, 8});
  {
    std::uniform_int_distribution<int> whole(-2, 2);
    std::uniform_real_distribution<double> frac(0.1, 0.9);
    for (auto& v : field.values()) v = whole(rng) + frac(rng);
  }
  out.push_back(grad_case("warp_bilinear",
                          [](Tape<double>& t, std::span<const Var<double>> v) {
                            return project(t, warp_bilinear(v[0], v[1]), 6);
                          },
                          {uniform({1, 1, 8, 8}, 0, 1, rng), field}));

  out.push_back(grad_case("mse",
                          [](Tape<double>&, std::span<const Var<double>> v) {
                            return scale(mse(v[0], v[1]), 64.0);
                          },
                          {uniform({1, 1, 8, 8}, 0, 1, rng), uniform({1, 1, 8, 8}, 0, 1, rng)}));

  out.push_back(grad_case("neg_lcc",
                          [](Tape<double>&, std::span<const Var<double>> v) {
                            return scale(neg_lcc(v[0], v[1], 5), 64.0);
                          },
                          {uniform({1, 1, 8, 8}, 0, 1, rng), uniform({1, 1, 8, 8}, 0, 1, rng)}));

  out.push_back(grad_case("smoothness",
                          [](Tape<double>&, std::span<const Var<double>> v) {
                            return scale(smoothness(v[0]), 128.0);
                          },
                          {uniform({1, 2, 8, 8}, -2, 2, rng)}));

  UNetConfig unet;
  unet.channel_scale = 0.25;
  unet.final_layer_init_scale = 0.5;
  const auto params = build_unet<double>(unet, 3);
  std::vector<TensorD> inputs;
  for (const auto& p : params) inputs.push_back(p.value);
  const TensorD moving = uniform({1, 1, 16, 16}, 0, 1, rng);
  const TensorD fixed = uniform({1, 1, 16, 16}, 0, 1, rng);
  for (auto sim : {Similarity::Mse, Similarity::NegLcc}) {
    LossConfig loss;
    loss.similarity = sim;
    loss.lcc_window = 5;
    out.push_back(grad_case("unet total_loss (" + similarity_name(sim) + ")",
                            [&](Tape<double>& t, std::span<const Var<double>> v) {
                              const auto terms =
                                  total_loss<double>(unet, loss, v, t.constant(moving), t.constant(fixed));
                              return scale(terms.total, 100.0);
                            },
                            inputs, 300));
  }
  return out;
}

SelftestCheck noise_check() {
  SelftestCheck c{"noise statistics", false, ""};
  constexpr std::size_t n = 100000;
  constexpr double s = 1e-3, alpha = 100.0;
  const std::vector<TensorD> grads{TensorD({n})};
  const std::vector<TensorD> step{TensorD({n}, s)};
  std::mt19937_64 rng(5);
  const auto noisy = inject_noise<double>(grads, step, alpha, rng);
  const auto& z = noisy[0];
  double mean = 0.0;
  for (double v : z.values()) mean += v;
  mean /= double(n);
  double var = 0.0, lag = 0.0;
  for (std::size_t i = 0; i < n; ++i) var += (z[i] - mean) * (z[i] - mean);
  for (std::size_t i = 1; i < n; ++i) lag += (z[i] - mean) * (z[i - 1] - mean);
  const double autocorr = lag / var;
  var /= double(n - 1);
  const double expected = s / alpha;
  const double var_err = std::abs(var / expected - 1.0);
  const double mean_z = std::abs(mean) / std::sqrt(expected / double(n));
  c.passed = var_err < 0.03 && mean_z < 4.0 && std::abs(autocorr) < 0.02;
  c.detail = fmt("variance error %.4f, mean %.2f standard errors, lag-1 autocorrelation %.4f", var_err, mean_z,
                 autocorr);
  return c;
}

std::vector<SelftestCheck> warp_suite() {
  std::vector<SelftestCheck> out;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);

  Tensor image({1, 1, 16, 16});
  for (auto& v : image.values()) v = unit(rng);
  {
    const Tensor warped = warp_bilinear(image, DeformationField::zeros(16, 16));
    out.push_back({"warp zero-field identity", bitwise_equal(warped, image), "16x16 random image"});
  }
  {
    const int sx = 2, sy = -1;
    const Tensor warped = warp_bilinear(image, DeformationField::constant(16, 16, float(sx), float(sy)));
    std::size_t bad = 0;
    for (int y = 1; y < 16; ++y) {
      for (int x = 0; x < 14; ++x) bad += warped.at(0, 0, y, x) != image.at(0, 0, y + sy, x + sx);
    }
    out.push_back({"warp integer shift", bad == 0, std::to_string(bad) + " interior mismatches"});
  }
  {
    std::size_t bad = 0;
    std::uniform_real_distribution<float> disp(-5.0f, 5.0f);
    for (int trial = 0; trial < 1000; ++trial) {
      Tensor img({1, 1, 8, 8});
      for (auto& v : img.values()) v = unit(rng) * 4.0f - 2.0f;
      Tensor f({2, 8, 8});
      for (auto& v : f.values()) v = disp(rng);
      const Tensor w = warp_bilinear(img, DeformationField(f));
      const auto [lo, hi] = std::minmax_element(img.values().begin(), img.values().end());
      for (float v : w.values()) bad += v < *lo || v > *hi;
    }
    out.push_back({"warp range convexity", bad == 0, std::to_string(bad) + " out-of-range samples in 1000 cases"});
  }
  return out;
}

SelftestCheck adam_check() {
  SelftestCheck c{"adam trajectory", false, ""};
  const double curv[2] = {1.0, 10.0}, centre[2] = {0.5, -1.5};
  AdamSgldConfig config;
  config.alpha = std::numeric_limits<double>::infinity();
  ParameterSetD params;
  params.add("theta", TensorD({2}, std::vector<double>{2.0, 3.0}));
  auto state = AdamSgldState<double>::init(params, config, 1);

  double theta[2] = {2.0, 3.0}, m[2] = {0, 0}, v[2] = {0, 0};
  double worst = 0.0;
  for (int t = 1; t <= 50; ++t) {
    TensorD g({2});
    for (int i = 0; i < 2; ++i) g[i] = curv[i] * (params[0].value[i] - centre[i]);
    const std::vector<TensorD> grads{g};
    adam_update<double>(params, inject_noise<double>(grads, state), state);
    for (int i = 0; i < 2; ++i) {
      const double gi = curv[i] * (theta[i] - centre[i]);
      m[i] = 0.9 * m[i] + 0.1 * gi;
      v[i] = 0.999 * v[i] + 0.001 * gi * gi;
      const double mh = m[i] / (1.0 - std::pow(0.9, t));
      const double vh = v[i] / (1.0 - std::pow(0.999, t));
      theta[i] -= 1e-3 / std::sqrt(vh + 1e-8) * mh;
      worst = std::max(worst, std::abs(theta[i] - params[0].value[i]));
    }
  }
  c.passed = worst < 1e-10;
  c.detail = fmt("max deviation %.3g over 50 steps", worst);
  return c;
}

}  // namespace

std::vector<SelftestCheck> run_selftest(const std::function<void(const SelftestCheck&)>& report) {
  std::vector<SelftestCheck> out;
  auto add = [&](SelftestCheck c) {
    if (report) report(c);
    out.push_back(std::move(c));
  };
  auto guarded = [&](const std::string& name, const auto& body) {
    try {
      body();
    } catch (const std::exception& e) {
      add({name, false, std::string("threw: ") + e.what()});
    }
  };
  guarded("gradient suite", [&] {
    for (auto& c : gradient_suite()) add(std::move(c));
  });
  guarded("noise statistics", [&] { add(noise_check()); });
  guarded("warp suite", [&] {
    for (auto& c : warp_suite()) add(std::move(c));
  });
  guarded("adam trajectory", [&] { add(adam_check()); });
  return out;
}

}  // namespace sgldreg
