#include <doctest.h>

#include <cmath>

#include "sgldreg/errors.hpp"
#include "sgldreg/unet.hpp"
#include "test_support.hpp"

using namespace sgldreg;
using testing::random_tensor;

namespace {

// Hand tally of the default architecture: 3x3 kernels, 4 strided encoder convs,
// decoders with skip widths {32, 32, 32, 0, 2, 0}, then a 16 -> 2 field conv.
std::size_t count_by_hand() {
  struct L { std::size_t in, out; };
  const L layers[] = {{2, 32},  {32, 32}, {32, 32},      {32, 32},      {32 + 32, 32}, {32 + 32, 32},
                      {32 + 32, 32}, {32, 32}, {32 + 2, 32}, {32, 16}, {16, 2}};
  std::size_t total = 0;
  for (const auto& l : layers) total += 9 * l.in * l.out + l.out;
  return total;
}

UNetConfig small_config(double init = 0.0) {
  UNetConfig c;
  c.channel_scale = 0.25;
  c.final_layer_init_scale = init;
  return c;
}

DeformationFieldD forward_pair(const UNetConfig& c, const ParameterSetD& p, const TensorD& m, const TensorD& f) {
  return predict_field(c, p, m, f);
}

}  // namespace

TEST_CASE("default parameter count matches the hand tally") {
  CHECK(count_by_hand() == 107730);
  CHECK(parameter_count(UNetConfig{}) == count_by_hand());
  CHECK(build_unet<float>(UNetConfig{}, 1).scalar_count() == count_by_hand());
}

TEST_CASE("default and quarter-width configs validate") {
  UNetConfig c;
  CHECK(c.encoder_channels.size() == 4);
  CHECK(c.decoder_channels.size() == 6);
  CHECK(c.output_channels == 2);
  CHECK_NOTHROW(c.validate());
  const auto s = small_config();
  CHECK(s.encoder_width(0) == 8);
  CHECK(s.decoder_width(5) == 4);
  CHECK_NOTHROW(s.validate());
}

TEST_CASE("invalid configs are rejected") {
  UNetConfig c;
  c.output_channels = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = UNetConfig{};
  c.encoder_channels.pop_back();
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = UNetConfig{};
  c.kernel_size = 4;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = UNetConfig{};
  c.channel_scale = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("forward keeps the spatial size and emits two channels") {
  for (const auto& cfg : {UNetConfig{}, small_config(0.5)}) {
    const auto p = build_unet<double>(cfg, 3);
    const auto field = forward_pair(cfg, p, random_tensor({1, 1, 32, 32}, 1, 0, 1), random_tensor({1, 1, 32, 32}, 2, 0, 1));
    CHECK(field.tensor().shape() == Shape{2, 32, 32});
  }
  const auto cfg = small_config(0.5);
  const auto p = build_unet<double>(cfg, 3);
  CHECK(forward_pair(cfg, p, TensorD({1, 1, 16, 48}, 0.3), TensorD({1, 1, 16, 48}, 0.6)).tensor().shape() ==
        Shape{2, 16, 48});
}

TEST_CASE("extents that are not multiples of 16 are rejected") {
  const auto cfg = small_config(0.5);
  const auto p = build_unet<double>(cfg, 3);
  CHECK_THROWS_AS(forward_pair(cfg, p, TensorD({1, 1, 28, 28}), TensorD({1, 1, 28, 28})), ConfigError);
}

TEST_CASE("moving and fixed shape mismatch is a dimension error") {
  const auto cfg = small_config(0.5);
  const auto p = build_unet<double>(cfg, 3);
  CHECK_THROWS_AS(forward_pair(cfg, p, TensorD({1, 1, 16, 16}), TensorD({1, 1, 32, 32})), DimensionError);
  CHECK_THROWS_AS(forward_pair(cfg, p, TensorD({1, 2, 16, 16}), TensorD({1, 2, 16, 16})), DimensionError);
}

TEST_CASE("same seed gives bitwise-identical parameters, different seeds differ") {
  const auto a = build_unet<float>(UNetConfig{}, 42);
  const auto b = build_unet<float>(UNetConfig{}, 42);
  const auto c = build_unet<float>(UNetConfig{}, 43);
  REQUIRE(a.size() == b.size());
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].id == b[i].id);
    CHECK(bitwise_equal(a[i].value, b[i].value));
    any_diff = any_diff || !(a[i].value == c[i].value);
  }
  CHECK(any_diff);
}

TEST_CASE("zero final layer gives an exactly zero field for any input") {
  const auto cfg = small_config(0.0);
  const auto p = build_unet<double>(cfg, 5);
  CHECK(p.at("flow.kernel").value == TensorD(p.at("flow.kernel").value.shape()));
  for (std::uint64_t s = 0; s < 3; ++s) {
    const auto field = forward_pair(cfg, p, random_tensor({1, 1, 16, 16}, s, 0, 1), random_tensor({1, 1, 16, 16}, s + 9, 0, 1));
    CHECK(field == DeformationFieldD::zeros(16, 16));
  }
}

TEST_CASE("forward is bitwise repeatable") {
  const auto cfg = small_config(0.5);
  const auto p = build_unet<float>(cfg, 6);
  const auto m = random_tensor<float>({1, 1, 32, 32}, 1, 0, 1), f = random_tensor<float>({1, 1, 32, 32}, 2, 0, 1);
  CHECK(bitwise_equal(predict_field(cfg, p, m, f).tensor(), predict_field(cfg, p, m, f).tensor()));
}

TEST_CASE("swapping moving and fixed changes the field") {
  const auto cfg = small_config(0.5);
  const auto p = build_unet<double>(cfg, 7);
  const auto m = random_tensor({1, 1, 16, 16}, 1, 0, 1), f = random_tensor({1, 1, 16, 16}, 2, 0, 1);
  CHECK_FALSE(forward_pair(cfg, p, m, f) == forward_pair(cfg, p, f, m));
}

TEST_CASE("a batched forward equals per-pair forwards") {
  const auto cfg = small_config(0.5);
  const auto p = build_unet<double>(cfg, 8);
  const auto m = random_tensor({3, 1, 16, 16}, 11, 0, 1), f = random_tensor({3, 1, 16, 16}, 12, 0, 1);
  Tape<double> tape;
  const auto bound = bind(tape, p, false);
  const auto batched = unet_forward<double>(cfg, bound, tape.constant(m), tape.constant(f)).value();
  const std::size_t plane = 16 * 16;
  for (std::size_t n = 0; n < 3; ++n) {
    TensorD mi({1, 1, 16, 16}), fi({1, 1, 16, 16});
    std::copy_n(m.data() + n * plane, plane, mi.data());
    std::copy_n(f.data() + n * plane, plane, fi.data());
    const auto single = forward_pair(cfg, p, mi, fi).tensor();
    for (std::size_t i = 0; i < 2 * plane; ++i) CHECK(batched[n * 2 * plane + i] == doctest::Approx(single[i]).epsilon(1e-12));
  }
}

TEST_CASE("layout checks and config inference") {
  const auto cfg = small_config(0.5);
  const auto p = build_unet<float>(cfg, 9);
  CHECK_NOTHROW(check_layout(cfg, p));
  CHECK_THROWS_AS(check_layout(UNetConfig{}, p), IntegrityError);
  const auto inferred = infer_unet_config(p, 0.2);
  CHECK(parameter_count(inferred) == p.scalar_count());
  CHECK(inferred.encoder_width(2) == cfg.encoder_width(2));
  CHECK(inferred.decoder_width(5) == cfg.decoder_width(5));

  ParameterSet truncated;
  for (std::size_t i = 0; i + 2 < p.size(); ++i) truncated.add(p[i].id, p[i].value);
  CHECK_THROWS_AS(check_layout(cfg, truncated), IntegrityError);
}

TEST_CASE("hidden kernels respect the Glorot bound and biases start at zero") {
  const auto p = build_unet<double>(UNetConfig{}, 10);
  for (const auto& param : p) {
    if (param.id.ends_with(".bias")) {
      CHECK(param.value == TensorD(param.value.shape()));
      continue;
    }
    if (param.id == "flow.kernel") continue;
    const auto& s = param.value.shape();
    const double fan_in = double(s[1] * s[2] * s[3]), fan_out = double(s[0] * s[2] * s[3]);
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (double v : param.value.values()) CHECK(std::abs(v) <= bound);
  }
}
