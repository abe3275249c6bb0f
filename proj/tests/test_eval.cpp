#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "sgldreg/errors.hpp"
#include "sgldreg/eval.hpp"
#include "sgldreg/posterior.hpp"
#include "sgldreg/training.hpp"
#include "test_support.hpp"

using namespace sgldreg;

namespace {

LabelMap strip(std::initializer_list<std::int32_t> values) {
  LabelMap m(1, values.size());
  std::size_t i = 0;
  for (auto v : values) m.labels[i++] = v;
  return m;
}

UNetConfig small_unet(double init) {
  UNetConfig c;
  c.channel_scale = 0.25;
  c.final_layer_init_scale = init;
  return c;
}

std::vector<WeightSnapshot> snapshots(const UNetConfig& c, std::initializer_list<std::uint64_t> seeds) {
  std::vector<WeightSnapshot> out;
  std::uint64_t it = 1;
  for (auto s : seeds) out.push_back({it++, build_unet<float>(c, s)});
  return out;
}

}  // namespace

TEST_CASE("dice fixtures") {
  CHECK(dice(strip({1, 1, 0}), strip({1, 1, 0}), 1) == 1.0);
  CHECK(dice(strip({1, 1, 0, 0}), strip({0, 0, 1, 1}), 1) == 0.0);
  CHECK(dice(strip({1, 1, 0}), strip({1, 0, 0}), 1) == 2.0 / 3.0);
  CHECK(std::abs(dice(strip({1, 1, 0}), strip({1, 0, 0}), 1) - 0.6667) < 1e-4);
  CHECK(dice(strip({0, 0}), strip({0, 0}), 3) == 1.0);
  CHECK_THROWS_AS(dice(strip({1}), strip({1, 1}), 1), DimensionError);
}

TEST_CASE("dice is symmetric, bounded and grows with overlap") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    LabelMap a(4, 5), b(4, 5);
    for (auto& v : a.labels) v = std::int32_t(rng() % 3);
    for (auto& v : b.labels) v = std::int32_t(rng() % 3);
    for (std::int32_t l : {1, 2}) {
      const double d = dice(a, b, l);
      CHECK(d == dice(b, a, l));
      CHECK(d >= 0.0);
      CHECK(d <= 1.0);
    }
    // Copying one more pixel of label 1 from a into b cannot lower the score.
    for (std::size_t i = 0; i < a.labels.size(); ++i) {
      if (a.labels[i] == 1 && b.labels[i] != 1) {
        LabelMap c = b;
        c.labels[i] = 1;
        CHECK(dice(a, c, 1) >= dice(a, b, 1));
        break;
      }
    }
  }
}

TEST_CASE("mean_squared_error matches a loop oracle") {
  const auto a = testing::random_tensor<float>({1, 1, 9, 11}, 2, 0, 1), b = testing::random_tensor<float>({1, 1, 9, 11}, 3, 0, 1);
  double acc = 0.0;
  for (std::size_t y = 0; y < 9; ++y)
    for (std::size_t x = 0; x < 11; ++x) {
      const double d = double(a.at(0, 0, y, x)) - double(b.at(0, 0, y, x));
      acc += d * d;
    }
  CHECK(std::abs(mean_squared_error(a, b) - acc / 99.0) < 1e-12);
  CHECK(mean_squared_error(a, a) == 0.0);
  CHECK_THROWS_AS(mean_squared_error(Tensor({0}), Tensor({0})), ContractError);
  CHECK_THROWS_AS(mean_squared_error(a, Tensor({1, 1, 9, 10})), DimensionError);
}

TEST_CASE("paired t-test matches the frozen fixture") {
  // Differences {0.5, 1.5, 1.0, 2.0, 1.0}; reference values from 50-digit arithmetic.
  const std::vector<double> a{1.5, 3.5, 2.0, 5.0, 4.0}, b{1.0, 2.0, 1.0, 3.0, 3.0};
  const auto r = paired_t_test(a, b);
  CHECK(r.df == 4);
  CHECK(std::abs(r.t - 4.706787243316416766179899) < 1e-9);
  CHECK(std::abs(r.p - 0.009261696759514423721508267) < 1e-6);
  CHECK(r.mean_difference == doctest::Approx(1.2).epsilon(1e-14));
  CHECK_FALSE(r.degenerate);

  const auto swapped = paired_t_test(b, a);
  CHECK(swapped.t == -r.t);
  CHECK(swapped.p == r.p);
}

TEST_CASE("paired t-test degenerate and invalid inputs") {
  const std::vector<double> x{1, 2, 3};
  const auto same = paired_t_test(x, x);
  CHECK(same.degenerate);
  CHECK(same.t == 0.0);
  CHECK(same.p == 1.0);

  const std::vector<double> shifted{2, 3, 4};
  const auto up = paired_t_test(shifted, x);
  CHECK(up.degenerate);
  CHECK(std::isinf(up.t));
  CHECK(up.t > 0.0);
  CHECK(up.p == 0.0);
  CHECK(paired_t_test(x, shifted).t < 0.0);

  CHECK_THROWS_AS(paired_t_test(std::vector<double>{1}, std::vector<double>{2}), ContractError);
  CHECK_THROWS_AS(paired_t_test(x, std::vector<double>{1, 2}), ContractError);
}

TEST_CASE("Student t tails agree with closed forms") {
  for (double t : {0.0, 0.3, 1.0, 2.5, 10.0, -4.0}) {
    // One degree of freedom is Cauchy; two has an algebraic tail.
    CHECK(student_t_two_sided(t, 1.0) == doctest::Approx(1.0 - 2.0 / std::numbers::pi * std::atan(std::abs(t))).epsilon(1e-12));
    CHECK(student_t_two_sided(t, 2.0) == doctest::Approx(1.0 - std::abs(t) / std::sqrt(2.0 + t * t)).epsilon(1e-12));
  }
  CHECK(student_t_two_sided(std::numeric_limits<double>::infinity(), 3.0) == 0.0);
  // Large df approaches the normal tail: 2 * (1 - Phi(1.96)).
  CHECK(student_t_two_sided(1.959963984540054, 1e7) == doctest::Approx(0.05).epsilon(1e-5));
}

TEST_CASE("incomplete beta identities") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0), shape(0.2, 20.0);
  for (int i = 0; i < 200; ++i) {
    const double x = u(rng), a = shape(rng), b = shape(rng);
    CHECK(incomplete_beta(1.0, 1.0, x) == doctest::Approx(x).epsilon(1e-12));
    CHECK(incomplete_beta(a, 1.0, x) == doctest::Approx(std::pow(x, a)).epsilon(1e-10));
    CHECK(incomplete_beta(a, b, x) + incomplete_beta(b, a, 1.0 - x) == doctest::Approx(1.0).epsilon(1e-10));
  }
  CHECK(incomplete_beta(2.0, 3.0, 0.0) == 0.0);
  CHECK(incomplete_beta(2.0, 3.0, 1.0) == 1.0);
  CHECK_THROWS_AS(incomplete_beta(0.0, 1.0, 0.5), ContractError);
  CHECK_THROWS_AS(incomplete_beta(1.0, 1.0, 1.5), ContractError);
}

TEST_CASE("mode names and snapshot selection") {
  for (auto m : {EvalMode::Averaged, EvalMode::Last, EvalMode::Single}) CHECK(parse_mode(mode_name(m)) == m);
  CHECK_THROWS_AS(parse_mode("mean"), ConfigError);

  const auto cfg = small_unet(0.1);
  const auto snaps = snapshots(cfg, {1, 2, 3});
  const auto base = snapshots(cfg, {9});
  CHECK(select_snapshots(EvalMode::Averaged, snaps, base).size() == 3);
  const auto last = select_snapshots(EvalMode::Last, snaps, base);
  REQUIRE(last.size() == 1);
  CHECK(last[0].iteration == 3);
  CHECK(select_snapshots(EvalMode::Single, snaps, base)[0].iteration == 1);
  CHECK_THROWS_AS(select_snapshots(EvalMode::Single, snaps, {}), ConfigError);
  CHECK_THROWS_AS(select_snapshots(EvalMode::Averaged, {}, base), ConfigError);
}

TEST_CASE("evaluate_pair scores a perfect registration and matches the mean field") {
  const auto pairs = synth_pairs(3, ShapeSpec{}, 2.0, 5);
  const auto zero = snapshots(small_unet(0.0), {1});
  ImagePair same = pairs[0];
  same.fixed = same.moving;
  same.fixed_labels = same.moving_labels;
  const auto m = evaluate_pair(small_unet(0.0), same, zero);
  CHECK(m.mse == 0.0);
  CHECK(m.unregistered_mse == 0.0);
  REQUIRE(m.dice_mean.has_value());
  CHECK(*m.dice_mean == 1.0);
  for (const auto& [label, d] : m.dice) {
    CHECK(label != 0);
    CHECK(d == 1.0);
  }

  const auto exact = score_field(pairs[1], *pairs[1].true_field);
  CHECK(exact.mse == 0.0);
  CHECK(exact.unregistered_mse > 0.0);

  const auto cfg = small_unet(0.5);
  const auto snaps = snapshots(cfg, {2, 3, 4});
  const auto fields = sample_fields(cfg, snaps, pairs[2].moving, pairs[2].fixed);
  const auto by_field = score_field(pairs[2], posterior_mean<float>(fields));
  const auto by_eval = evaluate_pair(cfg, pairs[2], snaps);
  CHECK(by_eval.mse == by_field.mse);
  CHECK(*by_eval.dice_mean == *by_field.dice_mean);
}

TEST_CASE("noise sweep grid, sigma-zero equivalence and determinism") {
  const auto cfg = small_unet(0.5);
  const auto pairs = synth_pairs(6, ShapeSpec{}, 2.0, 6);
  const auto snaps = snapshots(cfg, {2, 3, 4});
  const auto base = snapshots(cfg, {7});
  const std::vector<double> sigmas{0.0, 0.05, 0.1, 0.18};
  const auto r = noise_sweep(cfg, pairs, snaps, base, sigmas, 11);
  CHECK(r.cells.size() == 12);
  for (std::size_t i = 0; i < r.cells.size(); ++i) {
    CHECK(r.cells[i].method == r.methods[i / 4]);
    CHECK(r.cells[i].sigma == sigmas[i % 4]);
    CHECK(r.cells[i].mse_values.size() == 6);
  }

  const auto& avg0 = r.cell(EvalMode::Averaged, 0.0);
  const auto& last0 = r.cell(EvalMode::Last, 0.0);
  const auto& single0 = r.cell(EvalMode::Single, 0.0);
  const std::vector<WeightSnapshot> last_only{snaps.back()};
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    CHECK(avg0.mse_values[i] == evaluate_pair(cfg, pairs[i], snaps).mse);
    CHECK(last0.mse_values[i] == evaluate_pair(cfg, pairs[i], last_only).mse);
    CHECK(single0.mse_values[i] == evaluate_pair(cfg, pairs[i], base).mse);
    CHECK(avg0.unregistered_values[i] == mean_squared_error(pairs[i].fixed, pairs[i].moving));
  }

  const auto again = noise_sweep(cfg, pairs, snaps, base, sigmas, 11);
  CHECK(sweep_csv(again) == sweep_csv(r));
  // A sigma's draws do not depend on the rest of the list.
  const std::vector<double> subset{0.1, 0.0};
  const auto sub = noise_sweep(cfg, pairs, snaps, base, subset, 11);
  CHECK(sub.cell(EvalMode::Last, 0.1).mse_values == r.cell(EvalMode::Last, 0.1).mse_values);
  const auto other = noise_sweep(cfg, pairs, snaps, base, sigmas, 12);
  CHECK(other.cell(EvalMode::Averaged, 0.18).mse_values != r.cell(EvalMode::Averaged, 0.18).mse_values);
  CHECK_THROWS_AS(r.cell(EvalMode::Averaged, 0.3), ContractError);
}

TEST_CASE("noise sweep with one snapshot collapses averaged and last") {
  const auto cfg = small_unet(0.5);
  const auto pairs = synth_pairs(3, ShapeSpec{}, 2.0, 8);
  const auto snaps = snapshots(cfg, {5});
  const std::vector<double> sigmas{0.0};
  const auto r = noise_sweep(cfg, pairs, snaps, snaps, sigmas, 1);
  CHECK(r.cells.size() == 3);
  CHECK(r.cells[0].mse_values == r.cells[1].mse_values);
  CHECK(r.cells[1].mse_values == r.cells[2].mse_values);
}

TEST_CASE("noise sweep rejects bad inputs") {
  const auto cfg = small_unet(0.5);
  const auto pairs = synth_pairs(2, ShapeSpec{}, 2.0, 9);
  const auto snaps = snapshots(cfg, {5});
  const std::vector<double> no_zero{0.1}, negative{0.0, -0.1}, nan{0.0, std::nan("")}, ok{0.0};
  CHECK_THROWS_AS(noise_sweep(cfg, {}, snaps, snaps, ok, 1), ConfigError);
  CHECK_THROWS_AS(noise_sweep(cfg, pairs, snaps, snaps, no_zero, 1), ConfigError);
  CHECK_THROWS_AS(noise_sweep(cfg, pairs, snaps, snaps, negative, 1), ConfigError);
  CHECK_THROWS_AS(noise_sweep(cfg, pairs, snaps, snaps, nan, 1), ConfigError);
  CHECK_THROWS_AS(noise_sweep(cfg, pairs, snaps, {}, ok, 1), ConfigError);
  CHECK_THROWS_AS(noise_sweep(UNetConfig{}, pairs, snaps, snaps, ok, 1), IntegrityError);
}

TEST_CASE("registered MSE does not fall as input noise grows on a trained model") {
  const auto train_pairs = synth_pairs(64, ShapeSpec{}, 3.0, 20);
  const auto test_pairs = synth_pairs(24, ShapeSpec{}, 3.0, 21);
  TrainOptions o;
  o.unet = small_unet(0.0);
  o.loss.lambda = 0.01;
  o.optim.alpha = std::numeric_limits<double>::infinity();
  o.optim.eta = 3e-3;
  o.schedule = {300, 297, 1};
  o.batch_size = 16;
  o.val_every = 0;
  o.seed = 3;
  const auto result = train(train_pairs, {}, o);
  const std::vector<double> sigmas{0.0, 0.1, 0.3};
  const auto r = noise_sweep(o.unet, test_pairs, result.snapshots, result.snapshots, sigmas, 4);
  for (auto m : r.methods) {
    CAPTURE(mode_name(m));
    CHECK(r.cell(m, 0.0).mse_mean <= r.cell(m, 0.1).mse_mean);
    CHECK(r.cell(m, 0.1).mse_mean <= r.cell(m, 0.3).mse_mean);
  }
  const auto& clean = r.cell(EvalMode::Averaged, 0.0);
  double unregistered = 0.0;
  for (double v : clean.unregistered_values) unregistered += v;
  CHECK(clean.mse_mean < unregistered / double(clean.unregistered_values.size()));
}

TEST_CASE("sweep CSV re-parses to the printed values") {
  const auto cfg = small_unet(0.5);
  const auto pairs = synth_pairs(4, ShapeSpec{}, 2.0, 10);
  const auto snaps = snapshots(cfg, {2, 3});
  const std::vector<double> sigmas{0.0, 0.05, 0.18};
  const auto r = noise_sweep(cfg, pairs, snaps, snaps, sigmas, 2);
  const auto text = sweep_csv(r);
  CHECK(text.rfind("method,metric,mean@0,std@0,mean@0.05,std@0.05,mean@0.18,std@0.18\n", 0) == 0);
  const auto csv = parse_sweep_csv(text);
  CHECK(csv.sigmas == sigmas);
  REQUIRE(csv.rows.size() == 6);
  for (std::size_t row = 0; row < 6; ++row) {
    const auto method = r.methods[row % 3];
    const bool is_dice = row >= 3;
    CHECK(csv.rows[row].method == mode_name(method));
    CHECK(csv.rows[row].metric == (is_dice ? "dice" : "mse"));
    for (std::size_t s = 0; s < sigmas.size(); ++s) {
      const auto& c = r.cell(method, sigmas[s]);
      CHECK(csv.rows[row].means[s] == (is_dice ? *c.dice_mean : c.mse_mean));
      CHECK(csv.rows[row].stds[s] == (is_dice ? *c.dice_std : c.mse_std));
    }
  }
  CHECK(sweep_table(r).find("averaged") != std::string::npos);

  CHECK_THROWS_AS(parse_sweep_csv(""), FormatError);
  CHECK_THROWS_AS(parse_sweep_csv("method,metric,x@0,std@0\n"), FormatError);
  CHECK_THROWS_AS(parse_sweep_csv("method,metric,mean@0,std@0\naveraged,mse,1\n"), FormatError);
  CHECK_THROWS_AS(parse_sweep_csv("method,metric,mean@0,std@0\naveraged,mse,1,zz\n"), FormatError);
}
