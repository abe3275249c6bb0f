// Command-line front end: synth, train, register, sweep, eval, selftest.
//
// Exit codes: 0 success, 1 verification or numeric failure, 2 usage,
// configuration, format or I/O error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "sgldreg/autodiff.hpp"
#include "sgldreg/config.hpp"
#include "sgldreg/errors.hpp"
#include "sgldreg/eval.hpp"
#include "sgldreg/formats.hpp"
#include "sgldreg/posterior.hpp"
#include "sgldreg/selftest.hpp"
#include "sgldreg/training.hpp"

namespace fs = std::filesystem;
using namespace sgldreg;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

constexpr const char* kCheckpointFile = "checkpoint.asgl";
constexpr const char* kConfigFile = "run.cfg";

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::string sigma;
  std::string mode = "averaged";
  std::string data;
  std::string labels;
  std::string checkpoint;
  std::string baseline;
  std::string moving;
  std::string fixed;
  bool inject_fault = false;
};

// Explicit --config wins; otherwise run.cfg beside the checkpoint, then defaults.
RunConfig resolve_config(const Options& o, const std::string& beside = "") {
  RunConfig cfg;
  if (!o.config.empty()) {
    cfg = RunConfig::load(o.config);
  } else if (!beside.empty()) {
    const fs::path sibling = fs::path(beside).parent_path() / kConfigFile;
    if (fs::exists(sibling)) cfg = RunConfig::load(sibling.string());
  }
  if (!o.data.empty()) cfg.data = o.data;
  if (!o.labels.empty()) cfg.labels = o.labels;
  if (!o.sigma.empty()) cfg.set("sigmas", o.sigma);
  return cfg;
}

void prepare_out(const Options& o, const RunConfig& cfg) {
  fs::create_directories(o.out);
  write_text((fs::path(o.out) / kConfigFile).string(), cfg.serialize());
}

std::vector<WeightSnapshot> load_snapshots(const std::string& path, const char* flag) {
  if (path.empty()) throw ConfigError(std::string("missing ") + flag);
  if (!fs::exists(path)) throw ConfigError(std::string(flag) + " '" + path + "' does not exist");
  auto snaps = checkpoint_load(path);
  if (snaps.empty()) throw ConfigError(std::string(flag) + " '" + path + "' holds no snapshots");
  return snaps;
}

int cmd_synth(const Options& o) {
  RunConfig cfg = resolve_config(o);
  if (o.seed) cfg.data_seed = *o.seed;
  cfg.validate();
  const auto split = synth_dataset(cfg);
  cfg.data = o.out;
  prepare_out(o, cfg);
  const fs::path dir(o.out);
  save_pairs(split.train, (dir / kTrainPairsFile).string());
  save_pairs(split.val, (dir / kValPairsFile).string());
  save_pairs(split.test, (dir / kTestPairsFile).string());
  std::printf("wrote %zu train, %zu val, %zu test pairs to %s\n", split.train.size(), split.val.size(),
              split.test.size(), o.out.c_str());
  return 0;
}

int cmd_train(const Options& o) {
  RunConfig cfg = resolve_config(o);
  if (o.seed) cfg.train_seed = *o.seed;
  cfg.validate();
  const auto split = load_dataset(cfg);

  auto options = cfg.train_options();
  options.progress = [&](const LossRecord& r) {
    if (r.iteration % 50 == 0 || r.iteration == cfg.iterations) {
      std::printf("iteration %llu  train loss %.6g", static_cast<unsigned long long>(r.iteration), r.train_loss);
      if (r.val_loss) std::printf("  val loss %.6g", *r.val_loss);
      std::printf("\n");
      std::fflush(stdout);
    }
  };
  const auto result = train(split.train, split.val, options);

  prepare_out(o, cfg);
  const fs::path dir(o.out);
  checkpoint_save(result.snapshots, (dir / kCheckpointFile).string());
  write_text((dir / "loss.csv").string(), loss_csv(result.history));

  std::printf("retained %zu snapshots (iterations %llu..%llu)\n", result.snapshots.size(),
              static_cast<unsigned long long>(result.snapshots.front().iteration),
              static_cast<unsigned long long>(result.snapshots.back().iteration));
  std::printf("trailing loss windows (size %llu):\n", static_cast<unsigned long long>(cfg.loss_window));
  for (const auto& w : trailing_windows(result.history, cfg.loss_window)) {
    std::printf("  %6llu-%-6llu mean %.6g variance %.6g\n", static_cast<unsigned long long>(w.first_iteration),
                static_cast<unsigned long long>(w.last_iteration), w.mean, w.variance);
  }
  return 0;
}

int cmd_register(const Options& o) {
  const RunConfig cfg = resolve_config(o, o.checkpoint);
  const auto mode = parse_mode(o.mode);
  const auto snaps = load_snapshots(o.checkpoint, "--checkpoint");
  std::vector<WeightSnapshot> baseline;
  if (mode == EvalMode::Single) baseline = load_snapshots(o.baseline, "--baseline");
  const auto used = select_snapshots(mode, snaps, baseline);
  const UNetConfig unet = infer_unet_config(used.front().parameters, cfg.leaky_slope);

  if (o.moving.empty() || o.fixed.empty()) throw ConfigError("register needs --moving and --fixed");
  const Tensor moving = read_pgm(o.moving);
  const Tensor fixed = read_pgm(o.fixed);
  if (moving.shape() != fixed.shape()) {
    throw DimensionError("moving " + shape_string(moving.shape()) + " and fixed " + shape_string(fixed.shape()) +
                         " differ in shape");
  }
  if (moving.dim(2) != cfg.image_size || moving.dim(3) != cfg.image_size) {
    throw DimensionError("images are " + std::to_string(moving.dim(3)) + "x" + std::to_string(moving.dim(2)) +
                         " but the model was trained at " + std::to_string(cfg.image_size) + "x" +
                         std::to_string(cfg.image_size));
  }
  const auto reg = register_pair(unet, used, moving, fixed);

  prepare_out(o, cfg);
  const fs::path dir(o.out);
  const std::size_t h = moving.dim(2), w = moving.dim(3);
  const Tensor& mean = reg.estimate.mean_field.tensor();
  Tensor variance(reg.estimate.std_field.shape());
  for (std::size_t i = 0; i < variance.size(); ++i) variance[i] = reg.estimate.std_field[i] * reg.estimate.std_field[i];
  auto plane = [&](const Tensor& t, std::size_t c) {
    Tensor out(Shape{h, w});
    std::copy(t.data() + c * h * w, t.data() + (c + 1) * h * w, out.data());
    return out;
  };
  write_pgm((dir / "moving.pgm").string(), moving);
  write_pgm((dir / "fixed.pgm").string(), fixed);
  write_pgm((dir / "registered.pgm").string(), reg.registered);
  write_pgm((dir / "mean_dx.pgm").string(), normalize_signed(plane(mean, 0)));
  write_pgm((dir / "mean_dy.pgm").string(), normalize_signed(plane(mean, 1)));
  write_pgm((dir / "var_dx.pgm").string(), normalize_unsigned(plane(variance, 0)));
  write_pgm((dir / "var_dy.pgm").string(), normalize_unsigned(plane(variance, 1)));
  write_raw_f32((dir / "field.bin").string(), mean);

  double peak_var = 0.0;
  for (float v : variance.values()) peak_var = std::max(peak_var, double(v));
  std::printf("registered with %zu snapshot(s); MSE before %.6g after %.6g; peak variance %.6g px^2\n",
              reg.estimate.sample_count, mean_squared_error(fixed, moving), mean_squared_error(fixed, reg.registered),
              peak_var);
  return 0;
}

struct EvalInputs {
  RunConfig cfg;
  std::vector<WeightSnapshot> snaps;
  std::vector<WeightSnapshot> baseline;
  UNetConfig unet;
  std::vector<ImagePair> test;
};

EvalInputs load_eval_inputs(const Options& o) {
  EvalInputs in;
  in.cfg = resolve_config(o, o.checkpoint);
  in.snaps = load_snapshots(o.checkpoint, "--checkpoint");
  in.baseline = load_snapshots(o.baseline, "--baseline");
  in.unet = infer_unet_config(in.snaps.front().parameters, in.cfg.leaky_slope);
  try {
    check_layout(in.unet, in.baseline.front().parameters);
  } catch (const IntegrityError&) {
    throw ConfigError("--baseline does not share the network configuration of --checkpoint");
  }
  in.test = load_dataset(in.cfg).test;
  if (in.test.empty()) throw ConfigError("the test split is empty");
  return in;
}

int cmd_sweep(const Options& o) {
  const auto in = load_eval_inputs(o);
  const auto report = noise_sweep(in.unet, in.test, in.snaps, in.baseline, in.cfg.sigmas, in.cfg.data_seed);

  prepare_out(o, in.cfg);
  const fs::path dir(o.out);
  write_text((dir / "sweep.csv").string(), sweep_csv(report));
  std::string per_pair = "method,sigma,pair,mse,unregistered_mse,dice\n";
  for (const auto& c : report.cells) {
    for (std::size_t i = 0; i < c.mse_values.size(); ++i) {
      per_pair += mode_name(c.method) + "," + format_number(c.sigma) + "," + std::to_string(i) + "," +
                  format_number(c.mse_values[i]) + "," + format_number(c.unregistered_values[i]) + "," +
                  (i < c.dice_values.size() ? format_number(c.dice_values[i]) : "") + "\n";
    }
  }
  write_text((dir / "sweep_pairs.csv").string(), per_pair);
  std::printf("%zu test pairs, %zu snapshots averaged\n%s", in.test.size(), in.snaps.size(),
              sweep_table(report).c_str());
  return 0;
}

int cmd_eval(const Options& o) {
  const auto in = load_eval_inputs(o);
  if (in.cfg.sigmas.size() != 1) throw ConfigError("eval takes a single --sigma value");
  const auto mode = parse_mode(o.mode);
  if (mode == EvalMode::Single) throw ConfigError("eval compares --mode averaged or last against the baseline");
  const double sigma = in.cfg.sigmas.front();
  const std::vector<double> sigmas{0.0, sigma};
  const auto report = noise_sweep(in.unet, in.test, in.snaps, in.baseline,
                                  sigma == 0.0 ? std::span<const double>(sigmas).first(1) : std::span<const double>(sigmas),
                                  in.cfg.data_seed);
  const auto& a = report.cell(mode, sigma);
  const auto& b = report.cell(EvalMode::Single, sigma);
  const auto t = paired_t_test(a.mse_values, b.mse_values);

  prepare_out(o, in.cfg);
  std::string csv = "method,sigma,pairs,mse_mean,mse_std,dice_mean,dice_std\n";
  for (const auto* c : {&a, &b}) {
    csv += mode_name(c->method) + "," + format_number(sigma) + "," + std::to_string(c->mse_values.size()) + "," +
           format_number(c->mse_mean) + "," + format_number(c->mse_std) + "," +
           (c->dice_mean ? format_number(*c->dice_mean) : "") + "," + (c->dice_std ? format_number(*c->dice_std) : "") +
           "\n";
  }
  csv += "t_test,t," + format_number(t.t) + ",p," + format_number(t.p) + ",df," + std::to_string(t.df) + "\n";
  write_text((fs::path(o.out) / "eval.csv").string(), csv);

  std::printf("sigma %g over %zu pairs\n", sigma, a.mse_values.size());
  std::printf("  %-8s MSE %.6f (%.6f)\n", mode_name(mode).c_str(), a.mse_mean, a.mse_std);
  std::printf("  %-8s MSE %.6f (%.6f)\n", "single", b.mse_mean, b.mse_std);
  if (a.dice_mean && b.dice_mean) {
    std::printf("  Dice %s %.4f, single %.4f\n", mode_name(mode).c_str(), *a.dice_mean, *b.dice_mean);
  }
  if (t.degenerate) {
    std::printf("paired t-test: degenerate (differences have zero variance)\n");
  } else {
    std::printf("paired t-test: t = %.4f, df = %zu, p = %.4g (%s)\n", t.t, t.df, t.p,
                t.p < 0.05 ? "p<0.05" : "not significant at p<0.05");
  }
  return 0;
}

int cmd_selftest(const Options& o) {
  debug::set_backward_fault(o.inject_fault);
  std::size_t failed = 0;
  run_selftest([&](const SelftestCheck& c) {
    failed += !c.passed;
    std::printf("%s  %-32s %s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
    std::fflush(stdout);
  });
  debug::set_backward_fault(false);
  if (failed) {
    std::printf("%zu check(s) failed\n", failed);
    return kExitFailure;
  }
  std::printf("all checks passed\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deformable image registration with adaptive-SGLD posterior sampling"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "key = value run configuration");
    sub->add_option("--out", o.out, "output directory");
  };
  auto* synth = app.add_subcommand("synth", "write synthetic train/val/test pair files");
  common(synth);
  synth->add_option("--seed", o.seed, "data seed");

  auto* trainc = app.add_subcommand("train", "train and write checkpoint.asgl and loss.csv");
  common(trainc);
  trainc->add_option("--seed", o.seed, "training seed");
  trainc->add_option("--data", o.data, "synth directory or IDX image file");
  trainc->add_option("--labels", o.labels, "IDX label file");

  auto* reg = app.add_subcommand("register", "register one PGM pair with a checkpoint");
  common(reg);
  reg->add_option("--checkpoint", o.checkpoint, "checkpoint file")->required();
  reg->add_option("--baseline", o.baseline, "baseline checkpoint for --mode single");
  reg->add_option("--moving", o.moving, "moving image (PGM)")->required();
  reg->add_option("--fixed", o.fixed, "fixed image (PGM)")->required();
  reg->add_option("--mode", o.mode, "averaged|last|single");

  auto* sweep = app.add_subcommand("sweep", "noise sweep over the test split");
  common(sweep);
  sweep->add_option("--checkpoint", o.checkpoint, "checkpoint file")->required();
  sweep->add_option("--baseline", o.baseline, "baseline checkpoint")->required();
  sweep->add_option("--data", o.data, "synth directory or IDX image file");
  sweep->add_option("--labels", o.labels, "IDX label file");
  sweep->add_option("--sigma", o.sigma, "comma-separated noise levels (must include 0)");

  auto* evalc = app.add_subcommand("eval", "single-sigma comparison with a paired t-test");
  common(evalc);
  evalc->add_option("--checkpoint", o.checkpoint, "checkpoint file")->required();
  evalc->add_option("--baseline", o.baseline, "baseline checkpoint")->required();
  evalc->add_option("--data", o.data, "synth directory or IDX image file");
  evalc->add_option("--labels", o.labels, "IDX label file");
  evalc->add_option("--sigma", o.sigma, "noise level");
  evalc->add_option("--mode", o.mode, "averaged|last");

  auto* self = app.add_subcommand("selftest", "gradient, noise, warp and optimizer checks");
  self->add_flag("--inject-fault", o.inject_fault, "break one backward rule (debug)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*synth) return cmd_synth(o);
    if (*trainc) return cmd_train(o);
    if (*reg) return cmd_register(o);
    if (*sweep) return cmd_sweep(o);
    if (*evalc) return cmd_eval(o);
    if (*self) return cmd_selftest(o);
  } catch (const TrainingError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
