#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgldreg/dataset.hpp"
#include "sgldreg/training.hpp"

namespace sgldreg {

// Every setting of a run. Stored as flat `key = value` text with `#`
// comments; every output directory receives a copy named run.cfg.
struct RunConfig {
  // network
  double channel_scale = 1.0;
  double leaky_slope = 0.2;
  double final_layer_init_scale = 0.0;
  // loss
  std::string similarity = "mse";
  double lambda = 0.05;
  int lcc_window = 9;
  double weight_decay = 1e-5;
  // optimizer
  double eta = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double alpha = 100.0;
  // schedule
  std::uint64_t iterations = 800;
  std::uint64_t burn_in = 720;
  std::uint64_t thinning = 1;
  std::uint64_t batch_size = 64;
  std::uint64_t val_every = 10;
  std::uint64_t loss_window = 40;
  // seeds
  std::uint64_t data_seed = 1;
  std::uint64_t train_seed = 1;
  // data: an IDX image file (with `labels`) or a pair file written by synth
  std::string data;
  std::string labels;
  int digit = 5;
  std::uint64_t image_size = 32;
  std::uint64_t train_images = 200;
  std::uint64_t val_images = 20;
  std::uint64_t test_images = 40;
  std::uint64_t train_pairs = 0;
  std::uint64_t val_pairs = 100;
  std::uint64_t test_pairs = 1000;
  // synthetic data
  std::uint64_t synth_count = 400;
  double synth_max_disp = 3.0;
  // evaluation
  std::vector<double> sigmas{0.0, 0.05, 0.1, 0.18};

  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::string& path);
  std::string serialize() const;
  // Applies one `key=value` assignment; throws ConfigError for unknown keys
  // or malformed values.
  void set(const std::string& key, const std::string& value);

  UNetConfig unet_config() const;
  LossConfig loss_config() const;
  AdamSgldConfig optim_config() const;
  SnapshotSchedule schedule() const;
  TrainOptions train_options() const;
  PairSplitSpec split_spec() const;
  void validate() const;
};

// File names written by the synth command inside its output directory.
inline constexpr const char* kTrainPairsFile = "train.pairs";
inline constexpr const char* kValPairsFile = "val.pairs";
inline constexpr const char* kTestPairsFile = "test.pairs";

// `config.data` is either a directory written by synth or an IDX image file
// (with `config.labels`), which is split by make_pairs with data_seed.
DatasetSplit load_dataset(const RunConfig& config);

// The synthetic train/val/test sets produced by synth for `config`.
DatasetSplit synth_dataset(const RunConfig& config);

}  // namespace sgldreg
