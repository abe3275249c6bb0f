#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sgldreg/dataset.hpp"
#include "sgldreg/losses.hpp"
#include "sgldreg/optim.hpp"
#include "sgldreg/unet.hpp"

namespace sgldreg {

struct LossRecord {
  std::uint64_t iteration = 0;
  double train_loss = 0.0;  // minibatch total loss before the update
  std::optional<double> val_loss;
};

struct TrainOptions {
  UNetConfig unet;
  LossConfig loss;
  AdamSgldConfig optim;
  SnapshotSchedule schedule;
  std::size_t batch_size = 64;
  std::uint64_t val_every = 10;  // 0 disables validation
  std::uint64_t seed = 0;
  std::function<void(const LossRecord&)> progress;

  void validate() const;
};

struct TrainResult {
  std::vector<WeightSnapshot> snapshots;
  std::vector<LossRecord> history;
  ParameterSet final_parameters;
};

// Minibatches come from per-epoch permutations; weight init, batch order and
// gradient noise each draw from their own stream derived from `seed`.
// A non-finite loss or update raises TrainingError naming the iteration.
TrainResult train(const std::vector<ImagePair>& train_pairs, const std::vector<ImagePair>& val_pairs,
                  const TrainOptions& options);

// Mean total loss over `pairs`, evaluated without gradients.
double evaluate_loss(const UNetConfig& unet, const LossConfig& loss, const ParameterSet& params,
                     const std::vector<ImagePair>& pairs, std::size_t batch_size);

// Stacks the images of pairs[indices] into (B,1,H,W) tensors.
std::pair<Tensor, Tensor> stack_pairs(const std::vector<ImagePair>& pairs, std::span<const std::size_t> indices);

struct LossWindow {
  std::uint64_t first_iteration = 0;
  std::uint64_t last_iteration = 0;
  double mean = 0.0;
  double variance = 0.0;  // n-1 divisor, 0 for a single sample
};

// Consecutive non-overlapping windows of `window` records, aligned to the end
// of the history (the oldest window may be shorter).
std::vector<LossWindow> trailing_windows(const std::vector<LossRecord>& history, std::size_t window);

// Header `iteration,train_loss,val_loss`; val_loss is empty when not evaluated.
std::string loss_csv(const std::vector<LossRecord>& history);

}  // namespace sgldreg
