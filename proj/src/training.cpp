#include "sgldreg/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "sgldreg/errors.hpp"
#include "sgldreg/formats.hpp"

namespace sgldreg {

void TrainOptions::validate() const {
  unet.validate();
  loss.validate();
  optim.validate();
  schedule.validate();
  if (batch_size == 0) throw ConfigError("batch size must be >= 1");
}

std::pair<Tensor, Tensor> stack_pairs(const std::vector<ImagePair>& pairs, std::span<const std::size_t> indices) {
  if (indices.empty()) throw ContractError("stack_pairs: empty batch");
  const std::size_t h = pairs[indices[0]].height(), w = pairs[indices[0]].width();
  const std::size_t plane = h * w;
  Tensor moving(Shape{indices.size(), 1, h, w});
  Tensor fixed(Shape{indices.size(), 1, h, w});
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const auto& p = pairs.at(indices[b]);
    if (p.height() != h || p.width() != w) throw DimensionError("stack_pairs: pairs differ in extents");
    std::copy(p.moving.values().begin(), p.moving.values().end(), moving.data() + b * plane);
    std::copy(p.fixed.values().begin(), p.fixed.values().end(), fixed.data() + b * plane);
  }
  return {std::move(moving), std::move(fixed)};
}

double evaluate_loss(const UNetConfig& unet, const LossConfig& loss, const ParameterSet& params,
                     const std::vector<ImagePair>& pairs, std::size_t batch_size) {
  if (pairs.empty()) throw ContractError("evaluate_loss: no pairs");
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double weighted = 0.0;
  for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
    const std::size_t n = std::min(batch_size, order.size() - begin);
    auto [moving, fixed] = stack_pairs(pairs, std::span<const std::size_t>(order).subspan(begin, n));
    Tape<float> tape;
    const auto bound = bind(tape, params, false);
    const auto terms = total_loss<float>(unet, loss, bound, tape.constant(std::move(moving)),
                                         tape.constant(std::move(fixed)));
    weighted += double(terms.total.value().item()) * double(n);
  }
  return weighted / double(pairs.size());
}

TrainResult train(const std::vector<ImagePair>& train_pairs, const std::vector<ImagePair>& val_pairs,
                  const TrainOptions& options) {
  options.validate();
  if (train_pairs.empty()) throw ConfigError("training set is empty");
  options.unet.validate_extents(train_pairs[0].height(), train_pairs[0].width());

  std::mt19937_64 seeder(options.seed);
  const std::uint64_t init_seed = seeder();
  const std::uint64_t batch_seed = seeder();
  const std::uint64_t noise_seed = seeder();

  TrainResult result;
  ParameterSet params = build_unet<float>(options.unet, init_seed);
  auto state = AdamSgldState<float>::init(params, options.optim, noise_seed);

  std::mt19937_64 batch_rng(batch_seed);
  std::vector<std::size_t> order(train_pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();
  const std::size_t batch = std::min(options.batch_size, order.size());
  std::vector<std::size_t> indices(batch);

  const auto& sched = options.schedule;
  result.snapshots.reserve(std::size_t(sched.retained_count()));
  for (std::uint64_t it = 1; it <= sched.total_iterations; ++it) {
    for (std::size_t b = 0; b < batch; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), batch_rng);
        cursor = 0;
      }
      indices[b] = order[cursor++];
    }
    auto [moving, fixed] = stack_pairs(train_pairs, indices);

    LossRecord record;
    record.iteration = it;
    try {
      Tape<float> tape;
      const auto bound = bind(tape, params);
      const auto terms = total_loss<float>(options.unet, options.loss, bound, tape.constant(std::move(moving)),
                                           tape.constant(std::move(fixed)));
      record.train_loss = double(terms.total.value().item());
      if (!std::isfinite(record.train_loss)) {
        throw TrainingError("training diverged: loss is " + format_number(record.train_loss), it);
      }
      tape.backward(terms.total);
      collect_grads(bound, params);
      const auto clean = params.grads();
      const auto noisy = inject_noise<float>(clean, state);
      adam_update<float>(params, noisy, state);
    } catch (const NumericError& e) {
      throw TrainingError(std::string("training diverged: ") + e.what(), it);
    }

    if (options.val_every != 0 && !val_pairs.empty() &&
        (it % options.val_every == 0 || it == sched.total_iterations)) {
      record.val_loss = evaluate_loss(options.unet, options.loss, params, val_pairs, options.batch_size);
    }
    if (sched.retains(it)) result.snapshots.push_back(WeightSnapshot{it, params});
    result.history.push_back(record);
    if (options.progress) options.progress(record);
  }
  result.final_parameters = std::move(params);
  return result;
}

std::vector<LossWindow> trailing_windows(const std::vector<LossRecord>& history, std::size_t window) {
  if (window == 0) throw ContractError("trailing_windows: window must be >= 1");
  std::vector<LossWindow> out;
  std::size_t end = history.size();
  while (end > 0) {
    const std::size_t begin = end > window ? end - window : 0;
    LossWindow w;
    w.first_iteration = history[begin].iteration;
    w.last_iteration = history[end - 1].iteration;
    const double n = double(end - begin);
    double sum = 0.0;
    for (std::size_t i = begin; i < end; ++i) sum += history[i].train_loss;
    w.mean = sum / n;
    double sq = 0.0;
    for (std::size_t i = begin; i < end; ++i) sq += (history[i].train_loss - w.mean) * (history[i].train_loss - w.mean);
    w.variance = n > 1 ? sq / (n - 1) : 0.0;
    out.push_back(w);
    end = begin;
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::string loss_csv(const std::vector<LossRecord>& history) {
  std::string out = "iteration,train_loss,val_loss\n";
  for (const auto& r : history) {
    out += std::to_string(r.iteration) + "," + format_number(r.train_loss) + ",";
    if (r.val_loss) out += format_number(*r.val_loss);
    out += "\n";
  }
  return out;
}

}  // namespace sgldreg
