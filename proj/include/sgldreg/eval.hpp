#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sgldreg/dataset.hpp"
#include "sgldreg/unet.hpp"
#include "sgldreg/warp.hpp"

namespace sgldreg {

// 2|A n B| / (|A| + |B|) for the pixels labelled `label`; 1 when both are empty.
double dice(const LabelMap& a, const LabelMap& b, std::int32_t label);

double mean_squared_error(const Tensor& a, const Tensor& b);

enum class EvalMode { Averaged, Last, Single };

EvalMode parse_mode(const std::string& name);
std::string mode_name(EvalMode mode);

// Averaged: every snapshot. Last: the final snapshot. Single: the baseline.
std::vector<WeightSnapshot> select_snapshots(EvalMode mode, const std::vector<WeightSnapshot>& snapshots,
                                             const std::vector<WeightSnapshot>& baseline);

struct PairMetrics {
  double mse = 0.0;               // MSE(fixed, registered)
  double unregistered_mse = 0.0;  // MSE(fixed, moving)
  // Foreground labels (non-zero) present in either map, with their Dice.
  std::vector<std::pair<std::int32_t, double>> dice;
  std::optional<double> dice_mean;
  std::optional<double> dice_std;  // n-1 divisor over labels, 0 for one label
};

// Registers pair.moving onto pair.fixed with the mean field of `snapshots`.
PairMetrics evaluate_pair(const UNetConfig& config, const ImagePair& pair,
                          const std::vector<WeightSnapshot>& snapshots);

// The field is predicted from (input_moving, input_fixed), then applied to the
// clean moving image and labels and scored against the clean fixed image.
PairMetrics evaluate_pair(const UNetConfig& config, const ImagePair& pair,
                          const std::vector<WeightSnapshot>& snapshots, const Tensor& input_moving,
                          const Tensor& input_fixed);

// Scores registered outputs given an already averaged field.
PairMetrics score_field(const ImagePair& pair, const DeformationField& field);

struct SweepCell {
  EvalMode method = EvalMode::Averaged;
  double sigma = 0.0;
  double mse_mean = 0.0;
  double mse_std = 0.0;
  std::optional<double> dice_mean;
  std::optional<double> dice_std;
  std::vector<double> mse_values;   // per pair, test-list order
  std::vector<double> dice_values;  // per pair mean Dice, when labels exist
  std::vector<double> unregistered_values;  // per pair MSE(fixed, moving), clean images
};

struct SweepReport {
  std::vector<EvalMode> methods;
  std::vector<double> sigmas;
  std::vector<SweepCell> cells;  // method-major

  const SweepCell& cell(EvalMode method, double sigma) const;
};

// Both images of every pair are corrupted with add_gaussian_noise at each sigma.
// The noise stream depends only on (seed, sigma, pair index), so every method
// sees the same corrupted inputs and a sigma gives the same draws in any list.
SweepReport noise_sweep(const UNetConfig& config, const std::vector<ImagePair>& test_pairs,
                        const std::vector<WeightSnapshot>& snapshots, const std::vector<WeightSnapshot>& baseline,
                        std::span<const double> sigmas, std::uint64_t seed);

// Rows (method, metric); per sigma a mean and a std column.
std::string sweep_csv(const SweepReport& report);

struct SweepCsvRow {
  std::string method;
  std::string metric;
  std::vector<double> means;
  std::vector<double> stds;
};
struct SweepCsv {
  std::vector<double> sigmas;
  std::vector<SweepCsvRow> rows;
};
SweepCsv parse_sweep_csv(const std::string& text);

// Human-readable method x sigma grid with "mean (std)" cells.
std::string sweep_table(const SweepReport& report);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;  // two-sided
  std::size_t df = 0;
  double mean_difference = 0.0;
  // Zero variance of the differences: t is 0 or +-inf and p is 1 or 0.
  bool degenerate = false;
};

// Paired Student t-test on d = a - b.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

// Two-sided tail probability of Student's t with `df` degrees of freedom.
double student_t_two_sided(double t, double df);

}  // namespace sgldreg
