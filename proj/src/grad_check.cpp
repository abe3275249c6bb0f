#include "sgldreg/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "sgldreg/errors.hpp"

namespace sgldreg {
namespace {

double evaluate(const LossFunction& loss, const std::vector<TensorD>& inputs) {
  Tape<double> tape;
  std::vector<Var<double>> vars;
  for (const auto& t : inputs) vars.push_back(tape.leaf(t, false));
  const double value = loss(tape, vars).value().item();
  if (!std::isfinite(value)) throw NumericError("grad_check: non-finite loss at perturbed point");
  return value;
}

}  // namespace

GradCheckResult grad_check(const LossFunction& loss, const std::vector<TensorD>& inputs, double eps,
                           std::size_t samples, std::uint64_t seed) {
  if (!(eps >= 1e-7 && eps <= 1e-4)) throw ContractError("grad_check: eps must lie in [1e-7, 1e-4]");

  std::vector<TensorD> analytic;
  {
    Tape<double> tape;
    std::vector<Var<double>> vars;
    for (const auto& t : inputs) vars.push_back(tape.leaf(t));
    Var<double> out = loss(tape, vars);
    if (!std::isfinite(out.value().item())) throw NumericError("grad_check: non-finite loss");
    tape.backward(out);
    for (const auto& v : vars) analytic.push_back(v.grad());
  }

  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t j = 0; j < inputs[i].size(); ++j) coords.emplace_back(i, j);
  }
  if (samples != 0 && samples < coords.size()) {
    std::mt19937_64 rng(seed);
    std::vector<std::pair<std::size_t, std::size_t>> picked;
    std::uniform_int_distribution<std::size_t> pick(0, coords.size() - 1);
    for (std::size_t s = 0; s < samples; ++s) picked.push_back(coords[pick(rng)]);
    coords = std::move(picked);
  }

  GradCheckResult result;
  result.coordinates = coords.size();
  std::vector<TensorD> work = inputs;
  for (const auto& [i, j] : coords) {
    const double original = work[i][j];
    work[i][j] = original + eps;
    const double plus = evaluate(loss, work);
    work[i][j] = original - eps;
    const double minus = evaluate(loss, work);
    work[i][j] = original;
    const double numeric = (plus - minus) / (2.0 * eps);
    const double err = std::abs(analytic[i][j] - numeric) / std::max(1.0, std::abs(numeric));
    if (err >= result.max_error) {
      result.max_error = err;
      result.worst_input = i;
      result.worst_index = j;
      result.analytic = analytic[i][j];
      result.numeric = numeric;
    }
  }
  return result;
}

}  // namespace sgldreg
