#include "sgldreg/posterior.hpp"

#include <cmath>

#include "sgldreg/errors.hpp"
#include "sgldreg/parallel.hpp"

namespace sgldreg {
namespace {

template <typename T>
void require_stack(std::span<const BasicDeformationField<T>> fields, const char* where) {
  if (fields.empty()) throw ContractError(std::string(where) + ": no fields");
  for (const auto& f : fields) require_shape(f.tensor().shape(), fields[0].tensor().shape(), where);
}

}  // namespace

std::vector<DeformationField> sample_fields(const UNetConfig& config, const std::vector<WeightSnapshot>& snapshots,
                                            const Tensor& moving, const Tensor& fixed) {
  if (snapshots.empty()) throw ContractError("sample_fields: no snapshots");
  for (const auto& s : snapshots) check_layout(config, s.parameters);
  std::vector<DeformationField> fields(snapshots.size());
  parallel_for(snapshots.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) fields[i] = predict_field<float>(config, snapshots[i].parameters, moving, fixed);
  });
  return fields;
}

template <typename T>
BasicDeformationField<T> posterior_mean(std::span<const BasicDeformationField<T>> fields) {
  require_stack(fields, "posterior_mean");
  const auto& shape = fields[0].tensor().shape();
  BasicTensor<T> out(shape);
  for (std::size_t i = 0; i < out.size(); ++i) {
    double acc = 0.0;
    for (const auto& f : fields) acc += double(f.tensor()[i]);
    out[i] = static_cast<T>(acc / double(fields.size()));
  }
  return BasicDeformationField<T>(std::move(out));
}

template <typename T>
BasicTensor<T> posterior_std(std::span<const BasicDeformationField<T>> fields) {
  require_stack(fields, "posterior_std");
  BasicTensor<T> out(fields[0].tensor().shape());
  if (fields.size() == 1) return out;
  const double n = double(fields.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    double acc = 0.0;
    for (const auto& f : fields) acc += double(f.tensor()[i]);
    const double mean = acc / n;
    double sq = 0.0;
    for (const auto& f : fields) {
      const double d = double(f.tensor()[i]) - mean;
      sq += d * d;
    }
    out[i] = static_cast<T>(std::sqrt(sq / (n - 1.0)));
  }
  return out;
}

PosteriorEstimate estimate_posterior(std::span<const DeformationField> fields) {
  PosteriorEstimate e;
  e.mean_field = posterior_mean(fields);
  e.std_field = posterior_std(fields);
  e.sample_count = fields.size();
  return e;
}

Registration register_pair(const UNetConfig& config, const std::vector<WeightSnapshot>& snapshots,
                           const Tensor& moving, const Tensor& fixed) {
  const auto fields = sample_fields(config, snapshots, moving, fixed);
  Registration r;
  r.estimate = estimate_posterior(fields);
  r.registered = warp_bilinear(moving, r.estimate.mean_field);
  return r;
}

template BasicDeformationField<float> posterior_mean(std::span<const BasicDeformationField<float>>);
template BasicDeformationField<double> posterior_mean(std::span<const BasicDeformationField<double>>);
template BasicTensor<float> posterior_std(std::span<const BasicDeformationField<float>>);
template BasicTensor<double> posterior_std(std::span<const BasicDeformationField<double>>);

}  // namespace sgldreg
