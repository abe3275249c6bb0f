#include "sgldreg/parameters.hpp"

#include "sgldreg/errors.hpp"

namespace sgldreg {

template <typename T>
void BasicParameterSet<T>::add(std::string id, BasicTensor<T> value) {
  if (index_.count(id)) throw ContractError("duplicate parameter id '" + id + "'");
  index_.emplace(id, params_.size());
  BasicTensor<T> grad(value.shape());
  params_.push_back(Parameter{std::move(id), std::move(value), std::move(grad)});
}

template <typename T>
const BasicParameter<T>& BasicParameterSet<T>::at(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw IntegrityError("unknown parameter id '" + id + "'");
  return params_[it->second];
}

template <typename T>
BasicParameter<T>& BasicParameterSet<T>::at(const std::string& id) {
  auto it = index_.find(id);
  if (it == index_.end()) throw IntegrityError("unknown parameter id '" + id + "'");
  return params_[it->second];
}

template <typename T>
std::size_t BasicParameterSet<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <typename T>
void BasicParameterSet<T>::zero_grad() {
  for (auto& p : params_) p.grad.fill(T(0));
}

template <typename T>
std::vector<BasicTensor<T>> BasicParameterSet<T>::grads() const {
  std::vector<BasicTensor<T>> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.grad);
  return out;
}

template <typename T>
bool BasicParameterSet<T>::same_layout(const BasicParameterSet& other) const {
  if (params_.size() != other.params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].id != other.params_[i].id || params_[i].value.shape() != other.params_[i].value.shape()) {
      return false;
    }
  }
  return true;
}

template <typename T>
std::vector<Var<T>> bind(Tape<T>& tape, const BasicParameterSet<T>& params, bool track_grad) {
  std::vector<Var<T>> vars;
  vars.reserve(params.size());
  for (const auto& p : params) vars.push_back(tape.leaf(p.value, track_grad));
  return vars;
}

template <typename T>
void collect_grads(const std::vector<Var<T>>& bound, BasicParameterSet<T>& params) {
  if (bound.size() != params.size()) throw ContractError("collect_grads: binding does not match parameter set");
  for (std::size_t i = 0; i < bound.size(); ++i) params[i].grad = bound[i].grad();
}

template class BasicParameterSet<float>;
template class BasicParameterSet<double>;
template std::vector<Var<float>> bind(Tape<float>&, const BasicParameterSet<float>&, bool);
template std::vector<Var<double>> bind(Tape<double>&, const BasicParameterSet<double>&, bool);
template void collect_grads(const std::vector<Var<float>>&, BasicParameterSet<float>&);
template void collect_grads(const std::vector<Var<double>>&, BasicParameterSet<double>&);

}  // namespace sgldreg
