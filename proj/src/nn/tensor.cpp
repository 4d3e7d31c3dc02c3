#include "contextnav/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace contextnav::nn {

Tensor::Tensor(std::vector<int> s, float fill) : shape(std::move(s)) {
  v.assign(static_cast<size_t>(size()), fill);
}

void Tensor::ensure_grad() {
  if (g.size() != v.size()) g.assign(v.size(), 0.0f);
}

void Tensor::zero_grad() {
  if (!g.empty()) std::fill(g.begin(), g.end(), 0.0f);
}

bool Tensor::all_finite() const {
  for (float x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

Tensor& ParamStore::create(const std::string& name, std::vector<int> shape) {
  if (index_.count(name)) throw std::logic_error("parameter already exists: " + name);
  names_.push_back(name);
  auto [it, ok] = tensors_.emplace(name, Tensor(std::move(shape)));
  index_.emplace(name, names_.size() - 1);
  return it->second;
}

Tensor& ParamStore::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("no such parameter: " + name);
  return it->second;
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("no such parameter: " + name);
  return it->second;
}

void ParamStore::zero_grads() {
  for (auto& name : names_) tensors_[name].zero_grad();
}

int64_t ParamStore::param_count() const {
  int64_t n = 0;
  for (auto& [name, t] : tensors_) n += t.size();
  return n;
}

bool ParamStore::all_finite() const {
  for (auto& [name, t] : tensors_)
    if (!t.all_finite()) return false;
  return true;
}

}  // namespace contextnav::nn
