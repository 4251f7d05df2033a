#include "odflow/params.hpp"

#include <cmath>
#include <stdexcept>

namespace odflow {

ParamStore::ParamStore(const ParamStore& other) : params_(other.params_) { reindex(); }

ParamStore& ParamStore::operator=(const ParamStore& other) {
  if (this != &other) {
    params_ = other.params_;
    reindex();
  }
  return *this;
}

void ParamStore::reindex() {
  index_.clear();
  for (std::size_t i = 0; i < params_.size(); ++i) index_.emplace(params_[i].name, i);
}

tc::Parameter& ParamStore::add(std::string name, tc::Tensor init) {
  if (index_.contains(name)) throw std::invalid_argument("duplicate parameter " + name);
  tc::Parameter p;
  p.name = name;
  p.value = std::move(init);
  p.zero_grad();
  params_.push_back(std::move(p));
  index_.emplace(std::move(name), params_.size() - 1);
  return params_.back();
}

bool ParamStore::contains(std::string_view name) const { return index_.find(name) != index_.end(); }

tc::Parameter& ParamStore::at(std::string_view name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter " + std::string(name));
  return params_[it->second];
}

const tc::Parameter& ParamStore::at(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter " + std::string(name));
  return params_[it->second];
}

std::size_t ParamStore::scalar_count() const {
  std::size_t total = 0;
  for (const auto& p : params_) total += p.value.size();
  return total;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

tc::Tensor glorot_uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-bound, bound);
  tc::Tensor t(rows, cols);
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

}  // namespace odflow
