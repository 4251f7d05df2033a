#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "odflow/tensor.hpp"

namespace odflow {

/// Named learnable tensors in registration order. Parameter addresses are
/// stable for the lifetime of the store.
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamStore& other);
  ParamStore& operator=(const ParamStore& other);
  ParamStore(ParamStore&&) = default;
  ParamStore& operator=(ParamStore&&) = default;

  tc::Parameter& add(std::string name, tc::Tensor init);

  bool contains(std::string_view name) const;
  tc::Parameter& at(std::string_view name);
  const tc::Parameter& at(std::string_view name) const;

  std::deque<tc::Parameter>& all() { return params_; }
  const std::deque<tc::Parameter>& all() const { return params_; }
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  void zero_grad();

 private:
  void reindex();

  std::deque<tc::Parameter> params_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

/// Uniform in +-sqrt(6 / (fan_in + fan_out)).
tc::Tensor glorot_uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng);

}  // namespace odflow
